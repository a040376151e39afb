"""Exception types shared across the package.

Every domain error derives from EvtFairError so the CLI can map any
expected failure to exit code 1 with a single-line diagnostic.
"""


class EvtFairError(Exception):
    """Base class for all domain errors raised by this package."""


# --- tabular ---------------------------------------------------------------

class MissingColumn(EvtFairError):
    pass


class TypeMismatch(EvtFairError):
    def __init__(self, row_index, column, value=None):
        self.row_index = row_index
        self.column = column
        self.value = value
        super().__init__(
            f"row {row_index}, column {column!r}: cannot parse {value!r} as numeric"
        )


class EmptyDataset(EvtFairError):
    pass


class InvalidRatios(EvtFairError):
    pass


class ValueNotInGroup(EvtFairError):
    pass


# --- scoring ---------------------------------------------------------------

class SchemaMismatch(EvtFairError):
    pass


class ExternalModelFailure(EvtFairError):
    pass


# --- synthetic data generation ----------------------------------------------

class GroupTooSmall(EvtFairError):
    pass


# --- discrimination metrics ---------------------------------------------------

class EmptySamples(EvtFairError):
    pass


class EmptyValues(EvtFairError):
    pass


class MissingGroup(EvtFairError):
    pass


# --- extreme value fitting ---------------------------------------------------

class TooFewSamples(EvtFairError):
    pass


class AllEqual(EvtFairError):
    pass


class DegenerateExcesses(EvtFairError):
    pass


class DegenerateExceedances(EvtFairError):
    pass


class FitDiverged(EvtFairError):
    pass


class InvalidFit(EvtFairError):
    pass


class BootstrapUnstable(EvtFairError):
    pass


# --- statistical comparison ---------------------------------------------------

class EmptyInput(EvtFairError):
    pass
