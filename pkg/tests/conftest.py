import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from evtfair.tabular import CATEGORICAL, NUMERIC, Column, Dataset, GroupSpec, Schema


@pytest.fixture
def toy_schema():
    return Schema(
        columns=(
            Column("x1", NUMERIC),
            Column("x2", NUMERIC),
            Column("z", CATEGORICAL),
            Column("y", CATEGORICAL),
        ),
        protected=frozenset({"z"}),
        label="y",
        favorable_value="yes",
    )


@pytest.fixture
def group():
    return GroupSpec(attribute="z", privileged_value="A", unprivileged_value="B")


def build_seed_dataset(schema, n=400, seed=11) -> Dataset:
    """Deterministic seed data: correlated numerics, alternating groups,
    labels biased toward the privileged group in the upper x1 range."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n):
        x1 = float(rng.normal(0.0, 1.0))
        x2 = float(0.5 * x1 + rng.normal(0.0, 0.8))
        z = "A" if i % 2 == 0 else "B"
        score = x1 + 0.8 * (z == "A") + 0.3 * float(rng.normal())
        y = "yes" if score > 0.3 else "no"
        rows.append({"x1": x1, "x2": x2, "z": z, "y": y})
    return Dataset(schema, tuple(rows))


@pytest.fixture
def seed_dataset(toy_schema):
    return build_seed_dataset(toy_schema)
