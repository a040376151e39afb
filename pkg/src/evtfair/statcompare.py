"""Effect size and significance primitives for comparing repeated runs."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput

_MAGNITUDE_CUTS = ((0.147, "negligible"), (0.33, "small"), (0.474, "medium"))


@dataclass(frozen=True)
class ComparisonResult:
    cliffs_delta: float
    magnitude: str
    bootstrap_ci: tuple[float, float]
    significant: bool

    def to_json_dict(self) -> dict:
        return {
            "cliffs_delta": self.cliffs_delta,
            "magnitude": self.magnitude,
            "ci_lo": self.bootstrap_ci[0],
            "ci_hi": self.bootstrap_ci[1],
            "significant": self.significant,
        }


def cliffs_delta(a, b) -> float:
    """(#{a_i > b_j} - #{a_i < b_j}) / (|a| |b|); ties contribute zero."""
    a = np.asarray(list(a), dtype=float)
    b = np.asarray(list(b), dtype=float)
    if a.size == 0 or b.size == 0:
        raise EmptyInput("both samples must be non-empty")
    diff = a[:, None] - b[None, :]
    return float((np.sum(diff > 0) - np.sum(diff < 0)) / (a.size * b.size))


def delta_magnitude(delta: float) -> str:
    mag = abs(delta)
    for cut, label in _MAGNITUDE_CUTS:
        if mag < cut:
            return label
    return "large"


def bootstrap_test(a, b, n_resamples: int = 1000, alpha: float = 0.05,
                   seed: int = 0) -> ComparisonResult:
    """Percentile bootstrap CI for mean(a) - mean(b); significant when the
    interval excludes zero. Deterministic for a fixed seed."""
    a = np.asarray(list(a), dtype=float)
    b = np.asarray(list(b), dtype=float)
    if a.size == 0 or b.size == 0:
        raise EmptyInput("both samples must be non-empty")
    if n_resamples < 100:
        raise ValueError("n_resamples must be at least 100")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    rng = np.random.default_rng(seed)
    diffs = np.empty(n_resamples)
    for i in range(n_resamples):
        diffs[i] = (
            rng.choice(a, size=a.size, replace=True).mean()
            - rng.choice(b, size=b.size, replace=True).mean()
        )
    lo = float(np.percentile(diffs, 100 * alpha / 2))
    hi = float(np.percentile(diffs, 100 * (1 - alpha / 2)))
    delta = cliffs_delta(a, b)
    return ComparisonResult(
        cliffs_delta=delta,
        magnitude=delta_magnitude(delta),
        bootstrap_ci=(lo, hi),
        significant=not (lo <= 0.0 <= hi),
    )
