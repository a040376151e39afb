"""Counterfactual discrimination values and group fairness metrics.

A CD value is the score change when only the audited protected attribute is
flipped; positive values mean the model disadvantages the individual in its
current group. The tail machinery consumes these values; this module covers
the average-case and quantile-tail summaries.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptySamples, EmptyValues, MissingGroup
from .scoring import score
from .tabular import Dataset, GroupSpec, Row, flip_protected


@dataclass(frozen=True)
class CdSample:
    row: Row
    cd: float  # score(flipped) - score(original), in [-1, 1]
    synthetic: bool = False


@dataclass(frozen=True)
class GroupMetrics:
    aod: float
    eod: float
    spd: float
    di: float | None  # None marks an undefined ratio (privileged rate 0)


def compute_cd(model, rows, group: GroupSpec, synthetic: bool = False) -> list[CdSample]:
    """Score each row and its counterfactual (two batched calls) and take
    the difference. Every row's protected value must be in the group."""
    rows = list(rows)
    if not rows:
        return []
    flipped = [flip_protected(r, group) for r in rows]
    original_scores = score(model, rows)
    flipped_scores = score(model, flipped)
    return [
        CdSample(row=r, cd=sf - so, synthetic=synthetic)
        for r, so, sf in zip(rows, original_scores, flipped_scores)
    ]


def acd(samples) -> float:
    """Average causal discrimination: the mean CD of the given samples."""
    cds = [s.cd for s in samples]
    if not cds:
        raise EmptySamples("no CD samples")
    return float(np.mean(cds))


def cvar(values, alpha: float = 0.95) -> float:
    """Mean of all values at or above the empirical alpha-quantile.

    The quantile uses the 'higher' order-statistic rule so the result is
    deterministic; ties with the quantile are included in the average.
    """
    vals = np.asarray(list(values), dtype=float)
    if vals.size == 0:
        raise EmptyValues("no values")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    q = float(np.quantile(vals, alpha, method="higher"))
    return float(vals[vals >= q].mean())


def _rate(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def group_metrics(model, test: Dataset, group: GroupSpec,
                  scores: list[float] | None = None) -> GroupMetrics:
    """AOD, EOD, SPD, and DI between the two audited groups on a labeled
    test set, under the 'score >= 0.5 means favorable' rule.

    EOD = |TPR_u - TPR_p|, AOD = (|TPR_u - TPR_p| + |FPR_u - FPR_p|) / 2,
    SPD = |P(fav|u) - P(fav|p)|, DI = P(fav|u) / P(fav|p).
    """
    values = test.column(group.attribute)
    for v in group.values:
        if v not in values:
            raise MissingGroup(f"group value {v!r} absent from test set")
    if scores is None:
        scores = score(model, test.rows)
    pred = np.asarray(scores) >= 0.5
    truth = np.asarray(test.favorable_labels())
    stats = {}
    for tag, value in (("u", group.unprivileged_value), ("p", group.privileged_value)):
        mask = np.asarray([v == value for v in values])
        tpr = _rate(float(np.sum(pred & truth & mask)), float(np.sum(truth & mask)))
        fpr = _rate(float(np.sum(pred & ~truth & mask)), float(np.sum(~truth & mask)))
        fav = _rate(float(np.sum(pred & mask)), float(np.sum(mask)))
        stats[tag] = (tpr, fpr, fav)
    d_tpr = abs(stats["u"][0] - stats["p"][0])
    d_fpr = abs(stats["u"][1] - stats["p"][1])
    spd = abs(stats["u"][2] - stats["p"][2])
    di = stats["u"][2] / stats["p"][2] if stats["p"][2] > 0 else None
    return GroupMetrics(aod=0.5 * (d_tpr + d_fpr), eod=d_tpr, spd=spd, di=di)
