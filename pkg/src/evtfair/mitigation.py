"""Tail-aware bias mitigation via hyperparameter search.

Random search over the built-in trainer's configuration, minimizing the
absolute worst-case location gap |ecd| on a validation audit subject to an
accuracy floor. The untouched default configuration is always admitted as
trial 0, so the chosen objective can never be worse than the baseline's.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .discrimination import group_metrics
from .scoring import DEFAULT_TRAIN, TrainConfig, evaluate, train_logreg
from .synthgen import fit_generator
from .tabular import Dataset, GroupSpec
from .tailsampler import SamplerConfig, audit

SEARCH_SPACE = {
    "learning_rate": (1e-4, 1.0),   # log-uniform
    "l2": (1e-6, 10.0),             # log-uniform
    "epochs": (10, 200),            # integer uniform
    "class_weight": (0.25, 4.0),    # log-uniform
}

_VALIDATION_TIMEOUT = 120.0
_VALIDATION_BOOTSTRAP = 50


@dataclass(frozen=True)
class TrialResult:
    index: int
    config: TrainConfig
    objective: float  # |ecd| on the validation audit
    feasible: bool
    accuracy_valid: float
    aod_valid: float
    ecd_valid: float


@dataclass(frozen=True)
class MitigationResult:
    best_config: TrainConfig
    best_index: int
    feasible_found: bool
    baseline: dict  # test-set metrics of the default configuration
    best: dict      # test-set metrics of the winning configuration
    trials: tuple

    def to_json_dict(self) -> dict:
        return {
            "best_config": self.best_config.to_json_dict(),
            "best_index": self.best_index,
            "feasible_found": self.feasible_found,
            "baseline": dict(self.baseline),
            "best": dict(self.best),
            "trials": [
                {
                    "index": t.index,
                    "config": t.config.to_json_dict(),
                    "objective": t.objective,
                    "feasible": t.feasible,
                    "accuracy_valid": t.accuracy_valid,
                }
                for t in self.trials
            ],
        }


def sample_config(seed: int, trial: int) -> TrainConfig:
    """Log-uniform draws for rates and weights, uniform for epochs."""
    rng = np.random.default_rng([seed, trial])
    lo, hi = SEARCH_SPACE["learning_rate"]
    lr = 10.0 ** rng.uniform(math.log10(lo), math.log10(hi))
    lo, hi = SEARCH_SPACE["l2"]
    l2 = 10.0 ** rng.uniform(math.log10(lo), math.log10(hi))
    lo, hi = SEARCH_SPACE["epochs"]
    epochs = int(rng.integers(lo, hi + 1))
    lo, hi = SEARCH_SPACE["class_weight"]
    cw = 10.0 ** rng.uniform(math.log10(lo), math.log10(hi))
    return TrainConfig(learning_rate=lr, l2=l2, epochs=epochs, class_weight=cw,
                       seed=trial)


def _metric_bundle(model, ds: Dataset, group: GroupSpec, report) -> dict:
    gm = group_metrics(model, ds, group)
    perf = evaluate(model, ds)
    return {
        "accuracy": perf["accuracy"],
        "f1": perf["f1"],
        "aod": gm.aod,
        "eod": gm.eod,
        "spd": gm.spd,
        "di": gm.di,
        "ecd": report.ecd,
        "acd_diff": report.acd_diff,
        "discriminates": report.discriminates,
    }


def mitigate(train: Dataset, valid: Dataset, test: Dataset, group: GroupSpec,
             n_trials: int, eps_acc: float = 0.02, seed: int = 0,
             sampler: SamplerConfig | None = None) -> MitigationResult:
    """Search n_trials configurations (trial 0 is the default baseline).

    Feasibility: validation accuracy within eps_acc of the baseline's.
    Objective: |ecd| on the validation audit, ties broken by lower AOD and
    then lower trial index. The winner and the baseline are each evaluated
    once on the test set for the report. Deterministic per seed.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    if eps_acc < 0:
        raise ValueError("eps_acc must be nonnegative")
    base_sampler = sampler or SamplerConfig(timeout_secs=_VALIDATION_TIMEOUT, seed=seed)

    # The generators depend only on the data, so fit them once.
    generators = {
        value: fit_generator(train, group, value) for value in group.values
    }
    factory = lambda ds, grp, value: generators[value]

    trials: list[TrialResult] = []
    baseline_acc_valid = None
    for index in range(n_trials):
        cfg = DEFAULT_TRAIN if index == 0 else sample_config(seed, index)
        model = train_logreg(train, cfg)
        acc_valid = evaluate(model, valid)["accuracy"]
        if index == 0:
            baseline_acc_valid = acc_valid
        report = audit(model, valid, group, base_sampler,
                       generator_factory=factory,
                       n_bootstrap=_VALIDATION_BOOTSTRAP)
        gm = group_metrics(model, valid, group)
        trials.append(TrialResult(
            index=index,
            config=cfg,
            objective=abs(report.ecd),
            feasible=acc_valid >= baseline_acc_valid - eps_acc,
            accuracy_valid=acc_valid,
            aod_valid=gm.aod,
            ecd_valid=report.ecd,
        ))

    feasible = [t for t in trials if t.feasible]
    feasible_found = bool(feasible)
    if feasible:
        winner = min(feasible, key=lambda t: (t.objective, t.aod_valid, t.index))
    else:
        winner = trials[0]

    test_sampler = SamplerConfig(
        k_min=base_sampler.k_min, k_max=base_sampler.k_max, m=base_sampler.m,
        timeout_secs=base_sampler.timeout_secs, seed=seed,
    )
    baseline_model = train_logreg(train, DEFAULT_TRAIN)
    baseline_report = audit(baseline_model, test, group, test_sampler,
                            generator_factory=factory,
                            n_bootstrap=_VALIDATION_BOOTSTRAP)
    baseline_metrics = _metric_bundle(baseline_model, test, group, baseline_report)
    if winner.index == 0:
        best_metrics = dict(baseline_metrics)
    else:
        best_model = train_logreg(train, winner.config)
        best_report = audit(best_model, test, group, test_sampler,
                            generator_factory=factory,
                            n_bootstrap=_VALIDATION_BOOTSTRAP)
        best_metrics = _metric_bundle(best_model, test, group, best_report)

    return MitigationResult(
        best_config=winner.config,
        best_index=winner.index,
        feasible_found=feasible_found,
        baseline=baseline_metrics,
        best=best_metrics,
        trials=tuple(trials),
    )
