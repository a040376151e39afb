import pytest

from evtfair.mitigation import SEARCH_SPACE, mitigate, sample_config
from evtfair.scoring import DEFAULT_TRAIN
from evtfair.tabular import split
from evtfair.tailsampler import SamplerConfig

from conftest import build_seed_dataset


def quick_sampler(seed=0):
    return SamplerConfig(timeout_secs=10.0, seed=seed)


def test_sample_config_respects_bounds():
    for trial in range(1, 40):
        cfg = sample_config(seed=3, trial=trial)
        lo, hi = SEARCH_SPACE["learning_rate"]
        assert lo <= cfg.learning_rate <= hi
        lo, hi = SEARCH_SPACE["l2"]
        assert lo <= cfg.l2 <= hi
        lo, hi = SEARCH_SPACE["epochs"]
        assert lo <= cfg.epochs <= hi
        lo, hi = SEARCH_SPACE["class_weight"]
        assert lo <= cfg.class_weight <= hi


def test_single_trial_returns_baseline(toy_schema, group):
    ds = build_seed_dataset(toy_schema, n=400, seed=21)
    train, valid, test = split(ds, (0.6, 0.2, 0.2), seed=1)
    result = mitigate(train, valid, test, group, n_trials=1, seed=1,
                      sampler=quick_sampler(1))
    assert result.best_index == 0
    assert result.best_config == DEFAULT_TRAIN
    assert result.best == result.baseline
    assert result.feasible_found
    assert result.trials[0].feasible


def test_baseline_always_trial_zero_and_never_beaten(toy_schema, group):
    ds = build_seed_dataset(toy_schema, n=400, seed=22)
    train, valid, test = split(ds, (0.6, 0.2, 0.2), seed=2)
    result = mitigate(train, valid, test, group, n_trials=4, seed=2,
                      sampler=quick_sampler(2))
    assert result.trials[0].config == DEFAULT_TRAIN
    best = next(t for t in result.trials if t.index == result.best_index)
    assert best.feasible
    assert best.objective <= result.trials[0].objective
    assert best.accuracy_valid >= result.trials[0].accuracy_valid - 0.02


def test_fair_task_all_candidates_near_zero(toy_schema, group):
    # labels independent of the protected column: every model's worst-case
    # gap should be near zero
    import numpy as np

    from evtfair.tabular import Dataset

    rng = np.random.default_rng(23)
    rows = []
    for i in range(400):
        x1 = float(rng.normal())
        rows.append({
            "x1": x1,
            "x2": float(rng.normal()),
            "z": "A" if i % 2 else "B",
            "y": "yes" if x1 > 0 else "no",
        })
    ds = Dataset(toy_schema, tuple(rows))
    train, valid, test = split(ds, (0.6, 0.2, 0.2), seed=3)
    result = mitigate(train, valid, test, group, n_trials=3, seed=3,
                      sampler=quick_sampler(3))
    assert result.feasible_found
    for trial in result.trials:
        assert trial.objective <= 0.05


def test_mitigate_deterministic(toy_schema, group):
    ds = build_seed_dataset(toy_schema, n=300, seed=24)
    train, valid, test = split(ds, (0.6, 0.2, 0.2), seed=4)
    r1 = mitigate(train, valid, test, group, n_trials=3, seed=4,
                  sampler=quick_sampler(4))
    r2 = mitigate(train, valid, test, group, n_trials=3, seed=4,
                  sampler=quick_sampler(4))
    assert r1.best_index == r2.best_index
    assert r1.best == r2.best
    assert [t.objective for t in r1.trials] == [t.objective for t in r2.trials]


def test_mitigate_validation(toy_schema, group):
    ds = build_seed_dataset(toy_schema, n=100, seed=25)
    train, valid, test = split(ds, (0.6, 0.2, 0.2), seed=5)
    with pytest.raises(ValueError):
        mitigate(train, valid, test, group, n_trials=0)
    with pytest.raises(ValueError):
        mitigate(train, valid, test, group, n_trials=1, eps_acc=-0.1)
