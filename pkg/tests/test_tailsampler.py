import math

import numpy as np
import pytest

from evtfair import evt
from evtfair.evt import EvtFit, GevFit, GpdFit
from evtfair.report import parse_report_json, report_json
from evtfair.scoring import FunctionModel
from evtfair.synthgen import fit_generator
from evtfair.tabular import CATEGORICAL, NUMERIC, Column, Dataset, GroupSpec, Schema
from evtfair.tailsampler import (
    FIT_DEGENERATE,
    FIT_OK,
    FIT_TIMEOUT,
    SamplerConfig,
    audit,
    compute_ecd,
    generate_tail_samples,
)

GROUP = GroupSpec("z", "A", "B")


def id_schema():
    return Schema(
        columns=(Column("id", NUMERIC), Column("z", CATEGORICAL), Column("y", CATEGORICAL)),
        protected=frozenset({"z"}),
        label="y",
        favorable_value="yes",
    )


def id_dataset(n=1000):
    rows = tuple(
        {"id": float(i), "z": "B", "y": "yes" if i % 2 else "no"} for i in range(n)
    )
    # a handful of privileged rows so group fitting is possible elsewhere
    extra = tuple(
        {"id": float(n + i), "z": "A", "y": "yes" if i % 2 else "no"} for i in range(40)
    )
    return Dataset(id_schema(), rows + extra)


def _hash_unit(x: float) -> float:
    return (math.sin(x * 12.9898) * 43758.5453) % 1.0


def exponential_cd_model(scale=0.005):
    """CD of an unprivileged row is a scaled exponential draw keyed off its
    id; scale invariance of the CV screen makes the scale irrelevant."""

    def fn(row):
        if row["z"] == "A":
            u = min(_hash_unit(row["id"]), 1 - 1e-9)
            return 0.25 + scale * (-math.log1p(-u))
        return 0.25

    return FunctionModel(fn)


def pareto_cd_model(alpha=0.8, scale=1e-4):
    def fn(row):
        if row["z"] == "A":
            u = min(_hash_unit(row["id"]), 1 - 1e-12)
            return 0.25 + min(scale * (1.0 - u) ** (-1.0 / alpha), 0.74)
        return 0.25

    return FunctionModel(fn)


def test_degenerate_when_model_ignores_protected():
    ds = id_dataset(200)
    model = FunctionModel(lambda r: 0.3 + 0.2 * (r["id"] % 3 == 0))
    gen = fit_generator(ds, GROUP, "B")
    report = generate_tail_samples(model, ds, GROUP, "B", gen, SamplerConfig(seed=1))
    assert report.status == FIT_DEGENERATE
    assert report.acd == 0.0
    assert report.fit is None and not report.passed_cv


def test_exponential_noise_passes_first_round():
    ds = id_dataset(1000)
    model = exponential_cd_model()
    gen = fit_generator(ds, GROUP, "B")
    report = generate_tail_samples(model, ds, GROUP, "B", gen, SamplerConfig(seed=2))
    assert report.passed_cv and report.status == FIT_OK
    assert report.iterations == 0 and report.n_synthetic == 0
    u, exceed = evt.select_threshold([s.cd for s in report.cds], 50)
    assert len(exceed) == 50
    assert all(e > u for e in exceed)


def test_real_rows_preserved_and_counts_consistent():
    ds = id_dataset(500)
    model = exponential_cd_model()
    gen = fit_generator(ds, GROUP, "B")
    report = generate_tail_samples(model, ds, GROUP, "B", gen, SamplerConfig(seed=3))
    group_rows = [r for r in ds.rows if r["z"] == "B"]
    assert report.n_real == len(group_rows)
    assert [s.row for s in report.cds[: report.n_real]] == group_rows
    assert all(not s.synthetic for s in report.cds[: report.n_real])
    assert all(s.synthetic for s in report.cds[report.n_real:])
    assert report.n_real + report.n_synthetic == len(report.cds)


def test_pareto_noise_times_out():
    ds = id_dataset(1000)
    model = pareto_cd_model()
    gen = fit_generator(ds, GROUP, "B")
    cfg = SamplerConfig(timeout_secs=2.0, seed=4)
    report = generate_tail_samples(model, ds, GROUP, "B", gen, cfg)
    assert report.status == FIT_TIMEOUT
    assert not report.passed_cv
    assert report.n_synthetic == report.iterations * cfg.m
    assert report.n_synthetic > 0


def test_sampler_config_validation():
    with pytest.raises(ValueError):
        SamplerConfig(k_min=1, k_max=50)
    with pytest.raises(ValueError):
        SamplerConfig(k_min=50, k_max=50)
    with pytest.raises(ValueError):
        SamplerConfig(m=0)
    with pytest.raises(ValueError):
        SamplerConfig(timeout_secs=0)


def _fit_with_mu(mu):
    return EvtFit(
        u=0.1, zeta_u=0.01, k=50,
        gpd=GpdFit(0.02, -0.1, math.nan),
        gev=GevFit(mu, 0.03, -0.1, math.nan),
        se={}, tail_type=evt.TYPE_III, qq_class=evt.QQ_LINEAR, horizon_b=math.inf,
    )


def test_compute_ecd_examples():
    res = compute_ecd(_fit_with_mu(0.28), _fit_with_mu(0.15))
    assert res.ecd == pytest.approx(0.13)
    assert res.discriminates and res.degenerate_side == "none"

    res = compute_ecd(_fit_with_mu(0.2), _fit_with_mu(0.2))
    assert res.ecd == 0.0 and not res.discriminates

    res = compute_ecd(_fit_with_mu(0.05), _fit_with_mu(0.02))
    assert res.ecd == pytest.approx(0.03) and not res.discriminates


def test_compute_ecd_degenerate_sides():
    res = compute_ecd(_fit_with_mu(0.3), None)
    assert res.ecd == pytest.approx(0.3)
    assert res.degenerate_side == "privileged" and res.discriminates
    res = compute_ecd(None, None)
    assert res.ecd == 0.0 and res.degenerate_side == "both"


def test_audit_fair_model_fully_degenerate(seed_dataset, group):
    model = FunctionModel(lambda r: 1.0 / (1.0 + math.exp(-r["x1"])))
    report = audit(model, seed_dataset, group, SamplerConfig(seed=5))
    assert report.unprivileged.status == FIT_DEGENERATE
    assert report.privileged.status == FIT_DEGENERATE
    assert report.acd_diff == 0.0
    assert report.ecd == 0.0 and not report.discriminates
    assert report.ecd_degenerate == "both"


def test_audit_biased_tail_model_and_report_round_trip(seed_dataset, group):
    t95 = float(np.quantile(np.asarray(seed_dataset.column("x1")), 0.9))

    def scorer(row):
        bump = 0.3 if row["x1"] > t95 else 0.01
        return min(1.0, 0.5 + (bump if row["z"] == "A" else 0.0))

    report = audit(FunctionModel(scorer), seed_dataset, group,
                   SamplerConfig(seed=6), n_bootstrap=50)
    assert report.ecd > 0.05
    assert report.discriminates

    text = report_json(report)
    parsed = parse_report_json(text)
    assert report_json(parsed) == text
    assert parsed.ecd == report.ecd
    assert parsed.unprivileged.return_levels == report.unprivileged.return_levels
