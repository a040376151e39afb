import json
import math
import os

import jsonschema
import numpy as np

from evtfair import evt
from evtfair.evt import EvtFit, GevFit, GpdFit
from evtfair.report import (
    atomic_write_text,
    dumps,
    format_float,
    render_tables,
    report_to_dict,
    write_sidecars,
)
from evtfair.scoring import FunctionModel
from evtfair.tailsampler import SamplerConfig, audit

SCHEMA_PATH = os.path.join(os.path.dirname(__file__), "..", "docs", "report.schema.json")


def test_float_formatting_round_trips():
    for x in [0.1, 1 / 3, 1e-300, 2.5e300, -0.0, 123456.789]:
        assert float(format_float(x)) == x
    assert format_float(0.1) == "0.10000000000000001"
    assert format_float(float("inf")) == "Infinity"


def test_dumps_is_deterministic_and_parseable():
    obj = {"b": [1.5, {"x": None, "ok": True}], "a": 0.1}
    text = dumps(obj)
    assert dumps(obj) == text
    assert json.loads(text) == {"b": [1.5, {"x": None, "ok": True}], "a": 0.1}


def test_atomic_write(tmp_path):
    p = tmp_path / "x.json"
    atomic_write_text(p, "hello\n")
    assert p.read_text() == "hello\n"
    leftovers = [f for f in os.listdir(tmp_path) if f.startswith(".evtfair-")]
    assert leftovers == []


def _biased_report(seed_dataset, group):
    t90 = float(np.quantile(np.asarray(seed_dataset.column("x1")), 0.9))

    def scorer(row):
        bump = 0.3 if row["x1"] > t90 else 0.01
        return min(1.0, 0.5 + (bump if row["z"] == "A" else 0.0))

    return audit(FunctionModel(scorer), seed_dataset, group,
                 SamplerConfig(seed=6), n_bootstrap=50)


def _degenerate_report(seed_dataset, group):
    blind = FunctionModel(lambda r: 0.5)
    return audit(blind, seed_dataset, group, SamplerConfig(seed=7))


def test_report_validates_against_shipped_schema(seed_dataset, group):
    with open(SCHEMA_PATH, encoding="utf-8") as fh:
        schema = json.load(fh)
    for report in (_biased_report(seed_dataset, group),
                   _degenerate_report(seed_dataset, group)):
        obj = json.loads(dumps(report_to_dict(report)))
        jsonschema.validate(obj, schema)


def test_render_tables_degenerate_rows(seed_dataset, group):
    text = render_tables(_degenerate_report(seed_dataset, group))
    assert "no tail discrimination" in text
    assert "no discrimination flag" in text


def test_render_tables_flags_and_purity():
    fit = EvtFit(
        u=0.2, zeta_u=50 / 3076, k=50,
        gpd=GpdFit(0.08, -0.08, math.nan),
        gev=GevFit(0.28, 0.08, -0.08, math.nan),
        se={}, tail_type=evt.TYPE_III, qq_class=evt.QQ_LINEAR, horizon_b=math.inf,
    )
    fit_p = EvtFit(
        u=0.12, zeta_u=50 / 25658, k=50,
        gpd=GpdFit(0.03, -0.08, math.nan),
        gev=GevFit(0.15, 0.03, -0.08, math.nan),
        se={}, tail_type=evt.TYPE_III, qq_class=evt.QQ_LINEAR, horizon_b=math.inf,
    )
    from evtfair.tailsampler import AuditReport, GroupTailReport

    def group_rep(value, f):
        return GroupTailReport(
            group_value=value, n_real=1000, n_synthetic=0, cds=(),
            acd=0.03, cvar=0.1, passed_cv=True, status="fitted",
            iterations=0, cv_per_k=(), fit=f,
            return_levels={m: evt.return_level(f, m) for m in (500, 1000, 2000)},
        )

    report = AuditReport(
        metadata={}, unprivileged=group_rep("Black", fit),
        privileged=group_rep("White", fit_p),
        acd_diff=0.07, cvar_diff=0.0, ecd=0.13, discriminates=True,
        ecd_degenerate="none",
    )
    text = render_tables(report)
    assert "0.13" in text
    assert "DISCRIMINATES" in text
    assert "TypeIII" in text and "inf" in text
    assert render_tables(report) == text


def test_sidecars_written_next_to_report(tmp_path, seed_dataset, group):
    report = _biased_report(seed_dataset, group)
    out = tmp_path / "report.json"
    paths = write_sidecars(report, out)
    assert paths
    for p in paths:
        assert os.path.exists(p)
        header = open(p, encoding="utf-8").readline().strip()
        assert header in ("cd,density", "empirical,theoretical")
