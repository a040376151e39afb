"""Audit report serialization and rendering.

Machine output is JSON with every float printed at 17 significant digits
(lossless for binary64, byte-stable across runs); human output is a pair of
fixed-width tables. Files are written atomically: temp file then rename.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile

import numpy as np

from . import __version__
from .evt import EvtFit
from .tailsampler import (
    FIT_DEGENERATE,
    FIT_TIMEOUT,
    AuditReport,
    GroupTailReport,
)

_DENSITY_BINS = 40


# --------------------------------------------------------------------------
# JSON emission with fixed float formatting
# --------------------------------------------------------------------------

def format_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return f"{x:.17g}"


def dumps(obj, indent: int = 0) -> str:
    """json.dumps lookalike with deterministic 17-significant-digit floats
    and insertion-ordered keys."""
    pad = " " * indent
    nxt = indent + 2
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)) and not isinstance(obj, bool):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(float(obj))
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f'{" " * nxt}{json.dumps(str(k))}: {dumps(v, nxt)}'
            for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f'{" " * nxt}{dumps(v, nxt)}' for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def atomic_write_text(path, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".evtfair-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


# --------------------------------------------------------------------------
# report <-> dict
# --------------------------------------------------------------------------

def group_report_to_dict(rep: GroupTailReport) -> dict:
    return {
        "group_value": rep.group_value,
        "n_real": rep.n_real,
        "n_synthetic": rep.n_synthetic,
        "acd": rep.acd,
        "cvar": rep.cvar,
        "passed_cv": rep.passed_cv,
        "status": rep.status,
        "iterations": rep.iterations,
        "fit": rep.fit.to_json_dict() if rep.fit is not None else None,
        "return_levels": {str(m): v for m, v in sorted(rep.return_levels.items())},
    }


def group_report_from_dict(obj: dict) -> GroupTailReport:
    fit = EvtFit.from_json_dict(obj["fit"]) if obj.get("fit") else None
    return GroupTailReport(
        group_value=obj["group_value"],
        n_real=int(obj["n_real"]),
        n_synthetic=int(obj["n_synthetic"]),
        cds=(),
        acd=float(obj["acd"]),
        cvar=float(obj["cvar"]),
        passed_cv=bool(obj["passed_cv"]),
        status=obj["status"],
        iterations=int(obj["iterations"]),
        cv_per_k=(),
        fit=fit,
        return_levels={int(m): float(v) for m, v in obj["return_levels"].items()},
    )


def report_to_dict(report: AuditReport) -> dict:
    meta = {"tool_version": __version__}
    meta.update(report.metadata)
    return {
        "metadata": meta,
        "unprivileged": group_report_to_dict(report.unprivileged),
        "privileged": group_report_to_dict(report.privileged),
        "acd_diff": report.acd_diff,
        "cvar_diff": report.cvar_diff,
        "ecd": report.ecd,
        "discriminates": report.discriminates,
        "ecd_degenerate": report.ecd_degenerate,
    }


def report_from_dict(obj: dict) -> AuditReport:
    return AuditReport(
        metadata=dict(obj["metadata"]),
        unprivileged=group_report_from_dict(obj["unprivileged"]),
        privileged=group_report_from_dict(obj["privileged"]),
        acd_diff=float(obj["acd_diff"]),
        cvar_diff=float(obj["cvar_diff"]),
        ecd=float(obj["ecd"]),
        discriminates=bool(obj["discriminates"]),
        ecd_degenerate=obj["ecd_degenerate"],
    )


def report_json(report: AuditReport) -> str:
    return dumps(report_to_dict(report)) + "\n"


def parse_report_json(text: str) -> AuditReport:
    return report_from_dict(json.loads(text))


# --------------------------------------------------------------------------
# sidecar plot data
# --------------------------------------------------------------------------

def write_sidecars(report: AuditReport, out_path) -> list[str]:
    """Density-curve and Q-Q point CSVs next to the report, one pair per
    group with a non-degenerate tail sample."""
    stem, _ = os.path.splitext(str(out_path))
    written = []
    for tag, rep in (("unprivileged", report.unprivileged),
                     ("privileged", report.privileged)):
        cds = rep.cd_values()
        if cds.size:
            density_path = f"{stem}.{tag}.density.csv"
            hist, edges = np.histogram(cds, bins=_DENSITY_BINS, density=True)
            mids = (edges[:-1] + edges[1:]) / 2.0
            lines = ["cd,density"]
            lines += [f"{format_float(m)},{format_float(h)}" for m, h in zip(mids, hist)]
            atomic_write_text(density_path, "\n".join(lines) + "\n")
            written.append(density_path)
        if rep.fit is not None and not rep.fit.point_mass:
            from .evt import qq_diagnostic

            deltas = [s.cd for s in rep.cds]
            exceed = np.asarray(sorted(d for d in deltas if d > rep.fit.u))
            qq = qq_diagnostic(rep.fit.gev, exceed, rep.fit.tail_type)
            qq_path = f"{stem}.{tag}.qq.csv"
            lines = ["empirical,theoretical"]
            lines += [f"{format_float(e)},{format_float(t)}" for e, t in qq.points]
            atomic_write_text(qq_path, "\n".join(lines) + "\n")
            written.append(qq_path)
    return written


# --------------------------------------------------------------------------
# human-readable tables
# --------------------------------------------------------------------------

def _fmt(x, width=9, digits=2):
    if x is None:
        return "undefined".rjust(width)
    if isinstance(x, float) and math.isinf(x):
        return "inf".rjust(width)
    if isinstance(x, float):
        return f"{x:.{digits}f}".rjust(width)
    return str(x).rjust(width)


def _horizon_text(h) -> str:
    if h is None:
        return "-"
    if isinstance(h, float) and math.isinf(h):
        return "inf"
    return str(int(h))


def render_tables(report: AuditReport) -> str:
    """Fixed-width tail-characteristics and return-level tables."""
    lines = []
    verdict = "DISCRIMINATES" if report.discriminates else "no discrimination flag"
    lines.append("=== Worst-case counterfactual audit ===")
    lines.append(
        f"ACD diff {_fmt(report.acd_diff, 8)}   CVaR diff {_fmt(report.cvar_diff, 8)}   "
        f"ECD {_fmt(report.ecd, 8)}   {verdict}"
    )
    lines.append("")
    header = (
        f"{'group':>14} {'#N real/syn':>12} {'ACD':>8} {'CVaR':>8} "
        f"{'mu':>8} {'sigma':>8} {'xi':>8} {'tau':>8} {'type':>8} {'Q-Q':>12} {'B':>7}"
    )
    lines.append(header)
    lines.append("-" * len(header))
    for rep in (report.unprivileged, report.privileged):
        name = str(rep.group_value)[:14]
        counts = f"{rep.n_real}/{rep.n_synthetic}"
        if rep.status == FIT_DEGENERATE:
            lines.append(
                f"{name:>14} {counts:>12} {_fmt(rep.acd, 8)} {_fmt(rep.cvar, 8)} "
                f"{'no tail discrimination':>47}"
            )
            continue
        if rep.status == FIT_TIMEOUT:
            lines.append(
                f"{name:>14} {counts:>12} {_fmt(rep.acd, 8)} {_fmt(rep.cvar, 8)} "
                f"{'tail search timed out':>47}"
            )
            continue
        fit = rep.fit
        lines.append(
            f"{name:>14} {counts:>12} {_fmt(rep.acd, 8)} {_fmt(rep.cvar, 8)} "
            f"{_fmt(fit.gev.mu, 8)} {_fmt(fit.gev.sigma, 8)} {_fmt(fit.gev.xi, 8)} "
            f"{_fmt(fit.u, 8)} {fit.tail_type:>8} {fit.qq_class:>12} "
            f"{_horizon_text(fit.horizon_b):>7}"
        )
    lines.append("")
    any_levels = any(
        rep.return_levels for rep in (report.unprivileged, report.privileged)
    )
    if any_levels:
        lines.append("Return levels (expected worst case within m interactions)")
        ms = sorted(
            set(report.unprivileged.return_levels) | set(report.privileged.return_levels)
        )
        head = f"{'m':>8} {'RL unprivileged':>16} {'RL privileged':>14}"
        lines.append(head)
        lines.append("-" * len(head))
        for m in ms:
            ru = report.unprivileged.return_levels.get(m)
            rp = report.privileged.return_levels.get(m)
            lines.append(f"{m:>8} {_fmt(ru, 16)} {_fmt(rp, 14)}")
    return "\n".join(lines) + "\n"
