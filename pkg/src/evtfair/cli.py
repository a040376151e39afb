"""Command-line entry point.

Subcommands: audit, gen, gen-eval, rl, mitigate, compare, fit. Machine
outputs are JSON, tabular/plot data are CSV; all file writes are atomic.
Exit codes: 0 success, 1 domain error (single-line JSON diagnostic on
stderr), 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import shlex
import sys

from . import __version__
from .errors import EvtFairError
from .evt import EvtFit, return_level
from .mitigation import mitigate
from .report import (
    atomic_write_text,
    dumps,
    file_sha256,
    format_float,
    render_tables,
    report_to_dict,
    write_sidecars,
)
from .scoring import DEFAULT_TRAIN, ExternalModel, TrainConfig, train_logreg
from .statcompare import bootstrap_test
from .synthgen import (
    detection_auc,
    downstream_f1_loss,
    fit_generator,
    frechet_distance,
    kl_similarity,
    sample,
)
from .tabular import Dataset, GroupSpec, Schema, load_csv, split, validate_group, write_csv
from .tailsampler import SamplerConfig, audit, fit_tail

SPLIT_RATIOS = (0.6, 0.2, 0.2)


def _load_schema(path) -> Schema:
    with open(path, encoding="utf-8") as fh:
        return Schema.from_json_dict(json.load(fh))


def _add_data_args(p):
    p.add_argument("--data", required=True, help="CSV dataset path")
    p.add_argument("--schema", required=True, help="schema JSON path")


def _add_group_args(p):
    p.add_argument("--attr", required=True, help="protected attribute name")
    p.add_argument("--privileged", required=True)
    p.add_argument("--unprivileged", required=True)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evtfair",
        description="Worst-case (tail) fairness audits for binary classifiers.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("audit", help="run a tail fairness audit")
    _add_data_args(p)
    _add_group_args(p)
    p.add_argument("--model", default="builtin:logreg",
                   help="builtin:logreg or exec:<command line>")
    p.add_argument("--out", required=True, help="report JSON output path")
    p.add_argument("--kmin", type=int, default=10)
    p.add_argument("--kmax", type=int, default=50)
    p.add_argument("--m", type=int, default=1, help="synthetic rows per round")
    p.add_argument("--timeout", type=float, default=1200.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--boot", type=int, default=200, help="bootstrap resamples")

    p = sub.add_parser("gen", help="emit synthetic rows for one group")
    _add_data_args(p)
    _add_group_args(p)
    p.add_argument("--target", required=True,
                   help="group value the generator is conditioned on")
    p.add_argument("-n", "--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="CSV output path")

    p = sub.add_parser("gen-eval", help="generation quality metrics")
    p.add_argument("--real", required=True)
    p.add_argument("--synth", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="metrics JSON output path")

    p = sub.add_parser("rl", help="return-level table from a saved fit")
    p.add_argument("--fit", required=True, help="fit JSON path")
    p.add_argument("--m", required=True,
                   help="comma-separated interaction counts, e.g. 500,1000,2000")
    p.add_argument("--out", help="CSV output path (default: stdout)")

    p = sub.add_parser("fit", help="fit the tail of a numeric sample")
    p.add_argument("--values", required=True, help="CSV with a header row")
    p.add_argument("--column", help="column to read (default: first)")
    p.add_argument("--kmin", type=int, default=10)
    p.add_argument("--kmax", type=int, default=50)
    p.add_argument("--boot", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="fit JSON output path")

    p = sub.add_parser("mitigate", help="tail-aware hyperparameter search")
    _add_data_args(p)
    _add_group_args(p)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--eps-acc", type=float, default=0.02)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="mitigation JSON output path")

    p = sub.add_parser("compare", help="effect size and significance of two run sets")
    p.add_argument("--a", required=True, help="CSV of runs (header row)")
    p.add_argument("--b", required=True, help="CSV of runs (header row)")
    p.add_argument("--metric", required=True, help="column to compare")
    p.add_argument("--resamples", type=int, default=1000)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="comparison JSON output path")
    return parser


def _make_model(spec: str, train_ds: Dataset, seed: int):
    if spec == "builtin:logreg":
        cfg = TrainConfig(
            learning_rate=DEFAULT_TRAIN.learning_rate,
            l2=DEFAULT_TRAIN.l2,
            epochs=DEFAULT_TRAIN.epochs,
            class_weight=DEFAULT_TRAIN.class_weight,
            seed=seed,
        )
        return train_logreg(train_ds, cfg), spec
    if spec.startswith("exec:"):
        command = tuple(shlex.split(spec[len("exec:"):]))
        return ExternalModel(command=command, schema=train_ds.schema), spec
    raise EvtFairError(f"unknown model spec {spec!r}")


def _cmd_audit(args) -> int:
    schema = _load_schema(args.schema)
    ds = load_csv(args.data, schema)
    group = GroupSpec(args.attr, args.privileged, args.unprivileged)
    validate_group(ds, group)
    train_ds, _valid, test = split(ds, SPLIT_RATIOS, args.seed)
    model, model_id = _make_model(args.model, train_ds, args.seed)
    cfg = SamplerConfig(k_min=args.kmin, k_max=args.kmax, m=args.m,
                        timeout_secs=args.timeout, seed=args.seed)
    generators = {v: fit_generator(train_ds, group, v) for v in group.values}
    factory = lambda _ds, _grp, value: generators[value]
    metadata = {
        "dataset_sha256": file_sha256(args.data),
        "model": model_id,
        "group": {
            "attribute": group.attribute,
            "privileged": group.privileged_value,
            "unprivileged": group.unprivileged_value,
        },
        "config": cfg.to_json_dict(),
    }
    report = audit(model, test, group, cfg, generator_factory=factory,
                   n_bootstrap=args.boot, metadata=metadata)
    sidecars = write_sidecars(report, args.out)
    obj = report_to_dict(report)
    obj["diagnostics"] = {"sidecars": sorted(sidecars)}
    atomic_write_text(args.out, dumps(obj) + "\n")
    sys.stdout.write(render_tables(report))
    return 0


def _cmd_gen(args) -> int:
    schema = _load_schema(args.schema)
    ds = load_csv(args.data, schema)
    group = GroupSpec(args.attr, args.privileged, args.unprivileged)
    gen = fit_generator(ds, group, args.target)
    rows = sample(gen, args.count, args.seed)
    synth = Dataset(schema, tuple(rows))
    write_csv(synth, args.out)
    return 0


def _cmd_gen_eval(args) -> int:
    schema = _load_schema(args.schema)
    real = load_csv(args.real, schema)
    synth = load_csv(args.synth, schema)
    test = load_csv(args.test, schema)
    metrics = {
        "fid": frechet_distance(real, synth),
        "kl": kl_similarity(real, synth),
        "lgd": detection_auc(real, synth, seed=args.seed),
        "f1_loss": downstream_f1_loss(real, synth, test),
    }
    atomic_write_text(args.out, dumps(metrics) + "\n")
    return 0


def _cmd_rl(args) -> int:
    with open(args.fit, encoding="utf-8") as fh:
        fit = EvtFit.from_json_dict(json.load(fh))
    try:
        counts = [int(s) for s in args.m.split(",") if s]
    except ValueError:
        raise EvtFairError(f"bad --m list {args.m!r}") from None
    lines = ["m,return_level"]
    for m in counts:
        lines.append(f"{m},{format_float(return_level(fit, m))}")
    text = "\n".join(lines) + "\n"
    if args.out:
        atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_fit(args) -> int:
    values = _read_metric_column(args.values, args.column)
    fit = fit_tail(values, args.kmax, n_bootstrap=args.boot, seed=args.seed)
    atomic_write_text(args.out, dumps(fit.to_json_dict()) + "\n")
    return 0


def _cmd_mitigate(args) -> int:
    schema = _load_schema(args.schema)
    ds = load_csv(args.data, schema)
    group = GroupSpec(args.attr, args.privileged, args.unprivileged)
    validate_group(ds, group)
    train_ds, valid, test = split(ds, SPLIT_RATIOS, args.seed)
    result = mitigate(train_ds, valid, test, group, n_trials=args.trials,
                      eps_acc=args.eps_acc, seed=args.seed)
    atomic_write_text(args.out, dumps(result.to_json_dict()) + "\n")
    return 0


def _read_metric_column(path, column):
    import csv as _csv

    with open(path, newline="", encoding="utf-8") as fh:
        reader = _csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EvtFairError(f"{path}: empty file")
        if column is None:
            idx = 0
        else:
            if column not in header:
                raise EvtFairError(f"{path}: no column {column!r}")
            idx = header.index(column)
        values = []
        for record in reader:
            try:
                values.append(float(record[idx]))
            except (IndexError, ValueError):
                raise EvtFairError(f"{path}: bad value in row {len(values)}") from None
    if not values:
        raise EvtFairError(f"{path}: no data rows")
    return values


def _cmd_compare(args) -> int:
    a = _read_metric_column(args.a, args.metric)
    b = _read_metric_column(args.b, args.metric)
    result = bootstrap_test(a, b, n_resamples=args.resamples,
                            alpha=args.alpha, seed=args.seed)
    obj = result.to_json_dict()
    obj["n_a"] = len(a)
    obj["n_b"] = len(b)
    atomic_write_text(args.out, dumps(obj) + "\n")
    return 0


_COMMANDS = {
    "audit": _cmd_audit,
    "gen": _cmd_gen,
    "gen-eval": _cmd_gen_eval,
    "rl": _cmd_rl,
    "fit": _cmd_fit,
    "mitigate": _cmd_mitigate,
    "compare": _cmd_compare,
}


def run(argv) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except EvtFairError as exc:
        diag = {"error": type(exc).__name__, "message": str(exc)}
        sys.stderr.write(json.dumps(diag) + "\n")
        return 1
    except OSError as exc:
        diag = {"error": "OSError", "message": str(exc)}
        sys.stderr.write(json.dumps(diag) + "\n")
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
