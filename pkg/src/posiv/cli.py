"""Command-line front end: simulate, prepare, estimate, diagnose, report.

Exit codes: 0 success, 1 estimation error, 2 input error. All commands are
deterministic functions of their inputs and flags; outputs carry no
timestamps, so identical invocations produce byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from dataclasses import fields as dc_fields
from pathlib import Path

import numpy as np

from . import estimator, plots, prepare, tables
from .datamodel import Dataset, load_dataset, write_dataset
from .errors import EstimationError, InputError, ParseError, PosivError, WeakInstrumentWarning
from .simulator import SimConfig, ground_truth_tau, simulate
from .specs import ModelSpec, builtin_specs, get_spec, parse_spec


def _read_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read config {path!r}: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed config JSON in {path!r}: {exc}") from exc
    if not isinstance(obj, dict):
        raise ParseError("config JSON must be an object")
    return obj


def _sim_config(config: dict, seed_flag: int | None) -> SimConfig:
    sim = config.get("sim", {k: v for k, v in config.items() if k != "schema_map"})
    known = {f.name for f in dc_fields(SimConfig)}
    unknown = set(sim) - known
    if unknown:
        raise ParseError(f"unknown simulator config keys: {sorted(unknown)}")
    if seed_flag is not None:
        sim = {**sim, "seed": seed_flag}
    return SimConfig(**sim)


def _load(path: str, config: dict) -> Dataset:
    return load_dataset(path, config.get("schema_map"))


def _resolve_spec(token: str) -> ModelSpec:
    names = {s.name for s in builtin_specs()}
    if token in names:
        return get_spec(token)
    try:
        text = Path(token).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(
            f"{token!r} is neither a built-in spec name nor a readable file: {exc}"
        ) from exc
    return parse_spec(text)


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fit_for(spec: ModelSpec, design) -> estimator.FitResult:
    if spec.method == "OLS":
        return estimator.fit_ols(design)
    if spec.method == "ILS":
        return estimator.fit_ils(design)
    return estimator.fit_2sls(design)


def _estimation_dataset(ds: Dataset, spec: ModelSpec, args) -> Dataset:
    if spec.level == "session":
        if ds.is_session_level():
            return ds
        return prepare.aggregate_sessions(ds, args.session_top_cut)
    if getattr(args, "item", None) is not None:
        ds = prepare.slice_by_item(ds, args.item)
    if not getattr(args, "no_sample", False):
        ds = prepare.sample_one_per_request(ds, args.sample_seed)
    return ds


def cmd_simulate(args) -> int:
    config = _sim_config(_read_config(args.config), args.seed)
    out = _outdir(args)
    ds, truth = simulate(config)
    write_dataset(ds, str(out / "dataset.csv"))
    truth_doc = {
        "seed": config.seed,
        "marketplace_mode": config.marketplace_mode,
        "n_rows": truth.n_rows,
        "clip_rate": truth.clip_rate,
        "clip_count": truth.clip_count,
        "mean_slope": float(np.mean(truth.slopes)),
        "tau_move_up_one": ground_truth_tau(truth, 2, 1),
        "slopes": {str(i + 1): float(c) for i, c in enumerate(truth.slopes)},
        "item_direction": {
            str(i + 1): int(d) for i, d in enumerate(truth.item_direction)
        },
        "reason_direction": [int(d) for d in truth.reason_direction],
    }
    (out / "truth.json").write_text(
        json.dumps(truth_doc, indent=2) + "\n", encoding="utf-8"
    )
    print(f"wrote {out / 'dataset.csv'} ({ds.n_rows} rows) and {out / 'truth.json'}")
    return 0


def cmd_prepare(args) -> int:
    ds = _load(args.data, _read_config(args.config))
    out = _outdir(args)
    if args.top_n is not None:
        items = prepare.top_items(ds, args.top_n)
        counts = {
            int(i): int((ds.column("item_id") == np.uint64(i)).sum()) for i in items
        }
        path = out / "top_items.csv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["item_id", "n_rows"])
            for i in items:
                writer.writerow([i, counts[i]])
        print(f"wrote {path}")
        return 0
    if args.session_top_cut is not None:
        prepared = prepare.aggregate_sessions(ds, args.session_top_cut)
    else:
        if args.item is not None:
            ds = prepare.slice_by_item(ds, args.item)
        prepared = prepare.sample_one_per_request(ds, args.sample_seed)
    path = out / "prepared.csv"
    write_dataset(prepared, str(path))
    print(f"wrote {path} ({prepared.n_rows} rows)")
    return 0


def cmd_estimate(args) -> int:
    spec = _resolve_spec(args.spec)
    ds = _load(args.data, _read_config(args.config))
    ds = _estimation_dataset(ds, spec, args)
    design = prepare.build_design(ds, spec)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", WeakInstrumentWarning)
        fit = _fit_for(spec, design)
    for w in caught:
        if issubclass(w.category, WeakInstrumentWarning):
            print(f"warning: {w.message}", file=sys.stderr)

    fit.label = spec.name
    table = tables.render_table([fit])
    out = _outdir(args)
    (out / "table.txt").write_text(table, encoding="utf-8")
    (out / "fit.json").write_text(tables.fits_to_json([fit]) + "\n", encoding="utf-8")
    if args.format == "json":
        print(tables.fits_to_json([fit]))
    else:
        print(table, end="")
    return 0


def cmd_diagnose(args) -> int:
    ds = _load(args.data, _read_config(args.config))
    items = prepare.top_items(ds, args.top_n)
    spec = ModelSpec("first-stage", "edge", "outcome", ("position",), "arm", ())
    rows = []
    for item in items:
        sliced = prepare.slice_by_item(ds, item)
        design = prepare.build_design(sliced, spec)
        eq = estimator.first_stage(design).equation("position")
        rows.append(
            (
                str(item),
                float(eq.coef[0]),
                float(eq.se[0]),
                float(eq.ci_low[0]),
                float(eq.ci_high[0]),
                eq.classification,
            )
        )
    out = _outdir(args)
    csv_path = out / "first_stage.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["item_id", "coef", "se", "ci_low", "ci_high", "classification"])
        for label, coef, se, lo, hi, cls in rows:
            writer.writerow([label, repr(coef), repr(se), repr(lo), repr(hi), cls])
    svg_path = out / "first_stage.svg"
    svg_path.write_text(
        plots.forest_svg([(r[0], r[1], r[3], r[4], r[5]) for r in rows]),
        encoding="utf-8",
    )
    shares = {cls: 0 for cls in ("negative", "null", "positive")}
    for r in rows:
        shares[r[5]] += 1
    print(
        f"wrote {csv_path} and {svg_path}; classes: "
        + ", ".join(f"{k}={v}" for k, v in shares.items())
    )
    return 0


def cmd_report(args) -> int:
    ds = _load(args.data, _read_config(args.config))
    spec_list = [_resolve_spec(tok.strip()) for tok in args.specs.split(",") if tok.strip()]
    if not spec_list:
        raise InputError("no specifications given")
    items = prepare.top_items(ds, args.top_n)
    values: list[list[float]] = []
    ses: list[list[float]] = []
    fits_by_spec: dict[str, list[estimator.FitResult]] = {s.name: [] for s in spec_list}
    for item in items:
        sliced = prepare.slice_by_item(ds, item)
        sampled = prepare.sample_one_per_request(sliced, args.sample_seed)
        row_v, row_s = [], []
        for spec in spec_list:
            design = prepare.build_design(sampled, spec)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", WeakInstrumentWarning)
                fit = _fit_for(spec, design)
            fit.label = str(item)
            fits_by_spec[spec.name].append(fit)
            name = "position" if "position" in fit.names else fit.names[0]
            row_v.append(fit.coefficient(name))
            row_s.append(fit.se_of(name))
        values.append(row_v)
        ses.append(row_s)

    out = _outdir(args)
    csv_path = out / "effects.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["item_id", "spec", "coef", "se"])
        for i, item in enumerate(items):
            for g, spec in enumerate(spec_list):
                writer.writerow([item, spec.name, repr(values[i][g]), repr(ses[i][g])])
    svg_path = out / "effects.svg"
    svg_path.write_text(
        plots.bars_svg([str(i) for i in items], [s.name for s in spec_list], values),
        encoding="utf-8",
    )
    for spec in spec_list:
        effect = estimator.aggregate_effect(fits_by_spec[spec.name], args.k1, args.k2)
        se_txt = "n/a" if effect.se is None else tables.format_value(effect.se)
        print(
            f"{spec.name}: tau({args.k1}->{args.k2}) = "
            f"{tables.format_value(effect.tau_hat)} (se {se_txt}, "
            f"{effect.n_items} items)"
        )
    print(f"wrote {csv_path} and {svg_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--config", default=None, help="JSON config (sim fields, schema_map)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument(
        "--format", choices=("text", "json", "csv", "svg"), default="text"
    )

    parser = argparse.ArgumentParser(
        prog="posiv",
        description="Position-effect estimation from ranked-marketplace logs "
        "using past A/B tests as instruments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="generate synthetic data")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("prepare", parents=[common], help="sample/slice/aggregate a dataset")
    p.add_argument("data")
    p.add_argument("--sample-seed", type=int, default=0)
    p.add_argument("--item", type=int, default=None)
    p.add_argument("--top-n", type=int, default=None)
    p.add_argument("--session-top-cut", type=int, default=None)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("estimate", parents=[common], help="fit one specification")
    p.add_argument("data")
    p.add_argument("--spec", required=True, help="built-in name or JSON file")
    p.add_argument("--sample-seed", type=int, default=0)
    p.add_argument("--item", type=int, default=None)
    p.add_argument("--no-sample", action="store_true",
                   help="skip one-row-per-request sampling")
    p.add_argument("--session-top-cut", type=int, default=4)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("diagnose", parents=[common], help="per-item first-stage forest plot")
    p.add_argument("data")
    p.add_argument("--top-n", type=int, default=30)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("report", parents=[common], help="per-item effects across specs")
    p.add_argument("data")
    p.add_argument("--specs", default="spec1,spec2,spec3")
    p.add_argument("--top-n", type=int, default=5)
    p.add_argument("--k1", type=int, default=2)
    p.add_argument("--k2", type=int, default=1)
    p.add_argument("--sample-seed", type=int, default=0)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (EstimationError, PosivError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
