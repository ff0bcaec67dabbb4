"""Command-line pipelines: generate, train, predict, sweep, bound, evaluate.

Every command that writes files also writes a JSON manifest next to them
holding the full flag set, input file digests and library versions, so
any output can be regenerated exactly. Exit codes: 0 success, 2 usage
error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baseline import ForestConfig, load_model, predict_proba, save_model, split_dataset, train_forest
from .core import LabelSpace, happiness_from_exprs
from .criteria import equalized_odds_happiness, overall_accuracy_happiness, statistical_parity_happiness
from .data import (
    SYNTHETIC_COLUMNS,
    SYNTHETIC_SCHEMA,
    SyntheticConfig,
    adult_spec,
    equal_funding_happiness,
    financial_spec,
    generate_synthetic,
    load_csv,
    read_predictions,
    write_csv,
    write_predictions,
)
from .estimators import estimate_moments, sample_size_bound
from .expr import ExprError
from .lp import PostProcessor
from .postprocess import (
    ALPHA_SWEEP,
    EPS_SWEEP,
    accuracy,
    default_alpha_grid,
    default_eps_grid,
    fit_postprocessor,
    happiness_gap,
    sweep,
)

CRITERIA = ("equal-funding", "statistical-parity", "overall-accuracy", "equalized-odds",
            "adult", "financial", "expr:<text>")


class UsageError(Exception):
    pass


# -- helpers ------------------------------------------------------------------


def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _write_manifest(path, args, inputs=(), outputs=(), extra=None):
    config = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    manifest = {
        "command": args.command,
        "config": config,
        "inputs": {str(p): _digest(p) for p in inputs if p},
        "outputs": [str(p) for p in outputs],
        "versions": {
            "happyfair": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
    }
    if extra:
        manifest.update(extra)
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _manifest_for(out) -> Path:
    out = Path(out)
    return out.with_name(out.name + ".manifest.json")


def _load_data(path):
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), [])
    # synthetic files keep their declared category order
    if tuple(h for h in header if not h.startswith("p_")) == SYNTHETIC_COLUMNS:
        return load_csv(path, dict(SYNTHETIC_SCHEMA), LabelSpace.binary())
    return load_csv(path)


def _forest_config(args) -> ForestConfig:
    return ForestConfig(
        tree_count=args.trees, max_depth=args.max_depth, min_leaf=args.min_leaf,
        seed=args.seed, include_group=not args.exclude_group,
        group_features=tuple(args.group_features),
    )


def _with_predictions(args, data):
    """Attach soft predictions from a model, a predictions file, the data itself, or a fresh forest."""
    if args.predictions:
        p = read_predictions(args.predictions)
        if p.shape != (len(data), len(data.label_space)):
            raise ValueError(f"{args.predictions}: expected {len(data)} rows of {len(data.label_space)} probabilities")
        return data.with_predictions(p)
    if args.model:
        model = load_model(args.model)
        return data.with_predictions(predict_proba(model, data.features, data.z))
    if data.p_hat is not None:
        return data
    train, _, _ = split_dataset(data, args.split_seed)
    model = train_forest(train, _forest_config(args))
    return data.with_predictions(predict_proba(model, data.features, data.z))


def _criterion(name, data, fit_set):
    if name == "equal-funding":
        return equal_funding_happiness()
    if name == "statistical-parity":
        return statistical_parity_happiness(data.label_space)
    if name == "overall-accuracy":
        return overall_accuracy_happiness()
    if name == "equalized-odds":
        counts = np.zeros((len(data.label_space), 2))
        np.add.at(counts, (fit_set.y, fit_set.z), 1.0)
        return equalized_odds_happiness(data.label_space, counts / counts.sum(axis=0))
    if name == "adult":
        return adult_spec()
    if name == "financial":
        return financial_spec()
    if name.startswith("expr:"):
        texts = [t.strip() for t in name[5:].split(";")]
        try:
            return happiness_from_exprs(texts, dict(data.schema))
        except ExprError as exc:
            raise UsageError(f"bad happiness expression: {exc}") from None
    raise UsageError(f"unknown criterion {name!r}; choose from {', '.join(CRITERIA)}")


def _check_criterion_name(name):
    if name.startswith("expr:") or name in CRITERIA:
        return name
    raise argparse.ArgumentTypeError(f"unknown criterion {name!r}; choose from {', '.join(CRITERIA)}")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return v


def _grid(text):
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be comma-separated numbers, got {text!r}") from None
    if not values or any(math.isnan(v) for v in values):
        raise argparse.ArgumentTypeError("grid must be a non-empty list of numbers")
    return sorted(values)


# -- commands -----------------------------------------------------------------


def cmd_generate(args):
    cfg = SyntheticConfig(count=args.count, seed=args.seed, group1_surcharge=args.surcharge)
    data = generate_synthetic(cfg)
    write_csv(data, args.out, predictions=False)
    _write_manifest(_manifest_for(args.out), args, outputs=[args.out])
    print(f"wrote {len(data)} rows to {args.out}")


def cmd_train(args):
    data = _load_data(args.data)
    train, _, _ = split_dataset(data, args.split_seed)
    model = train_forest(train, _forest_config(args))
    save_model(model, args.out)
    _write_manifest(_manifest_for(args.out), args, inputs=[args.data], outputs=[args.out])
    print(f"trained {len(model.trees)} trees on {len(train)} rows; saved to {args.out}")


def cmd_predict(args):
    data = _load_data(args.data)
    model = load_model(args.model)
    p = predict_proba(model, data.features, data.z)
    write_predictions(p, args.out)
    _write_manifest(_manifest_for(args.out), args, inputs=[args.data, args.model], outputs=[args.out])
    print(f"wrote {len(p)} predictions to {args.out}")


def _pipeline(args):
    data = _with_predictions(args, _load_data(args.data))
    _, val, test = split_dataset(data, args.split_seed)
    enforce = _criterion(args.criterion, data, val)
    measure = _criterion(args.measure or args.criterion, data, val)
    return val, test, estimate_moments(val, enforce), estimate_moments(val, measure), estimate_moments(test, measure)


def cmd_sweep(args):
    val, test, m_fit, m_val, m_test = _pipeline(args)
    if args.grid is not None:
        grid = args.grid
    elif args.mode == EPS_SWEEP:
        grid = default_eps_grid(m_fit, args.grid_size)
    else:
        grid = default_alpha_grid(m_fit, args.grid_size)
    curve_val, curve_test = sweep(m_fit, m_val, m_test, grid, args.mode)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "curve_validation.csv", out / "curve_test.csv"]
    for path, curve in zip(paths, (curve_val, curve_test)):
        path.write_text(curve.to_csv(), encoding="utf-8")
    _write_manifest(out / "manifest.json", args,
                    inputs=[args.data, args.model, args.predictions], outputs=paths)
    feasible = curve_val.feasible()
    print(f"{len(feasible)}/{len(grid)} feasible points; curves in {out}")
    if feasible:
        best = min(feasible, key=lambda p: p.gap_inf_norm)
        print(f"smallest validation gap {best.gap_inf_norm:.6g} at accuracy {best.accuracy:.4f}")


def cmd_evaluate(args):
    val, test, m_fit, m_val, m_test = _pipeline(args)
    k = len(val.label_space)
    rows = [("identity", math.nan, PostProcessor.identity(k))]
    if args.value is not None:
        pp, sol = fit_postprocessor(m_fit, args.value, args.mode)
        if pp is None:
            raise RuntimeError(f"post-processing LP at {args.mode}={args.value} is {sol.status}")
        rows.append((args.mode, args.value, pp))
    header = ["postprocessor", "constraint", "split", "accuracy"] + [f"gap_{i}" for i in range(m_val.dim)]
    lines = [header]
    for name, value, pp in rows:
        for split, m in (("validation", m_val), ("test", m_test)):
            gap = happiness_gap(pp, m)
            lines.append([name, repr(float(value)), split, repr(accuracy(pp, m))] + [repr(float(g)) for g in gap])
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh, lineterminator="\n").writerows(lines)
    _write_manifest(_manifest_for(args.out), args,
                    inputs=[args.data, args.model, args.predictions], outputs=[args.out])
    for line in lines:
        print(",".join(str(c) for c in line))


def cmd_bound(args):
    print(sample_size_bound(args.gamma, args.delta, args.C, args.n, args.labels))
    if args.manifest:
        _write_manifest(args.manifest, args)


# -- parser -------------------------------------------------------------------


def _add_forest_flags(p):
    p.add_argument("--seed", type=int, default=0, help="forest seed")
    p.add_argument("--trees", type=_positive_int, default=ForestConfig.tree_count)
    p.add_argument("--max-depth", type=_positive_int, default=ForestConfig.max_depth)
    p.add_argument("--min-leaf", type=_positive_int, default=ForestConfig.min_leaf)
    p.add_argument("--exclude-group", action="store_true",
                   help="train without z and the group feature columns")
    p.add_argument("--group-features", nargs="*", default=list(ForestConfig.group_features))


def _add_pipeline_flags(p):
    p.add_argument("--data", required=True, help="dataset CSV")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--model", help="saved forest (.npz); default trains one on the train split")
    src.add_argument("--predictions", help="CSV of p_0..p_K rows aligned with --data")
    p.add_argument("--split-seed", type=int, default=0)
    _add_forest_flags(p)
    p.add_argument("--criterion", type=_check_criterion_name, default="equal-funding",
                   help="happiness function to enforce: " + " | ".join(CRITERIA))
    p.add_argument("--measure", type=_check_criterion_name, default=None,
                   help="happiness function to report (defaults to --criterion)")
    p.add_argument("--mode", choices=(EPS_SWEEP, ALPHA_SWEEP), default=EPS_SWEEP)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="happyfair", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic loan dataset")
    p.add_argument("--count", type=_positive_int, default=SyntheticConfig.count)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--surcharge", type=float, default=SyntheticConfig.group1_surcharge,
                   help="extra loan requested by group 1")
    p.add_argument("--out", default="synthetic.csv")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train the random-forest baseline on the train split")
    p.add_argument("--data", required=True)
    p.add_argument("--split-seed", type=int, default=0)
    _add_forest_flags(p)
    p.add_argument("--out", default="model.npz")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="soft predictions for every row of a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", default="predictions.csv")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("sweep", help="accuracy/fairness trade-off curves")
    _add_pipeline_flags(p)
    p.add_argument("--grid", type=_grid, default=None, help="comma-separated epsilon or alpha values")
    p.add_argument("--grid-size", type=_positive_int, default=50)
    p.add_argument("--out-dir", default="sweep")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("evaluate", help="accuracy and happiness gap before and after post-processing")
    _add_pipeline_flags(p)
    p.add_argument("--value", type=float, default=None, help="epsilon or alpha for one post-processor")
    p.add_argument("--out", default="evaluation.csv")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bound", help="validation-set size for the estimation guarantee")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--C", type=float, required=True, help="bound on |happiness|")
    p.add_argument("--n", type=_positive_int, required=True, help="happiness dimension")
    p.add_argument("--labels", type=_positive_int, required=True, help="number of labels")
    p.add_argument("--manifest", default=None)
    p.set_defaults(func=cmd_bound)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "bound":
        try:
            sample_size_bound(args.gamma, args.delta, args.C, args.n, args.labels)
        except ValueError as exc:
            parser.error(str(exc))
    try:
        args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (OSError, ValueError, RuntimeError, KeyError) as exc:
        print(f"happyfair {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
