"""``smoothnb`` command line: train, predict, evaluate, sensitivity, synth, bench.

Exit status is 0 on success, 1 when input data or files fail validation and 2
on a usage error (unknown flag, malformed flag value).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .classifier import FitConfig, NaiveBayesModel, fit_dp, fit_plain, predict_codes
from .core import atomic_write_text, load_csv, load_schema, read_csv_rows, save_schema, validate_features, write_csv
from .exceptions import SmoothNBError
from .sensitivity import BoundedSample, TrimSpec, sensitivity_report


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _positive(kind):
    def parse(text):
        try:
            value = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
        if not value > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return value
    parse.__name__ = f"positive {kind.__name__}"
    return parse


def _nonneg_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return value


def _probability(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0 <= value < 1:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1), got {text}")
    return value


def _ratio(text):
    from .core import as_fraction

    try:
        value = as_fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a ratio: {text!r}") from None
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _sizes(text):
    try:
        sizes = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not sizes or any(s < 2 for s in sizes) or sizes != sorted(sizes):
        raise argparse.ArgumentTypeError("sizes must be ascending integers >= 2")
    return sizes


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="smoothnb", description="Differentially private Naive Bayes with smooth sensitivity.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="fit a model and write it to a file")
    t.add_argument("--data", required=True)
    t.add_argument("--schema", required=True)
    t.add_argument("--mode", required=True, choices=["plain", "smooth", "global", "bunsteinke"])
    t.add_argument("--epsilon", type=_positive(float), help="total privacy budget")
    t.add_argument("--delta", type=_probability, default=0.0)
    t.add_argument("--noise", choices=["cauchy", "gaussian"], default="cauchy")
    t.add_argument("--ratio", type=_ratio, default=2, help="numeric:categorical budget weight, e.g. 2 or 3:1")
    t.add_argument("--trim", type=_nonneg_int)
    t.add_argument("--beta-mode", choices=["paper", "strict"], default="strict")
    t.add_argument("--gamma", type=_positive(float), default=2.0)
    t.add_argument("--sigma-floor", type=_positive(float), default=1e-6)
    t.add_argument("--seed", type=_nonneg_int)
    t.add_argument("--out", required=True)
    t.add_argument("--explain", action="store_true", help="print the budget ledger and noise provenance as JSON")

    pr = sub.add_parser("predict", help="label rows of a CSV with a saved model")
    pr.add_argument("--model", required=True)
    pr.add_argument("--data", required=True)
    pr.add_argument("--scores", action="store_true", help="add one log-score column per class")
    pr.add_argument("--out", help="output CSV (default: standard output)")

    ev = sub.add_parser("evaluate", help="run a cross-validation experiment from a JSON spec")
    ev.add_argument("--spec", required=True)
    ev.add_argument("--seed", type=_nonneg_int, required=True)
    ev.add_argument("--out-csv", required=True)
    ev.add_argument("--out-json", required=True)
    ev.add_argument("--threads", type=_positive(int), default=1)

    s = sub.add_parser("sensitivity", help="print local, at-distance and smooth sensitivity")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--data")
    src.add_argument("--values", help="comma-separated sample, used with --lower/--upper")
    s.add_argument("--schema")
    s.add_argument("--attribute")
    s.add_argument("--class", dest="label")
    s.add_argument("--lower", type=float)
    s.add_argument("--upper", type=float)
    s.add_argument("--statistic", required=True, choices=["mean", "variance", "trimmed_mean"])
    s.add_argument("--beta", type=_positive(float), required=True)
    s.add_argument("--trim", type=_nonneg_int, default=1)
    s.add_argument("--max-rows", type=_nonneg_int, default=20, help="rows of the A(k) table to show")
    s.add_argument("--json", action="store_true")

    sy = sub.add_parser("synth", help="write a synthetic dataset and its schema")
    sy.add_argument("--rows", type=_positive(int), default=10000)
    sy.add_argument("--categorical", type=_nonneg_int, default=5)
    sy.add_argument("--numeric", type=_nonneg_int, default=5)
    sy.add_argument("--correlated", choices=["numeric", "categorical"], default="numeric")
    sy.add_argument("--seed", type=_nonneg_int, default=0)
    sy.add_argument("--out", required=True)
    sy.add_argument("--schema-out", required=True)

    b = sub.add_parser("bench", help="time dp_global against dp_smooth training")
    b.add_argument("--sizes", type=_sizes, default=[5000, 20000, 80000])
    b.add_argument("--repeats", type=_positive(int), default=3)
    b.add_argument("--out", help="output CSV (default: standard output)")
    return p


def _emit(text: str, path) -> None:
    if path:
        atomic_write_text(path, text)
    else:
        sys.stdout.write(text)


def _train(args) -> int:
    cfg = None
    if args.mode != "plain":
        if args.epsilon is None:
            raise UsageError("smoothnb train: error: --epsilon is required unless --mode plain")
        cfg = FitConfig(mode=f"dp_{args.mode}", noise=args.noise, epsilon=args.epsilon, delta=args.delta,
                        numeric_weight=args.ratio, trim=args.trim, gamma=args.gamma, beta_mode=args.beta_mode,
                        sigma_floor=args.sigma_floor, seed=args.seed)
    schema = load_schema(args.schema)
    data = load_csv(args.data, schema)
    if cfg is None:
        model = fit_plain(data, args.sigma_floor)
    else:
        model = fit_dp(data, cfg)
        print(f"seed: {model.metadata['seed']}")
    atomic_write_text(args.out, model.to_json())
    if args.explain:
        doc = {"budget": None if model.budget is None else model.budget.to_dict(),
               "provenance": list(model.provenance)}
        print(json.dumps(doc, indent=1))
    return 0


def _predict(args) -> int:
    model = NaiveBayesModel.from_json(Path(args.model).read_text())
    rows, _ = read_csv_rows(args.data, model.schema, require_class=False)
    width = len(model.schema.attributes)
    columns = validate_features([r[:width] for r in rows], model.schema)
    codes, scores = predict_codes(model, columns)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["row", model.schema.class_name]
    if args.scores:
        header += [f"log_score_{c}" for c in model.schema.class_labels]
    w.writerow(header)
    for i, code in enumerate(codes):
        line = [i, model.schema.class_labels[code]]
        if args.scores:
            line += [repr(float(v)) for v in scores[i]]
        w.writerow(line)
    _emit(buf.getvalue(), args.out)
    return 0


def _evaluate(args) -> int:
    spec = ex.ExperimentSpec.load(args.spec)
    spec = ex.ExperimentSpec.from_dict({**spec.to_dict(), "seed": args.seed, "threads": args.threads})
    result = ex.run_experiment(spec)
    result.write(args.out_csv, args.out_json)
    for s in result.summaries:
        st = s.setting
        eps = "" if st.epsilon is None else f" eps={st.epsilon:g}"
        extra = "" if st.method in ("plain", "majority") else f" {st.noise} delta={st.delta:g} ratio={st.ratio}"
        print(f"{st.method}{eps}{extra}: accuracy {s.mean_accuracy:.4f} (std {s.std:.4f})")
    return 0


def _sensitivity(args) -> int:
    if args.values is not None:
        if args.lower is None or args.upper is None:
            raise UsageError("smoothnb sensitivity: error: --values needs --lower and --upper")
        try:
            values = [float(v) for v in args.values.split(",")]
        except ValueError:
            raise UsageError("smoothnb sensitivity: error: --values must be comma-separated numbers") from None
        sample = BoundedSample(np.array(values), args.lower, args.upper)
    else:
        if not (args.schema and args.attribute and args.label):
            raise UsageError("smoothnb sensitivity: error: --data needs --schema, --attribute and --class")
        schema = load_schema(args.schema)
        data = load_csv(args.data, schema)
        attr = schema.attribute(args.attribute)
        if not attr.is_numeric:
            raise SmoothNBError(f"attribute {attr.name!r} is categorical; sensitivity needs a numeric column")
        if args.label not in schema.class_labels:
            raise SmoothNBError(f"unknown class {args.label!r}; expected one of {list(schema.class_labels)}")
        c = schema.class_labels.index(args.label)
        col = data.columns[schema.index(attr.name)][data.labels == c]
        sample = BoundedSample(col, attr.lower, attr.upper)
    trim = TrimSpec(args.trim) if args.statistic == "trimmed_mean" else None
    report = sensitivity_report(args.statistic, sample, args.beta, trim=trim)
    if args.json:
        print(json.dumps(report.to_dict(args.max_rows), indent=1))
        return 0
    print(f"statistic: {report.statistic}")
    print(f"n: {sample.n}  bounds: [{sample.lower!r}, {sample.upper!r}]  beta: {report.beta!r}")
    print(f"local sensitivity: {report.local!r}")
    print(f"smooth sensitivity: {report.smooth!r}")
    print("k  A(k)  exp(-beta k) A(k)")
    for k, a in enumerate(report.at_distance[: args.max_rows + 1]):
        print(f"{k}  {float(a)!r}  {float(np.exp(-report.beta * k) * a)!r}")
    return 0


def _synth(args) -> int:
    spec = ex.SyntheticSpec(rows=args.rows, categorical=args.categorical, numeric=args.numeric,
                            correlated=args.correlated, seed=args.seed)
    data = ex.generate_synthetic(spec)
    write_csv(data, args.out)
    save_schema(data.schema, args.schema_out)
    return 0


def _bench(args) -> int:
    points = ex.benchmark_runtime(args.sizes, repeats=args.repeats)
    _emit(ex.runtime_csv(points), args.out)
    return 0


_COMMANDS = {"train": _train, "predict": _predict, "evaluate": _evaluate, "sensitivity": _sensitivity,
             "synth": _synth, "bench": _bench}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    except SmoothNBError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
