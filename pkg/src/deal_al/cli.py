"""Command-line entry point: ``deal-al <command> [options]``.

Commands
--------
preprocess  encode, scale and project a CSV table (needs a JSON sidecar)
bench       run the cross-validated active learning benchmark
report      rebuild report.txt / report.json from a summary.csv
plot        draw learning curves from curves.csv as SVG
xor-demo    the four-quadrant XOR scenario, DEAL against uncertainty sampling

Exit codes: 0 success, 2 malformed input, 3 benchmark cells failed.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import warnings
from pathlib import Path
from typing import Any

import numpy as np

from . import harness, preprocess, stats
from .strategies import STRATEGY_KINDS, Strategy
from .svg import Series, learning_curve_svg

log = logging.getLogger("deal_al")

EXIT_OK, EXIT_INPUT, EXIT_FAILED = 0, 2, 3

CURVE_FIELDS = ("dataset", "strategy", "fold", "repeat", "iteration", "accuracy")
SUMMARY_FIELDS = ("dataset", "strategy", "T", "alc_mean", "alc_std", "full_acc")

BENCH_DEFAULTS: dict[str, Any] = {
    "strategies": list(STRATEGY_KINDS),
    "folds": 10,
    "repeats": 5,
    "max_iters": 200,
    "delta": 0.5,
    "ers_candidate_subsample": 250,
    "ers_eval_subsample": 250,
    "us_margin": "parzen",
    "seed": 0,
}


class UsageError(Exception):
    """Bad input files or options; reported and mapped to exit code 2."""


def _fmt(v: float) -> str:
    return repr(float(v))


def _load_config(path: str | None) -> tuple[dict[str, Any], Path]:
    if path is None:
        return {}, Path.cwd()
    p = Path(path)
    try:
        cfg = json.loads(p.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError(f"config {path} must be a JSON object")
    return cfg, p.resolve().parent


def _setting(args, cfg: dict, key: str, default=None):
    """Command-line flag if given, else config key, else default."""
    v = getattr(args, key, None)
    if v is not None:
        return v
    return cfg.get(key, default)


def _out_dir(args, cfg, base: Path, default: str = ".") -> Path:
    out = args.out if args.out is not None else cfg.get("out")
    if out is None:
        return Path(default)
    out = Path(out)
    return out if args.out is not None or out.is_absolute() else base / out


# ---------------------------------------------------------------------------
# preprocess


def cmd_preprocess(args) -> int:
    cfg, base = _load_config(args.config)
    src = args.input or cfg.get("in")
    meta_path = args.meta or cfg.get("meta")
    if src is None:
        raise UsageError("preprocess needs --in")
    src = Path(src)
    if meta_path is None:
        meta_path = src.with_name(src.name.split(".")[0] + ".meta.json")
    try:
        meta = preprocess.read_meta(meta_path)
        raw = preprocess.load_table(src, meta)
        ds = preprocess.preprocess_table(raw, meta.get("grouping"))
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from exc
    except ValueError as exc:
        raise UsageError(f"{src}: {exc}") from exc
    out = _out_dir(args, cfg, base)
    data_path, prov_path = preprocess.write_dataset(ds, out)
    print(f"{ds.name}: n={ds.X.shape[0]} selected PCA dimension d={ds.X.shape[1]}")
    print(f"wrote {data_path} and {prov_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench


def _dataset_entries(raw_entries, base: Path) -> list[dict[str, Any]]:
    entries = []
    for e in raw_entries:
        if isinstance(e, str):
            e = {"csv": e}
        if not isinstance(e, dict) or "csv" not in e:
            raise UsageError(f"dataset entry {e!r} needs a 'csv' path")
        e = dict(e)
        for key in ("csv", "meta"):
            if e.get(key) is not None:
                p = Path(e[key])
                e[key] = p if p.is_absolute() else base / p
        entries.append(e)
    return entries


def load_benchmark_dataset(entry: dict[str, Any]) -> preprocess.Dataset:
    """Encoded dataset for a config entry; scaling and PCA happen per fold."""
    csv_path = Path(entry["csv"])
    if not csv_path.exists():
        raise UsageError(f"dataset file {csv_path} does not exist")
    if entry.get("meta") is not None:
        meta = preprocess.read_meta(entry["meta"])
    elif csv_path.name.endswith(".dataset.csv"):
        meta = preprocess.dataset_meta(csv_path)
    else:
        guess = csv_path.with_name(csv_path.name.split(".")[0] + ".meta.json")
        if not guess.exists():
            raise UsageError(f"no sidecar given or found for {csv_path}")
        meta = preprocess.read_meta(guess)
    if entry.get("name"):
        meta = dict(meta, name=entry["name"])
    raw = preprocess.load_table(csv_path, meta)
    return preprocess.encode_dataset(raw, entry.get("grouping", meta.get("grouping")))


def write_curves(curves, path: Path) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_FIELDS)
        for c in curves:
            for t, a in enumerate(c.accuracies, start=1):
                w.writerow([c.dataset, c.strategy, c.fold, c.repeat, t, _fmt(a)])


def write_summary(summaries, path: Path) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_FIELDS)
        for s in summaries:
            w.writerow([s.dataset, s.strategy, s.T, _fmt(s.alc_mean), _fmt(s.alc_std),
                        _fmt(s.full_acc)])


def read_summary(path: Path) -> list[dict[str, str]]:
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    if rows and not set(SUMMARY_FIELDS) <= set(rows[0]):
        raise UsageError(f"{path}: expected columns {', '.join(SUMMARY_FIELDS)}")
    return rows


def build_report(rows: list[dict[str, str]], notes=()) -> stats.BenchmarkReport:
    datasets, strategies = [], []
    for r in rows:
        if r["dataset"] not in datasets:
            datasets.append(r["dataset"])
        if r["strategy"] not in strategies:
            strategies.append(r["strategy"])
    S = np.full((len(datasets), len(strategies)), np.nan)
    for r in rows:
        try:
            S[datasets.index(r["dataset"]), strategies.index(r["strategy"])] = float(r["alc_mean"])
        except ValueError as exc:
            raise UsageError(f"bad alc_mean {r['alc_mean']!r}") from exc
    complete = ~np.isnan(S).any(axis=1)
    if not complete.all():
        dropped = [d for d, ok in zip(datasets, complete) if not ok]
        notes = list(notes) + [f"datasets without results for every strategy left out: "
                               f"{', '.join(dropped)}"]
        S = S[complete]
        datasets = [d for d, ok in zip(datasets, complete) if ok]
    report = stats.compare(S, strategies, datasets)
    report.notes.extend(notes)
    return report


def write_report(report: stats.BenchmarkReport, out: Path) -> None:
    (out / "report.txt").write_text(report.to_text(), encoding="utf-8")
    (out / "report.json").write_text(report.to_json(), encoding="utf-8")


def _ers_note(cand: int, ev: int) -> str:
    return (f"ERS scores min({cand}, |U|) random candidates against min({ev}, |U|-1) "
            f"random evaluation points per query")


def cmd_bench(args) -> int:
    cfg, base = _load_config(args.config)
    settings = {k: _setting(args, cfg, k, v) for k, v in BENCH_DEFAULTS.items()}
    if isinstance(settings["strategies"], str):
        settings["strategies"] = [s.strip() for s in settings["strategies"].split(",") if s.strip()]
    raw_entries = args.datasets if args.datasets else cfg.get("datasets", [])
    if not raw_entries:
        raise UsageError("bench needs at least one dataset (--datasets or config 'datasets')")
    entries = _dataset_entries(raw_entries, base if not args.datasets else Path.cwd())
    if settings["delta"] <= 0:
        raise UsageError("delta must be positive")
    try:
        strategies = tuple(
            Strategy(k.lower(), settings["ers_candidate_subsample"],
                     settings["ers_eval_subsample"], settings["us_margin"])
            for k in settings["strategies"]
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if not strategies:
        raise UsageError("no strategies selected")

    datasets = {}
    plans = []
    for e in entries:
        try:
            ds = load_benchmark_dataset(e)
        except ValueError as exc:
            raise UsageError(f"{e['csv']}: {exc}") from exc
        if ds.name in datasets:
            raise UsageError(f"duplicate dataset name {ds.name!r}")
        datasets[ds.name] = ds
        plans.append(harness.ExperimentPlan(
            ds.name, strategies, int(settings["folds"]), int(settings["repeats"]),
            int(settings["max_iters"]), int(settings["seed"]), float(settings["delta"]),
        ))

    jobs = _setting(args, cfg, "jobs", None) or os.cpu_count() or 1
    out = _out_dir(args, cfg, base, default="results")
    out.mkdir(parents=True, exist_ok=True)
    marker = out / "FAILED"
    if marker.exists():
        marker.unlink()

    log.info("running %d dataset(s) x %d strategies with %d job(s)", len(plans),
             len(strategies), jobs)
    result = harness.run_benchmark(plans, datasets, jobs=int(jobs))
    write_curves(result.curves, out / "curves.csv")
    write_summary(result.summaries, out / "summary.csv")
    notes = []
    if any(s.kind == "ers" for s in strategies):
        notes.append(_ers_note(settings["ers_candidate_subsample"], settings["ers_eval_subsample"]))
    if result.summaries:
        rows = [{"dataset": s.dataset, "strategy": s.strategy, "alc_mean": _fmt(s.alc_mean)}
                for s in result.summaries]
        write_report(build_report(rows, notes), out)
    if result.failures:
        marker.write_text("".join(
            f"{c.dataset}\t{c.strategy.name}\tfold={c.fold}\trepeat={c.repeat}\t{err}\n"
            for c, err in result.failures), encoding="utf-8")
        print(f"{len(result.failures)} cell(s) failed; see {marker}", file=sys.stderr)
        return EXIT_FAILED
    print(f"wrote {out / 'curves.csv'}, {out / 'summary.csv'} and report files")
    return EXIT_OK


# ---------------------------------------------------------------------------
# report


def cmd_report(args) -> int:
    cfg, base = _load_config(args.config)
    summary = Path(args.summary or cfg.get("summary") or "summary.csv")
    rows = read_summary(summary)
    if not rows:
        raise UsageError(f"{summary} has no rows")
    out = _out_dir(args, cfg, base, default=str(summary.parent))
    out.mkdir(parents=True, exist_ok=True)
    report = build_report(rows)
    write_report(report, out)
    sys.stdout.write(report.to_text())
    return EXIT_OK


# ---------------------------------------------------------------------------
# plot


def read_curves(path: Path) -> dict[str, dict[str, list[list[float]]]]:
    """dataset -> strategy -> list of runs (accuracy per iteration)."""
    runs: dict[tuple[str, str, str, str], dict[int, float]] = {}
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not set(CURVE_FIELDS) <= set(reader.fieldnames):
                raise UsageError(f"{path}: expected columns {', '.join(CURVE_FIELDS)}")
            for line, r in enumerate(reader, start=2):
                try:
                    key = (r["dataset"], r["strategy"], r["fold"], r["repeat"])
                    runs.setdefault(key, {})[int(r["iteration"])] = float(r["accuracy"])
                except (TypeError, ValueError) as exc:
                    raise UsageError(f"{path}: line {line}: {exc}") from exc
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    out: dict[str, dict[str, list[list[float]]]] = {}
    for (ds, strat, _, _), pts in runs.items():
        seq = [pts[t] for t in sorted(pts)]
        out.setdefault(ds, {}).setdefault(strat, []).append(seq)
    return out


def cmd_plot(args) -> int:
    cfg, base = _load_config(args.config)
    curves_path = Path(args.curves or cfg.get("curves") or "curves.csv")
    data = read_curves(curves_path)
    if not data:
        raise UsageError(f"{curves_path} contains no curves")
    wanted = None
    if args.strategies is not None:
        wanted = [s.strip().upper() for s in args.strategies.split(",") if s.strip()]
        if not wanted:
            raise UsageError("--strategies selects nothing")
    summary_path = Path(args.summary) if args.summary else curves_path.with_name("summary.csv")
    full = {}
    if summary_path.exists():
        for r in read_summary(summary_path):
            full[r["dataset"]] = float(r["full_acc"])
    out = _out_dir(args, cfg, base, default=str(curves_path.parent))
    out.mkdir(parents=True, exist_ok=True)
    written = 0
    for ds in sorted(data):
        names = [s for s in data[ds] if wanted is None or s in wanted]
        if wanted is not None:
            names.sort(key=wanted.index)
        series = []
        for s in names:
            runs = data[ds][s]
            n = min(len(r) for r in runs)
            A = np.array([r[:n] for r in runs])
            series.append(Series(s, A.mean(axis=0), A.std(axis=0)))
        if not series:
            continue
        svg = learning_curve_svg(series, title=ds, reference=full.get(ds))
        (out / f"{ds}.curves.svg").write_text(svg, encoding="utf-8")
        written += 1
    if written == 0:
        raise UsageError("no curves match the selected strategies")
    print(f"wrote {written} plot(s) to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# xor-demo


def run_xor_demo(seed: int, per_quadrant: int = 50, spread: float = 0.35,
                 max_iters: int = 100) -> dict[str, Any]:
    sc = harness.xor_dataset(per_quadrant, spread, seed)
    out: dict[str, Any] = {
        "seed": seed,
        "empty_quadrant": int(sc.empty_quadrant),
        "empty_quadrant_center": harness.XOR_CENTERS[sc.empty_quadrant].tolist(),
        "initial_labeled": sc.initial_labeled.tolist(),
        "strategies": {},
    }
    for kind in ("deal", "us"):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(kind == "us",)))
        res = harness.simulate(sc.dataset.X, sc.dataset.y, sc.test_X, sc.test_y, Strategy(kind),
                               rng, max_iters, initial_labeled=sc.initial_labeled)
        first = res.queries[0]
        out["strategies"][kind.upper()] = {
            "first_query_index": int(first),
            "first_query_location": sc.dataset.X[first].tolist(),
            "first_query_quadrant": int(sc.quadrant[first]),
            "first_query_in_empty_quadrant": bool(sc.quadrant[first] == sc.empty_quadrant),
            "initial_accuracy": res.initial_accuracy,
            "acquisitions_to_0.9": harness.acquisitions_to_reach(res, 0.9),
            "accuracies": res.accuracies,
        }
    return out


def cmd_xor_demo(args) -> int:
    cfg, base = _load_config(args.config)
    seed = int(_setting(args, cfg, "seed", 0))
    result = run_xor_demo(seed, args.per_quadrant, args.spread, args.max_iters)
    out = _out_dir(args, cfg, base)
    out.mkdir(parents=True, exist_ok=True)
    series = [Series(name, r["accuracies"]) for name, r in result["strategies"].items()]
    svg = learning_curve_svg(series, title=f"XOR scenario (seed {seed})",
                             x_label="acquisitions after the 10-label start")
    (out / "xor_learning_curves.svg").write_text(svg, encoding="utf-8")
    summary = {k: v for k, v in result.items() if k != "strategies"}
    summary["strategies"] = {
        name: {k: v for k, v in r.items() if k != "accuracies"}
        for name, r in result["strategies"].items()
    }
    (out / "xor_first_queries.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    for name, r in summary["strategies"].items():
        where = "empty quadrant" if r["first_query_in_empty_quadrant"] else "labeled quadrants"
        print(f"{name}: first query in {where}; reaches 0.9 after "
              f"{r['acquisitions_to_0.9']} acquisitions")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="master random seed")
    common.add_argument("--jobs", type=int, default=argparse.SUPPRESS,
                        help="worker processes (default: all CPUs)")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON config file")

    parser = argparse.ArgumentParser(prog="deal-al", description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=None, help="master random seed")
    parser.add_argument("--jobs", type=int, default=None, help="worker processes")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--config", default=None, help="JSON config file")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", parents=[common], help="preprocess a CSV table")
    p.add_argument("--in", dest="input", help="input CSV")
    p.add_argument("--meta", help="JSON sidecar (default: <name>.meta.json next to the CSV)")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("bench", parents=[common], help="run the benchmark")
    p.add_argument("--datasets", nargs="+", help="dataset CSVs (sidecars found by name)")
    p.add_argument("--strategies", help="comma-separated subset of rs,us,ers,deal")
    p.add_argument("--folds", type=int)
    p.add_argument("--repeats", type=int)
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--ers-candidates", dest="ers_candidate_subsample", type=int)
    p.add_argument("--ers-eval", dest="ers_eval_subsample", type=int)
    p.add_argument("--us-margin", dest="us_margin", choices=("parzen", "regularized"))
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("report", parents=[common], help="statistics from summary.csv")
    p.add_argument("--summary", help="summary.csv written by bench")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("plot", parents=[common], help="SVG learning curves")
    p.add_argument("--curves", help="curves.csv written by bench")
    p.add_argument("--summary", help="summary.csv for the full-data reference line")
    p.add_argument("--strategies", help="comma-separated subset to draw")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("xor-demo", parents=[common], help="XOR exploration demo")
    p.add_argument("--per-quadrant", type=int, default=50)
    p.add_argument("--spread", type=float, default=0.35)
    p.add_argument("--max-iters", dest="max_iters", type=int, default=100)
    p.set_defaults(func=cmd_xor_demo)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not args.verbose:
        warnings.simplefilter("ignore")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
