"""Cross-validated active learning simulations and learning-curve scoring.

Seeding
-------
Every random stream is derived from ``master_seed`` with
``numpy.random.SeedSequence(master_seed, spawn_key=key)`` where ``key`` is

* ``(crc32(dataset), 0)`` for the CV split of a dataset, and
* ``(crc32(dataset), 1, strategy_code, fold, repeat)`` for one simulated run,
  with strategy codes rs=0, us=1, ers=2, deal=3.

Runs therefore never share state and can execute in any order or process.
"""

from __future__ import annotations

import logging
import warnings
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .kde import KernelConfig, pool_bandwidth
from .preprocess import Dataset, FoldPipeline
from .strategies import (
    STRATEGY_KINDS,
    EvidenceCache,
    Oracle,
    PoolState,
    Strategy,
    initialize,
    select,
)

log = logging.getLogger(__name__)

TRUNCATION_FRACTION = 0.9
MAX_ITERS = 200


@dataclass(frozen=True)
class ExperimentPlan:
    dataset: str
    strategies: tuple[Strategy, ...] = tuple(Strategy(k) for k in STRATEGY_KINDS)
    folds: int = 10
    repeats: int = 5
    max_iters: int = MAX_ITERS
    master_seed: int = 0
    delta: float = 0.5
    fold_preprocessing: bool = True

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError("need at least two folds")
        if self.max_iters < 1 or self.repeats < 1:
            raise ValueError("max_iters and repeats must be >= 1")

    def repeats_for(self, strategy: Strategy) -> int:
        # DEAL is deterministic, further repeats would be identical
        return 1 if strategy.kind == "deal" else self.repeats


@dataclass(frozen=True)
class LearningCurve:
    dataset: str
    strategy: str
    fold: int
    repeat: int
    accuracies: tuple[float, ...]


@dataclass(frozen=True)
class AlcSummary:
    dataset: str
    strategy: str
    T: int
    alc_mean: float
    alc_std: float
    full_acc: float
    n_runs: int


def _name_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def split_seed(master_seed: int, dataset: str) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(_name_key(dataset), 0))


def run_rng(master_seed: int, dataset: str, strategy: Strategy, fold: int,
            repeat: int) -> np.random.Generator:
    code = STRATEGY_KINDS.index(strategy.kind)
    ss = np.random.SeedSequence(master_seed,
                                spawn_key=(_name_key(dataset), 1, code, fold, repeat))
    return np.random.default_rng(ss)


def cv_split(y, folds: int, seed) -> np.ndarray:
    """Fold id for every sample; stratified by class where possible.

    Samples are shuffled within each class, the classes are concatenated and
    fold ids dealt out round-robin, which keeps both the fold sizes and the
    per-fold class counts within one of each other.
    """
    y = np.asarray(y)
    n = y.shape[0]
    if n < folds:
        raise ValueError(f"cannot split {n} samples into {folds} folds")
    rng = np.random.default_rng(seed)
    classes, counts = np.unique(y, return_counts=True)
    if counts.min() < folds:
        warnings.warn(
            f"a class has only {counts.min()} members for {folds} folds; "
            "falling back to an unstratified split",
            stacklevel=2,
        )
        order = rng.permutation(n)
    else:
        order = np.concatenate([rng.permutation(np.flatnonzero(y == c)) for c in classes])
    assignment = np.empty(n, dtype=int)
    assignment[order] = np.arange(n) % folds
    return assignment


@dataclass
class FoldData:
    X_train: np.ndarray
    y_train: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray
    dim: int


def prepare_fold(dataset: Dataset, assignment: np.ndarray, fold: int,
                 fold_preprocessing: bool = True) -> FoldData:
    test = assignment == fold
    X_tr, X_te = dataset.X[~test], dataset.X[test]
    if fold_preprocessing:
        pipe = FoldPipeline.fit(X_tr)
        X_tr, X_te = pipe.transform(X_tr), pipe.transform(X_te)
    return FoldData(X_tr, dataset.y[~test], X_te, dataset.y[test], X_tr.shape[1])


def curve_horizon(max_iters: int, assignment: np.ndarray, folds: int) -> int:
    """Common curve length: no run may outlast the smallest training fold."""
    sizes = np.bincount(assignment, minlength=folds)
    return int(min(max_iters, assignment.size - sizes.max()))


@dataclass
class SimulationResult:
    accuracies: list[float]
    queries: list[int]
    initial_accuracy: float | None = None
    state: PoolState | None = field(default=None, repr=False)


def simulate(pool_X, pool_y, test_X, test_y, strategy: Strategy, rng: np.random.Generator,
             max_iters: int, delta: float = 0.5, initial_labeled: Sequence[int] = (),
             cfg: KernelConfig | None = None) -> SimulationResult:
    """Run one active learning loop and record test accuracy after every query.

    The bandwidth and pool density are fixed up front from the whole pool.
    ``initial_labeled`` pool indices are labeled before the loop starts and do
    not count as acquisitions.
    """
    pool_X = np.asarray(pool_X, dtype=float)
    test_y = np.asarray(test_y)
    if cfg is None:
        cfg = KernelConfig(pool_bandwidth(pool_X), pool_X.shape[1], delta)
    state = PoolState(pool_X, cfg)
    oracle = Oracle(pool_y)
    test_cache = EvidenceCache(test_X, cfg)
    acc: list[float] = []
    queries: list[int] = []

    def accuracy() -> float:
        return float(np.mean(test_cache.predict() == test_y))

    def record(i: int, y: int) -> None:
        test_cache.add(pool_X[i], y)
        queries.append(i)
        acc.append(accuracy())

    initial_accuracy = None
    for i in initial_labeled:
        y = oracle.reveal(i)
        state.add_label(i, y)
        test_cache.add(pool_X[i], y)
    if len(initial_labeled):
        initial_accuracy = accuracy()

    initialize(state, strategy, rng, oracle, on_acquire=record, budget=max_iters)
    while len(acc) < max_iters and state.unlabeled.size:
        i = select(state, strategy, rng)
        y = oracle.reveal(i)
        state.add_label(i, y)
        record(i, y)
    return SimulationResult(acc, queries, initial_accuracy, state)


def run_learning_curve(plan: ExperimentPlan, dataset: Dataset, strategy: Strategy,
                       fold: int, repeat: int) -> LearningCurve:
    assignment = cv_split(dataset.y, plan.folds, split_seed(plan.master_seed, dataset.name))
    horizon = curve_horizon(plan.max_iters, assignment, plan.folds)
    data = prepare_fold(dataset, assignment, fold, plan.fold_preprocessing)
    rng = run_rng(plan.master_seed, dataset.name, strategy, fold, repeat)
    res = simulate(data.X_train, data.y_train, data.X_test, data.y_test, strategy, rng,
                   horizon, plan.delta)
    return LearningCurve(dataset.name, strategy.name, fold, repeat, tuple(res.accuracies))


def full_data_accuracy(dataset: Dataset, folds: int = 10, seed=None, delta: float = 0.5,
                       fold_preprocessing: bool = True) -> float:
    """Mean CV accuracy of the classifier trained on each fully labeled fold."""
    if seed is None:
        seed = split_seed(0, dataset.name)
    assignment = cv_split(dataset.y, folds, seed)
    accs = []
    for f in range(folds):
        data = prepare_fold(dataset, assignment, f, fold_preprocessing)
        cfg = KernelConfig(pool_bandwidth(data.X_train), data.dim, delta)
        cache = EvidenceCache(data.X_test, cfg)
        for x, y in zip(data.X_train, data.y_train):
            cache.add(x, int(y))
        accs.append(np.mean(cache.predict() == data.y_test))
    return float(np.mean(accs))


def truncation_point(mean_curves: dict[str, Sequence[float]], full_acc: float,
                     cap: int = MAX_ITERS) -> int:
    """First labeled-set size at which the worst mean curve reaches 90% of full_acc."""
    if not mean_curves:
        raise ValueError("need at least one curve")
    limit = min(cap, min(len(c) for c in mean_curves.values()))
    if limit < 1:
        raise ValueError("curves are empty")
    worst = np.min([np.asarray(c[:limit], dtype=float) for c in mean_curves.values()], axis=0)
    hits = np.flatnonzero(worst >= TRUNCATION_FRACTION * full_acc)
    return int(hits[0] + 1) if hits.size else limit


def alc(curve: Sequence[float], T: int) -> float:
    """Mean accuracy over labeled-set sizes 1..T."""
    if T < 1:
        raise ValueError("truncation point must be >= 1")
    if T > len(curve):
        raise ValueError(f"truncation point {T} beyond curve length {len(curve)}")
    return float(np.mean(np.asarray(curve[:T], dtype=float)))


def mean_curves(curves: Sequence[LearningCurve]) -> dict[str, np.ndarray]:
    by_strategy: dict[str, list[tuple[float, ...]]] = {}
    for c in curves:
        by_strategy.setdefault(c.strategy, []).append(c.accuracies)
    out = {}
    for name, runs in by_strategy.items():
        n = min(len(r) for r in runs)
        out[name] = np.mean([r[:n] for r in runs], axis=0)
    return out


def summarize(curves: Sequence[LearningCurve], full_acc: float,
              cap: int = MAX_ITERS) -> list[AlcSummary]:
    """ALC per strategy of one dataset, all truncated at the same point."""
    means = mean_curves(curves)
    T = truncation_point(means, full_acc, cap)
    rows = []
    for name in means:
        scores = [alc(c.accuracies, T) for c in curves if c.strategy == name]
        std = float(np.std(scores, ddof=1)) if len(scores) > 1 else 0.0
        rows.append(AlcSummary(curves[0].dataset, name, T, float(np.mean(scores)), std,
                               full_acc, len(scores)))
    return rows


# ---------------------------------------------------------------------------
# Full benchmark


@dataclass(frozen=True)
class Cell:
    dataset: str
    strategy: Strategy
    fold: int
    repeat: int

    @property
    def key(self):
        return (self.dataset, STRATEGY_KINDS.index(self.strategy.kind), self.fold, self.repeat)


@dataclass
class BenchmarkResult:
    curves: list[LearningCurve]
    summaries: list[AlcSummary]
    full_accuracy: dict[str, float]
    failures: list[tuple[Cell, str]]


def plan_cells(plan: ExperimentPlan) -> list[Cell]:
    return [Cell(plan.dataset, s, f, r)
            for s in plan.strategies
            for f in range(plan.folds)
            for r in range(plan.repeats_for(s))]


def _run_cell(args):
    plan, dataset, cell = args
    try:
        return cell, run_learning_curve(plan, dataset, cell.strategy, cell.fold, cell.repeat), None
    except Exception as exc:  # reported per cell, the benchmark carries on
        return cell, None, f"{type(exc).__name__}: {exc}"


def _run_full(args):
    plan, dataset = args
    seed = split_seed(plan.master_seed, dataset.name)
    return dataset.name, full_data_accuracy(dataset, plan.folds, seed, plan.delta,
                                            plan.fold_preprocessing)


def run_benchmark(plans: Sequence[ExperimentPlan], datasets: dict[str, Dataset],
                  jobs: int = 1) -> BenchmarkResult:
    """Run every (dataset, strategy, fold, repeat) cell and score the curves.

    Results are collected by cell key, so they do not depend on ``jobs``.
    """
    tasks = [(p, datasets[p.dataset], c) for p in plans for c in plan_cells(p)]
    full_tasks = [(p, datasets[p.dataset]) for p in plans]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            cell_results = list(ex.map(_run_cell, tasks, chunksize=1))
            full = dict(ex.map(_run_full, full_tasks))
    else:
        cell_results = [_run_cell(t) for t in tasks]
        full = dict(_run_full(t) for t in full_tasks)

    cell_results.sort(key=lambda r: r[0].key)
    curves = [c for _, c, err in cell_results if err is None]
    failures = [(cell, err) for cell, _, err in cell_results if err is not None]
    for cell, err in failures:
        log.error("cell %s/%s fold %d repeat %d failed: %s", cell.dataset,
                  cell.strategy.name, cell.fold, cell.repeat, err)

    summaries = []
    for p in plans:
        ds_curves = [c for c in curves if c.dataset == p.dataset]
        if ds_curves:
            summaries.extend(summarize(ds_curves, full[p.dataset], p.max_iters))
    return BenchmarkResult(curves, summaries, full, failures)


# ---------------------------------------------------------------------------
# XOR scenario

XOR_CENTERS = np.array([[1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]])
XOR_LABELS = np.array([1, 1, -1, -1])


def quadrant_of(X) -> np.ndarray:
    """Index into :data:`XOR_CENTERS` of the quadrant containing each point."""
    X = np.atleast_2d(X)
    right = X[:, 0] >= 0
    up = X[:, 1] >= 0
    return np.select([right & up, ~right & ~up, right & ~up], [0, 1, 2], default=3)


@dataclass
class XorScenario:
    dataset: Dataset
    test_X: np.ndarray
    test_y: np.ndarray
    initial_labeled: np.ndarray
    empty_quadrant: int
    quadrant: np.ndarray


def xor_dataset(per_quadrant: int = 50, spread: float = 0.35, seed=0,
                n_labeled: int = 10) -> XorScenario:
    """Four Gaussian blobs in XOR arrangement plus a lopsided labeled start.

    Blobs sit at (+-1, +-1); the (1, 1) and (-1, -1) blobs form class +1. The
    starting labeled set has ``n_labeled`` pool points covering exactly three
    of the four quadrants. An independent test set of the same size is drawn
    from the same distribution.
    """
    if per_quadrant < 10:
        raise ValueError("per_quadrant must be >= 10")
    rng = np.random.default_rng(seed)

    def blobs():
        X = np.concatenate([c + spread * rng.standard_normal((per_quadrant, 2))
                            for c in XOR_CENTERS])
        return X, np.repeat(XOR_LABELS, per_quadrant), np.repeat(np.arange(4), per_quadrant)

    X, y, source = blobs()
    test_X, test_y, _ = blobs()
    empty = int(rng.integers(4))
    # quadrant membership by blob of origin; a stray point across an axis
    # still counts for the blob it was drawn from
    candidates = np.flatnonzero(source != empty)
    while True:
        initial = np.sort(rng.choice(candidates, size=n_labeled, replace=False))
        if np.unique(source[initial]).size == 3:
            break
    ds = Dataset(X, y, "xor", {"stage": "synthetic", "spread": spread,
                               "per_quadrant": per_quadrant})
    return XorScenario(ds, test_X, test_y, initial, empty, source)


def acquisitions_to_reach(result: SimulationResult, level: float) -> int | None:
    """Number of queries until test accuracy first reaches ``level``."""
    if result.initial_accuracy is not None and result.initial_accuracy >= level:
        return 0
    for t, a in enumerate(result.accuracies, start=1):
        if a >= level:
            return t
    return None
