"""Pool-based query strategies: DEAL, uncertainty, error reduction, random.

A :class:`PoolState` holds the training pool, the current labeled subset and
per-point evidence caches that are updated one kernel summand at a time as
labels arrive. True labels live in an :class:`Oracle` that only the driver
loop (and the random initialization phase) may consult, so the selection
functions cannot peek at them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .distributions import BetaParams
from .kde import (
    ClassEvidence,
    KernelConfig,
    density_estimate,
    log_kernel_matrix,
    pool_bandwidth,
    posterior_from_log_evidence,
)
from .risk import tuv

STRATEGY_KINDS = ("rs", "us", "ers", "deal")


class EmptyPoolError(ValueError):
    """No unlabeled candidates are left to query."""


class EvidenceCache:
    """Running class evidence at a fixed set of query points.

    Keeps both the linear sums k_y and their logarithms; the latter stay
    finite (and comparable) where the linear sums underflow to zero.
    """

    def __init__(self, X: np.ndarray, cfg: KernelConfig):
        self.X = np.asarray(X, dtype=float)
        self.cfg = cfg
        n = self.X.shape[0]
        self.k_pos = np.zeros(n)
        self.k_neg = np.zeros(n)
        self.log_k_pos = np.full(n, -np.inf)
        self.log_k_neg = np.full(n, -np.inf)
        self._log_scale = 0.5 * cfg.dim * np.log(2.0)

    def add(self, x: np.ndarray, label: int) -> None:
        x = np.asarray(x, dtype=float).reshape(1, -1)
        log_term = log_kernel_matrix(x, self.X, self.cfg.bandwidth)[0] + self._log_scale
        if label == 1:
            self.k_pos += np.exp(log_term)
            self.log_k_pos = np.logaddexp(self.log_k_pos, log_term)
        elif label == -1:
            self.k_neg += np.exp(log_term)
            self.log_k_neg = np.logaddexp(self.log_k_neg, log_term)
        else:
            raise ValueError(f"label must be -1 or +1, got {label}")

    def predict(self) -> np.ndarray:
        return np.where(self.k_pos > self.k_neg, 1, -1)


class Oracle:
    """Holds the hidden labels of a pool and hands them out on request."""

    def __init__(self, labels: Iterable[int]):
        self._labels = np.asarray(list(labels), dtype=int)
        if not np.all(np.isin(self._labels, (-1, 1))):
            raise ValueError("oracle labels must be -1 or +1")
        self.n_queries = 0

    def reveal(self, index: int) -> int:
        self.n_queries += 1
        return int(self._labels[index])

    def has_both_classes(self) -> bool:
        return bool(np.any(self._labels == 1) and np.any(self._labels == -1))


class PoolState:
    """Labeled/unlabeled partition of one training pool.

    Parameters
    ----------
    X : ndarray of shape (m, d)
        The full training pool.
    cfg : KernelConfig, optional
        Kernel settings. By default the bandwidth follows the normal reference
        rule on the whole pool and stays fixed afterwards.
    delta : float
        Pseudo-count used when ``cfg`` is built here.
    """

    def __init__(self, X, cfg: KernelConfig | None = None, delta: float = 0.5):
        self.X = np.asarray(X, dtype=float)
        if self.X.ndim != 2 or self.X.shape[0] == 0:
            raise ValueError("pool must be a nonempty (m, d) matrix")
        if cfg is None:
            cfg = KernelConfig(pool_bandwidth(self.X), self.X.shape[1], delta)
        self.cfg = cfg
        self.density = density_estimate(self.X, self.X, cfg)
        self.density.setflags(write=False)
        self.cache = EvidenceCache(self.X, cfg)
        self._is_labeled = np.zeros(self.X.shape[0], dtype=bool)
        self.labeled_indices: list[int] = []
        self.labeled_labels: list[int] = []

    @property
    def size(self) -> int:
        return self.X.shape[0]

    @property
    def unlabeled(self) -> np.ndarray:
        """Unlabeled pool indices in ascending order."""
        return np.flatnonzero(~self._is_labeled)

    @property
    def labeled_X(self) -> np.ndarray:
        return self.X[self.labeled_indices]

    @property
    def labeled_y(self) -> np.ndarray:
        return np.asarray(self.labeled_labels, dtype=int)

    def has_both_classes(self) -> bool:
        return 1 in self.labeled_labels and -1 in self.labeled_labels

    def add_label(self, index: int, label: int) -> None:
        index = int(index)
        if self._is_labeled[index]:
            raise ValueError(f"pool index {index} is already labeled")
        self.cache.add(self.X[index], label)
        self._is_labeled[index] = True
        self.labeled_indices.append(index)
        self.labeled_labels.append(int(label))

    def evidence(self, idx=None) -> ClassEvidence:
        idx = self.unlabeled if idx is None else idx
        return ClassEvidence(self.cache.k_pos[idx], self.cache.k_neg[idx])

    def second_order(self, idx=None) -> BetaParams:
        ev = self.evidence(idx)
        return BetaParams(self.cfg.delta + ev.k_pos, self.cfg.delta + ev.k_neg)


@dataclass(frozen=True)
class Strategy:
    """A query strategy and its knobs.

    ``us_margin`` picks the posterior uncertainty sampling ranks by:
    ``"parzen"`` (plain kernel density posterior) or ``"regularized"``
    (the delta-smoothed posterior mean). Predictions are identical either way.
    """

    kind: str
    candidate_subsample: int = 250
    eval_subsample: int = 250
    us_margin: str = "parzen"

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy {self.kind!r}; expected one of {STRATEGY_KINDS}")
        if self.candidate_subsample < 1 or self.eval_subsample < 1:
            raise ValueError("subsample sizes must be >= 1")
        if self.us_margin not in ("parzen", "regularized"):
            raise ValueError(f"unknown us_margin {self.us_margin!r}")

    @property
    def name(self) -> str:
        return self.kind.upper()

    @property
    def needs_random_start(self) -> bool:
        return self.kind != "deal"


def _require_candidates(state: PoolState) -> np.ndarray:
    U = state.unlabeled
    if U.size == 0:
        raise EmptyPoolError("no unlabeled points left in the pool")
    return U


def tuv_scores(state: PoolState, idx=None) -> np.ndarray:
    idx = state.unlabeled if idx is None else idx
    return tuv(state.second_order(idx), state.density[idx]).tuv


def deal_select(state: PoolState) -> int:
    """Unlabeled index with the largest training utility value."""
    U = _require_candidates(state)
    scores = np.atleast_1d(tuv_scores(state, U))
    return int(U[np.argmax(scores)])


def us_margins(state: PoolState, idx=None, kind: str = "parzen") -> np.ndarray:
    idx = state.unlabeled if idx is None else idx
    if kind == "parzen":
        q = posterior_from_log_evidence(state.cache.log_k_pos[idx], state.cache.log_k_neg[idx])
    else:
        d = state.cfg.delta
        q = (d + state.cache.k_pos[idx]) / (2 * d + state.cache.k_pos[idx] + state.cache.k_neg[idx])
    return np.abs(np.asarray(q) - 0.5)


def us_select(state: PoolState, margin: str = "parzen") -> int:
    """Unlabeled index whose posterior is closest to 1/2."""
    U = _require_candidates(state)
    return int(U[np.argmin(us_margins(state, U, margin))])


def rs_select(state: PoolState, rng: np.random.Generator) -> int:
    U = _require_candidates(state)
    return int(U[rng.integers(U.size)])


def ers_objective(state: PoolState, candidates: np.ndarray, eval_pool: np.ndarray,
                  eval_size: int) -> np.ndarray:
    """Expected post-update 0/1 risk for each candidate.

    ``eval_pool`` holds ``eval_size + 1`` indices; candidate ``c`` is scored on
    the first ``eval_size`` of them that differ from ``c``.
    """
    cfg = state.cfg
    d = cfg.delta
    k_pos = state.cache.k_pos
    k_neg = state.cache.k_neg
    n_eval = eval_pool.size

    logk = log_kernel_matrix(state.X[candidates], state.X[eval_pool], cfg.bandwidth)
    bump = cfg.evidence_scale * np.exp(logk)  # (|C|, n_eval)

    weights = np.ones((candidates.size, n_eval))
    if n_eval > eval_size:
        weights[:, eval_size:] = 0.0
    hit = candidates[:, None] == eval_pool[None, :eval_size]
    rows, cols = np.nonzero(hit)
    weights[rows, cols] = 0.0
    if n_eval > eval_size:
        weights[rows, eval_size] = 1.0
    weights /= eval_size

    kp = k_pos[eval_pool][None, :]
    kn = k_neg[eval_pool][None, :]
    q_if_pos = (d + kp + bump) / (2 * d + kp + kn + bump)
    q_if_neg = (d + kp) / (2 * d + kp + kn + bump)
    risk_pos = (np.minimum(q_if_pos, 1.0 - q_if_pos) * weights).sum(axis=1)
    risk_neg = (np.minimum(q_if_neg, 1.0 - q_if_neg) * weights).sum(axis=1)

    q_c = (d + k_pos[candidates]) / (2 * d + k_pos[candidates] + k_neg[candidates])
    return q_c * risk_pos + (1.0 - q_c) * risk_neg


def ers_select(state: PoolState, rng: np.random.Generator,
               candidate_subsample: int = 250, eval_subsample: int = 250) -> int:
    """Error reduction sampling with 0/1 loss on random subsamples of the pool.

    Candidates are drawn first, then the evaluation points, both from ``rng``.
    When both subsample sizes cover the pool the result is the exhaustive
    one-step lookahead.
    """
    U = _require_candidates(state)
    if U.size == 1:
        return int(U[0])
    if candidate_subsample >= U.size:
        C = U
    else:
        C = np.sort(rng.choice(U, size=candidate_subsample, replace=False))
    eval_size = min(eval_subsample, U.size - 1)
    if eval_size + 1 >= U.size:
        E = U
    else:
        E = rng.choice(U, size=eval_size + 1, replace=False)
    cost = ers_objective(state, C, E, eval_size)
    return int(C[np.argmin(cost)])


def select(state: PoolState, strategy: Strategy, rng: np.random.Generator) -> int:
    if strategy.kind == "deal":
        return deal_select(state)
    if strategy.kind == "us":
        return us_select(state, strategy.us_margin)
    if strategy.kind == "ers":
        return ers_select(state, rng, strategy.candidate_subsample, strategy.eval_subsample)
    return rs_select(state, rng)


def initialize(state: PoolState, strategy: Strategy, rng: np.random.Generator,
               oracle: Oracle, on_acquire: Callable[[int, int], None] | None = None,
               budget: int | None = None) -> list[int]:
    """Run the start-up phase and return the indices it queried.

    RS, US and ERS query uniformly at random until both classes are labeled.
    DEAL needs no special phase: on an empty labeled set its utility is
    proportional to the density, so its first pick is the densest point.
    """
    if not oracle.has_both_classes():
        raise ValueError("the pool contains only one class; cannot initialize")
    acquired: list[int] = []
    if not strategy.needs_random_start:
        return acquired
    while not state.has_both_classes():
        if budget is not None and len(acquired) >= budget:
            break
        i = rs_select(state, rng)
        y = oracle.reveal(i)
        state.add_label(i, y)
        acquired.append(i)
        if on_acquire is not None:
            on_acquire(i, y)
    return acquired
