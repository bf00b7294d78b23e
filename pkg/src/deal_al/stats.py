"""Rank-based comparison of several strategies over many datasets.

Follows the usual recipe for comparing classifiers across datasets: average
ranks per strategy, the Friedman omnibus test (plus the Iman-Davenport F
correction), then Nemenyi critical differences for all pairs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy import stats as st

ALPHAS = (0.01, 0.05, 0.10)

# Two-tailed Nemenyi critical values q_alpha = q_range(1 - alpha; k, inf) / sqrt(2),
# i.e. studentized range quantiles at infinite degrees of freedom divided by
# sqrt(2), rounded to three decimals. Index 0 corresponds to k = 2.
NEMENYI_Q = {
    0.01: (2.576, 2.913, 3.113, 3.255, 3.364, 3.452, 3.526, 3.590, 3.646),
    0.05: (1.960, 2.344, 2.569, 2.728, 2.850, 2.948, 3.031, 3.102, 3.164),
    0.10: (1.645, 2.052, 2.291, 2.460, 2.589, 2.693, 2.780, 2.855, 2.920),
}


@dataclass
class RankMatrix:
    ranks: np.ndarray  # (N datasets, k strategies); 1 = best
    strategies: list[str]
    datasets: list[str]

    @property
    def mean_ranks(self) -> np.ndarray:
        return self.ranks.mean(axis=0)

    @property
    def n_datasets(self) -> int:
        return self.ranks.shape[0]

    @property
    def n_strategies(self) -> int:
        return self.ranks.shape[1]


@dataclass(frozen=True)
class FriedmanResult:
    chi2: float
    iman_davenport_F: float
    p_chi2: float
    p_F: float
    df_chi2: int
    df_F: tuple[int, int]


def ranks(scores, higher_is_better: bool = True, strategies: Sequence[str] | None = None,
          datasets: Sequence[str] | None = None) -> RankMatrix:
    """Per-row ranks with ties sharing the average of their positions."""
    S = np.asarray(scores, dtype=float)
    if S.ndim != 2 or S.shape[1] < 2 or S.shape[0] < 1:
        raise ValueError("scores must be a (datasets, >=2 strategies) matrix")
    if np.isnan(S).any():
        raise ValueError("scores contain NaN")
    R = st.rankdata(-S if higher_is_better else S, axis=1)
    strategies = list(strategies) if strategies is not None else [f"s{j}" for j in range(S.shape[1])]
    datasets = list(datasets) if datasets is not None else [f"d{i}" for i in range(S.shape[0])]
    return RankMatrix(R, strategies, datasets)


def friedman_from_mean_ranks(mean_ranks, n_datasets: int) -> FriedmanResult:
    R = np.asarray(mean_ranks, dtype=float)
    k, N = R.size, int(n_datasets)
    if k < 2 or N < 2:
        raise ValueError("Friedman test needs k >= 2 strategies and N >= 2 datasets")
    chi2 = 12.0 * N / (k * (k + 1)) * (np.sum(R ** 2) - k * (k + 1) ** 2 / 4.0)
    chi2 = max(float(chi2), 0.0)
    df1, df2 = k - 1, (k - 1) * (N - 1)
    denom = N * (k - 1) - chi2
    if denom <= 0:
        # every dataset ranks the strategies identically
        F, p_F = np.inf, 0.0
    else:
        F = (N - 1) * chi2 / denom
        p_F = float(st.f.sf(F, df1, df2))
    return FriedmanResult(chi2, float(F), float(st.chi2.sf(chi2, df1)), p_F, df1, (df1, df2))


def friedman(r: RankMatrix) -> FriedmanResult:
    return friedman_from_mean_ranks(r.mean_ranks, r.n_datasets)


def nemenyi_cd(k: int, N: int, alpha: float = 0.05) -> float:
    """Critical difference in mean rank for the two-tailed Nemenyi test."""
    key = next((a for a in NEMENYI_Q if abs(a - alpha) < 1e-12), None)
    if key is None:
        raise ValueError(f"unsupported alpha {alpha}; choose from {ALPHAS}")
    if not 2 <= k <= 10:
        raise ValueError(f"Nemenyi table covers 2 <= k <= 10, got k={k}")
    if N < 1:
        raise ValueError("N must be positive")
    q = NEMENYI_Q[key][k - 2]
    return q * np.sqrt(k * (k + 1) / (6.0 * N))


@dataclass
class BenchmarkReport:
    strategies: list[str]
    datasets: list[str]
    scores: np.ndarray
    rank_matrix: RankMatrix
    friedman: FriedmanResult | None
    critical_differences: dict[float, float] = field(default_factory=dict)
    significant: dict[float, np.ndarray] = field(default_factory=dict)
    best: list[str] = field(default_factory=list)
    second: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def significant_pairs(self, alpha: float) -> list[tuple[str, str]]:
        """(better, worse) strategy pairs whose mean ranks differ by more than the CD."""
        flags = self.significant.get(alpha)
        if flags is None:
            return []
        m = self.rank_matrix.mean_ranks
        pairs = []
        for i, j in zip(*np.nonzero(np.triu(flags, 1))):
            a, b = (i, j) if m[i] < m[j] else (j, i)
            pairs.append((self.strategies[a], self.strategies[b]))
        return pairs

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "strategies": self.strategies,
            "datasets": self.datasets,
            "scores": self.scores.tolist(),
            "ranks": self.rank_matrix.ranks.tolist(),
            "mean_ranks": dict(zip(self.strategies, self.rank_matrix.mean_ranks.tolist())),
            "best": dict(zip(self.datasets, self.best)),
            "second_best": dict(zip(self.datasets, self.second)),
            "notes": self.notes,
        }
        if self.friedman is not None:
            f = self.friedman
            d["friedman"] = {
                "chi2": f.chi2, "p_chi2": f.p_chi2, "df_chi2": f.df_chi2,
                "iman_davenport_F": f.iman_davenport_F if np.isfinite(f.iman_davenport_F) else None,
                "p_F": f.p_F, "df_F": list(f.df_F),
            }
            d["nemenyi"] = {
                str(a): {
                    "critical_difference": self.critical_differences[a],
                    "significant_pairs": [list(p) for p in self.significant_pairs(a)],
                }
                for a in ALPHAS
            }
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        lines = []
        width = max([len("Dataset")] + [len(d) for d in self.datasets])
        head = f"{'Dataset':<{width}}  " + "  ".join(f"{s:>7}" for s in self.strategies)
        lines += ["Area under the learning curve", head, "-" * len(head)]
        for i, ds in enumerate(self.datasets):
            cells = []
            for j, s in enumerate(self.strategies):
                mark = "*" if s == self.best[i] else ("+" if s == self.second[i] else " ")
                cells.append(f"{self.scores[i, j]:>6.3f}{mark}")
            lines.append(f"{ds:<{width}}  " + "  ".join(cells))
        mr = self.rank_matrix.mean_ranks
        lines.append(f"{'Mean rank':<{width}}  " + "  ".join(f"{v:>7.3f}" for v in mr))
        lines.append("(* best, + second best per dataset)")
        if self.friedman is not None:
            f = self.friedman
            lines += [
                "",
                f"Friedman chi2 = {f.chi2:.4f} (df={f.df_chi2}), p = {f.p_chi2:.3e}",
                f"Iman-Davenport F = {f.iman_davenport_F:.4f} (df={f.df_F[0]},{f.df_F[1]}), "
                f"p = {f.p_F:.3e}",
            ]
            for a in ALPHAS:
                pairs = self.significant_pairs(a)
                desc = ", ".join(f"{x} > {y}" for x, y in pairs) or "none"
                lines.append(f"Nemenyi alpha={a:.2f}: CD = {self.critical_differences[a]:.3f}; "
                             f"significant: {desc}")
        for note in self.notes:
            lines.append(f"Note: {note}")
        return "\n".join(lines) + "\n"


def compare(scores, strategies: Sequence[str], datasets: Sequence[str],
            higher_is_better: bool = True) -> BenchmarkReport:
    """Rank table, Friedman test and pairwise Nemenyi flags.

    With a single strategy or a single dataset only the score table is
    produced; the tests need at least two of each.
    """
    S = np.asarray(scores, dtype=float).reshape(len(datasets), len(strategies))
    order = np.argsort(-S if higher_is_better else S, axis=1, kind="stable")
    best = [strategies[o[0]] for o in order]
    second = [strategies[o[1]] if len(strategies) > 1 else "" for o in order]
    if len(strategies) < 2:
        rm = RankMatrix(np.ones_like(S), list(strategies), list(datasets))
        return BenchmarkReport(list(strategies), list(datasets), S, rm, None, best=best,
                               second=second)
    rm = ranks(S, higher_is_better, strategies, datasets)
    if len(datasets) < 2:
        return BenchmarkReport(list(strategies), list(datasets), S, rm, None, best=best,
                               second=second)
    fr = friedman(rm)
    k, N = rm.n_strategies, rm.n_datasets
    cds = {a: nemenyi_cd(k, N, a) for a in ALPHAS}
    m = rm.mean_ranks
    diff = np.abs(m[:, None] - m[None, :])
    sig = {a: diff > cds[a] for a in ALPHAS}
    return BenchmarkReport(list(strategies), list(datasets), S, rm, fr, cds, sig, best, second)
