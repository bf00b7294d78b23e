"""Risk functionals of a second-order posterior under symmetric 0/1 loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import (
    BetaParams,
    DiscreteSecondOrder,
    beta_mean,
    discrete_expected_min,
    expected_min,
)


@dataclass(frozen=True)
class RiskBreakdown:
    point_risk: float | np.ndarray
    expected_risk: float | np.ndarray
    gap: float | np.ndarray
    density: float | np.ndarray
    tuv: float | np.ndarray


def _mean(p):
    if isinstance(p, DiscreteSecondOrder):
        return p.mean()
    return beta_mean(p)


def point_risk(p: BetaParams | DiscreteSecondOrder):
    """Misclassification probability of the sign classifier at the posterior mean."""
    q = np.asarray(_mean(p), dtype=float)
    r = np.minimum(q, 1.0 - q)
    return float(r) if r.ndim == 0 else r


def expected_risk(p: BetaParams | DiscreteSecondOrder):
    """Average over the second-order distribution of min(q, 1 - q).

    For each plausible posterior value q the best classifier errs with
    probability min(q, 1 - q); averaging over q credits the chance that more
    labels would resolve the point to one side.
    """
    if isinstance(p, DiscreteSecondOrder):
        return discrete_expected_min(p)
    return expected_min(p)


def tuv(p: BetaParams | DiscreteSecondOrder, density) -> RiskBreakdown:
    density_arr = np.asarray(density, dtype=float)
    if np.any(density_arr < 0) or not np.all(np.isfinite(density_arr)):
        raise ValueError("density must be finite and nonnegative")
    r = point_risk(p)
    e = expected_risk(p)
    # Jensen guarantees r >= e; clamp the last-ulp rounding noise
    gap = np.maximum(np.asarray(r) - np.asarray(e), 0.0)
    value = gap * density_arr
    if value.ndim == 0:
        return RiskBreakdown(float(r), float(e), float(gap), float(density_arr), float(value))
    return RiskBreakdown(r, e, gap, density_arr, value)
