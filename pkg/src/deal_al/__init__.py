"""Distributional estimate active learning (DEAL).

Kernel density classification with a Beta distribution over the estimated
class posterior, a risk-gap query criterion, baseline query strategies and a
cross-validated benchmark harness.
"""

from .distributions import BetaParams, DiscreteSecondOrder, GammaParams, expected_min, reg_inc_beta
from .kde import KernelConfig, evidence, pool_bandwidth, predict, second_order
from .risk import expected_risk, point_risk, tuv
from .strategies import STRATEGY_KINDS, PoolState, Strategy, select

__all__ = [
    "BetaParams", "DiscreteSecondOrder", "GammaParams", "expected_min", "reg_inc_beta",
    "KernelConfig", "evidence", "pool_bandwidth", "predict", "second_order",
    "expected_risk", "point_risk", "tuv",
    "STRATEGY_KINDS", "PoolState", "Strategy", "select",
]

__version__ = "0.1.0"
