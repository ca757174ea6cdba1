"""Ground-truth comparison via occupancy-weighted Wasserstein inaccuracy.

For the LQR model family both the estimate and the truth are Gaussians with
the same variance at every (x, a), so the per-pair Wasserstein-p distance
reduces to the absolute mean gap and the expectation extension is exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .envs import LQRTheta
from .errors import InvalidInput
from .metrics import ExtensionSpec, MetricSpec, metric_extension


@dataclass(frozen=True)
class InaccuracyReport:
    """One experiment cell: estimator quality plus run bookkeeping."""

    method: str
    n: int
    rep: int
    seed: int
    t_used: int
    inaccuracy: float
    runtime_ms: float
    failed: bool = False

    def __post_init__(self):
        if not self.failed and not (np.isfinite(self.inaccuracy) and self.inaccuracy >= 0):
            raise InvalidInput("inaccuracy must be finite and nonnegative")


def lqr_inaccuracy(
    theta: LQRTheta,
    theta_star: LQRTheta,
    dpi_states: np.ndarray,
    dpi_actions: np.ndarray,
    p: float = 1.0,
) -> float:
    """Expectation-extended W_p between the model table and the truth.

    Per occupancy point the distributions are equal-variance Gaussians, so
    W_p is the location shift |mu_theta - mu_star|; the extension with
    order q = p and uniform weights is then a plain 2p-power mean.
    """
    if p < 1:
        raise InvalidInput("wasserstein order must be >= 1")
    if len(dpi_states) == 0:
        raise InvalidInput("occupancy sample must be nonempty")
    gaps = np.abs(
        theta.mean_batch(dpi_states, dpi_actions)
        - theta_star.mean_batch(dpi_states, dpi_actions)
    )
    return float(np.mean(gaps ** (2.0 * p)) ** (1.0 / (2.0 * p)))


def tabular_inaccuracy(
    u_hat: dict, u_true: dict, dpi_weights: dict, p: float = 1.0, q: float = 1.0
) -> float:
    """Occupancy-weighted expectation extension of W_p between return tables."""
    metric = MetricSpec("wasserstein", p=p)
    ext = ExtensionSpec("expectation", q=q, weights=dpi_weights)
    return metric_extension(metric, ext, u_hat, u_true)
