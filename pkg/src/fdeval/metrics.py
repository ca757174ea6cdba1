"""Probability metrics, their table extensions, and contraction constants.

A metric eta on single distributions is lifted to tables U: (s, a) -> dist
either as a supremum over the index set or as a weighted 2q-power mean.
The scale/location/convexity (S-L-C) constants per metric determine the
contraction factor of the distributional Bellman operator under the lift.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .distributions import (
    Atomic,
    Distribution,
    Gaussian1D,
    GaussianMixture1D,
    atomic1d,
    dist_dim,
    mixture,
    push_forward,
    quantile_fn,
)
from .divergences import KernelSpec, mmd_squared_atomic
from .errors import InvalidInput, Unsupported

_GL_ORDER = 4096
_gl_nodes, _gl_weights = np.polynomial.legendre.leggauss(_GL_ORDER)
# map from (-1, 1) to (0, 1)
_GL_U = 0.5 * (_gl_nodes + 1.0)
_GL_W = 0.5 * _gl_weights


@dataclass(frozen=True)
class MetricSpec:
    """Base-metric selector with its scale-sensitivity and convexity constants.

    kind: "wasserstein" (p >= 1), "mmd" (with kernel), or "cramer".
    The (c, q) pair defaults to the survey constants: Wasserstein-p has
    c = 1, q = p; energy MMD has c = beta/2, q = 1; Cramer has c = 1/2, q = 2.
    """

    kind: str
    p: float = 1.0
    kernel: Optional[KernelSpec] = None
    c: float = field(default=None)  # type: ignore[assignment]
    q: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.kind not in ("wasserstein", "mmd", "cramer"):
            raise InvalidInput(f"unknown metric kind {self.kind!r}")
        if self.kind == "wasserstein" and self.p < 1:
            raise InvalidInput("wasserstein order must be >= 1")
        if self.kind == "mmd" and self.kernel is None:
            raise InvalidInput("mmd metric needs a kernel")
        c, q = self.c, self.q
        if c is None:
            if self.kind == "wasserstein":
                c = 1.0
            elif self.kind == "mmd":
                c = self.kernel.beta / 2.0 if self.kernel.kind == "energy" else None
            else:
                c = 0.5
        if q is None:
            if self.kind == "wasserstein":
                q = self.p
            elif self.kind == "mmd":
                q = 1.0
            else:
                q = 2.0
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "q", q)

    def evaluate(self, p_dist: Distribution, q_dist: Distribution) -> float:
        if self.kind == "wasserstein":
            return wasserstein_1d(self.p, p_dist, q_dist)
        if self.kind == "mmd":
            return float(np.sqrt(max(mmd_squared_atomic(self.kernel, p_dist, q_dist), 0.0)))
        val = mmd_squared_atomic(KernelSpec("energy", beta=1.0), p_dist, q_dist)
        return float(np.sqrt(max(0.5 * val, 0.0)))


@dataclass(frozen=True)
class ExtensionSpec:
    """Table extension: "supremum", or "expectation" with order q and weights."""

    mode: str
    q: float = 1.0
    weights: Optional[dict] = None

    def __post_init__(self):
        if self.mode not in ("supremum", "expectation"):
            raise InvalidInput(f"unknown extension mode {self.mode!r}")
        if self.mode == "expectation":
            if self.q < 1:
                raise InvalidInput("extension order must be >= 1")
            if self.weights is not None:
                total = sum(self.weights.values())
                if abs(total - 1.0) > 1e-9:
                    raise InvalidInput(f"extension weights sum to {total}, not 1")


def _atomic_quantile_segments(p: Atomic, q: Atomic):
    """Merged CDF breakpoints of two 1-D atomic measures.

    Returns (widths, qp, qq): probability-segment widths and the constant
    quantile values of each measure on those segments.
    """
    zp, mp = _sorted_atoms(p)
    zq, mq = _sorted_atoms(q)
    cp = np.cumsum(mp)
    cq = np.cumsum(mq)
    cuts = np.unique(np.concatenate([cp, cq, [0.0]]))
    cuts = cuts[(cuts >= 0.0) & (cuts <= 1.0)]
    if cuts[-1] < 1.0:
        cuts = np.append(cuts, 1.0)
    widths = np.diff(cuts)
    mids = 0.5 * (cuts[:-1] + cuts[1:])
    qp = zp[np.minimum(np.searchsorted(cp, mids), zp.size - 1)]
    qq = zq[np.minimum(np.searchsorted(cq, mids), zq.size - 1)]
    keep = widths > 0
    return widths[keep], qp[keep], qq[keep]


def _sorted_atoms(a: Atomic):
    locs = a.locations_1d()
    order = np.argsort(locs, kind="stable")
    return locs[order], a.masses[order]


def wasserstein_1d(p: float, dist1: Distribution, dist2: Distribution) -> float:
    """Wasserstein-p distance between two 1-D distributions.

    Atomic pairs use the exact quantile coupling over merged CDF breakpoints;
    any pair involving a Gaussian or mixture falls back to Gauss-Legendre
    quadrature of the quantile difference on (0, 1).
    """
    if p < 1:
        raise InvalidInput("wasserstein order must be >= 1")
    if dist_dim(dist1) != 1 or dist_dim(dist2) != 1:
        raise Unsupported("wasserstein_1d requires 1-D distributions")
    if isinstance(dist1, Atomic) and isinstance(dist2, Atomic):
        widths, qp, qq = _atomic_quantile_segments(dist1, dist2)
        return float(np.sum(widths * np.abs(qp - qq) ** p) ** (1.0 / p))
    q1 = _quantile_grid(dist1)
    q2 = _quantile_grid(dist2)
    return float(np.sum(_GL_W * np.abs(q1 - q2) ** p) ** (1.0 / p))


def _quantile_grid(dist: Distribution) -> np.ndarray:
    if isinstance(dist, Gaussian1D):
        from scipy import special

        return dist.mean + dist.std * special.ndtri(_GL_U)
    if isinstance(dist, Atomic):
        zs, ms = _sorted_atoms(dist)
        cum = np.cumsum(ms)
        idx = np.minimum(np.searchsorted(cum, _GL_U), zs.size - 1)
        return zs[idx]
    return np.array([quantile_fn(dist, float(u)) for u in _GL_U])


def metric_extension(metric: MetricSpec, ext: ExtensionSpec, table1: dict, table2: dict) -> float:
    """Extended distance between two distribution tables with a shared index set."""
    if set(table1) != set(table2):
        raise InvalidInput("tables must share the same index set")
    keys = sorted(table1)
    vals = np.array([metric.evaluate(table1[k], table2[k]) for k in keys])
    if ext.mode == "supremum":
        return float(vals.max())
    if ext.weights is None:
        w = np.full(len(keys), 1.0 / len(keys))
    else:
        if set(ext.weights) != set(keys):
            raise InvalidInput("extension weights must cover the table index set")
        w = np.array([ext.weights[k] for k in keys])
    power = 2.0 * ext.q
    return float(np.sum(w * vals**power) ** (1.0 / power))


def contraction_factor(metric: MetricSpec, ext: ExtensionSpec, gamma: float) -> float:
    """Bellman contraction factor: gamma^c (supremum) or gamma^(c - 1/2q)."""
    if not 0 < gamma < 1:
        raise InvalidInput("gamma must lie in (0, 1)")
    if metric.c is None:
        raise InvalidInput("metric has no scale-sensitivity constant")
    if ext.mode == "supremum":
        return gamma**metric.c
    exponent = metric.c - 1.0 / (2.0 * ext.q)
    if exponent <= 0:
        raise InvalidInput(
            f"no contraction guarantee: c={metric.c} <= 1/(2q)={1.0 / (2.0 * ext.q)}"
        )
    return gamma**exponent


def slc_property_check(
    metric: MetricSpec,
    trials: int,
    rng: np.random.Generator,
    c_override: Optional[float] = None,
    q_override: Optional[float] = None,
    tol: float = 1e-9,
) -> dict:
    """Randomized check of scale-sensitivity, location-insensitivity, q-convexity.

    Runs on random atomic pairs; returns {"violations": [...], "trials": n}.
    A pass means no counterexample was found, not a proof.
    """
    if trials < 1:
        raise InvalidInput("trials must be >= 1")
    c = metric.c if c_override is None else c_override
    q = metric.q if q_override is None else q_override
    violations = []
    for trial in range(trials):
        x = _random_atomic(rng)
        y = _random_atomic(rng)
        base = metric.evaluate(x, y)
        gamma = rng.uniform(0.05, 0.95)
        scaled = metric.evaluate(_scale(x, gamma), _scale(y, gamma))
        if scaled > gamma**c * base + tol:
            violations.append(
                {"trial": trial, "property": "scale", "lhs": scaled, "rhs": gamma**c * base}
            )
        z = rng.normal(0.0, 3.0)
        shifted = metric.evaluate(_shift(x, z), _shift(y, z))
        if shifted > base + tol:
            violations.append(
                {"trial": trial, "property": "location", "lhs": shifted, "rhs": base}
            )
        # q-convexity of the 2q-th power over a random two-part mixture
        x2 = _random_atomic(rng)
        y2 = _random_atomic(rng)
        lam = rng.uniform(0.05, 0.95)
        mixed1 = mixture([(lam, x), (1.0 - lam, x2)])
        mixed2 = mixture([(lam, y), (1.0 - lam, y2)])
        lhs = metric.evaluate(mixed1, mixed2) ** (2.0 * q)
        rhs = lam * base ** (2.0 * q) + (1.0 - lam) * metric.evaluate(x2, y2) ** (2.0 * q)
        if lhs > rhs + tol:
            violations.append(
                {"trial": trial, "property": "convexity", "lhs": lhs, "rhs": rhs}
            )
    return {"violations": violations, "trials": trials}


def _random_atomic(rng: np.random.Generator, max_atoms: int = 5) -> Atomic:
    n = int(rng.integers(1, max_atoms + 1))
    locs = rng.normal(0.0, 2.0, size=n)
    masses = rng.dirichlet(np.ones(n))
    return atomic1d(locs, masses)


def _scale(a: Atomic, gamma: float) -> Atomic:
    return push_forward(a, np.zeros(a.dim), gamma)


def _shift(a: Atomic, z: float) -> Atomic:
    return Atomic(a.locations + z, a.masses)
