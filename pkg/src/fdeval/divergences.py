"""Bregman-type divergences between return distributions.

Closed forms for Gaussian and Gaussian-mixture pairs, plus Monte-Carlo
kernel estimators for empirical samples.  The argument convention follows
the objective: ``divergence(spec, model, target)`` where the KL kind
evaluates KL(target || model).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import special

from .distributions import Atomic, EmpiricalSample, Gaussian1D, GaussianMixture1D
from .errors import DegenerateInput, InvalidInput, Unsupported

_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class KernelSpec:
    """Shift-invariant kernel selector.

    kind: "energy" (beta in (0,2)), "rbf" (sigma > 0), "laplace" (sigma > 0),
    or "coulomb" (point dimension >= 2 required at call time).
    """

    kind: str
    beta: float = 1.0
    sigma: float = 1.0

    def __post_init__(self):
        if self.kind not in ("energy", "rbf", "laplace", "coulomb"):
            raise InvalidInput(f"unknown kernel kind {self.kind!r}")
        if self.kind == "energy" and not 0 < self.beta < 2:
            raise InvalidInput(f"energy exponent must lie in (0, 2), got {self.beta}")
        if self.kind in ("rbf", "laplace") and not self.sigma > 0:
            raise InvalidInput(f"kernel bandwidth must be positive, got {self.sigma}")


@dataclass(frozen=True)
class DivergenceSpec:
    """Divergence selector with its numerical-stability knobs.

    kind: "cramer", "mmd", "pdf_l2", "kl", or "tvd_mc".  ``variance_floor``
    is added to every mixture component variance before evaluation;
    ``mc_samples`` is the per-component draw count for the MC kinds.
    """

    kind: str
    kernel: Optional[KernelSpec] = None
    variance_floor: float = 0.0
    mc_samples: int = 1000

    def __post_init__(self):
        if self.kind not in ("cramer", "mmd", "pdf_l2", "kl", "tvd_mc"):
            raise InvalidInput(f"unknown divergence kind {self.kind!r}")
        if self.kind == "mmd" and self.kernel is None:
            raise InvalidInput("mmd divergence needs a kernel")
        if self.variance_floor < 0:
            raise InvalidInput("variance floor must be nonnegative")
        if self.kind in ("kl", "tvd_mc") and self.mc_samples < 1:
            raise InvalidInput("MC-based divergences need mc_samples >= 1")


def gaussian_k0(kernel: KernelSpec, mu: float, var: float):
    """E k0(Z) for Z ~ N(mu, var), for the closed-form kernels.

    Vectorized over mu/var; energy uses k0(y) = -|y|, rbf uses
    exp(-y^2 / 4 sigma^2), laplace uses exp(-|y| / sigma).
    """
    mu = np.asarray(mu, dtype=float)
    var = np.asarray(var, dtype=float)
    if np.any(var <= 0):
        raise InvalidInput("variance must be positive")
    sd = np.sqrt(var)
    if kernel.kind == "energy":
        if kernel.beta != 1.0:
            raise Unsupported("closed-form energy K0 requires beta = 1")
        # -E|Z| (mean of a folded normal)
        absmu = np.abs(mu)
        return -(
            sd * _SQRT_2_OVER_PI * np.exp(-(mu**2) / (2.0 * var))
            + absmu * (1.0 - 2.0 * special.ndtr(-absmu / sd))
        )
    if kernel.kind == "rbf":
        s2 = kernel.sigma**2
        return np.exp(-(mu**2) / (4.0 * s2 + 2.0 * var)) / np.sqrt(1.0 + var / (2.0 * s2))
    if kernel.kind == "laplace":
        s = kernel.sigma
        # log-domain assembly; the exp prefactor overflows for var >> s^2
        a = var / (2.0 * s**2)
        return np.exp(a - mu / s + special.log_ndtr(mu / sd - sd / s)) + np.exp(
            a + mu / s + special.log_ndtr(-mu / sd - sd / s)
        )
    raise Unsupported(f"no closed-form K0 for kernel kind {kernel.kind!r}")


def gaussian_k0_dmu(kernel: KernelSpec, mu, var):
    """d/dmu of gaussian_k0, used by analytic objective gradients."""
    mu = np.asarray(mu, dtype=float)
    var = np.asarray(var, dtype=float)
    sd = np.sqrt(var)
    if kernel.kind == "energy":
        # d(-E|Z|)/dmu = -E sign(Z) = 2*Phi(-mu/sd) - 1
        return 2.0 * special.ndtr(-mu / sd) - 1.0
    if kernel.kind == "rbf":
        s2 = kernel.sigma**2
        return gaussian_k0(kernel, mu, var) * (-2.0 * mu / (4.0 * s2 + 2.0 * var))
    if kernel.kind == "laplace":
        s = kernel.sigma
        a = var / (2.0 * s**2)
        # the two Gaussian-density terms of the product rule cancel exactly
        t1 = np.exp(a - mu / s + special.log_ndtr(mu / sd - sd / s))
        t2 = np.exp(a + mu / s + special.log_ndtr(-mu / sd - sd / s))
        return (t2 - t1) / s
    raise Unsupported(f"no closed-form K0 gradient for kernel {kernel.kind!r}")


def mmd2_gaussian(kernel: KernelSpec, mu1, var1, mu2, var2):
    """Squared MMD between N(mu1, var1) and N(mu2, var2), vectorized."""
    return (
        gaussian_k0(kernel, 0.0, 2.0 * np.asarray(var1, dtype=float))
        + gaussian_k0(kernel, 0.0, 2.0 * np.asarray(var2, dtype=float))
        - 2.0 * gaussian_k0(kernel, np.asarray(mu1) - np.asarray(mu2), np.asarray(var1) + np.asarray(var2))
    )


def pdf_l2_gaussian(mu1, var1, mu2, var2):
    """Squared L2 distance between two Gaussian densities, vectorized."""
    mu1, var1 = np.asarray(mu1, dtype=float), np.asarray(var1, dtype=float)
    mu2, var2 = np.asarray(mu2, dtype=float), np.asarray(var2, dtype=float)
    s = var1 + var2
    return (
        1.0 / np.sqrt(4.0 * math.pi * var1)
        + 1.0 / np.sqrt(4.0 * math.pi * var2)
        - 2.0 / np.sqrt(2.0 * math.pi * s) * np.exp(-((mu1 - mu2) ** 2) / (2.0 * s))
    )


def kl_gaussian(mu1, var1, mu2, var2):
    """KL(N(mu1, var1) || N(mu2, var2)), vectorized."""
    mu1, var1 = np.asarray(mu1, dtype=float), np.asarray(var1, dtype=float)
    mu2, var2 = np.asarray(mu2, dtype=float), np.asarray(var2, dtype=float)
    return 0.5 * np.log(var2 / var1) + (var1 + (mu1 - mu2) ** 2) / (2.0 * var2) - 0.5


_ENERGY1 = KernelSpec("energy", beta=1.0)


def divergence_gaussian(spec: DivergenceSpec, p: Gaussian1D, q: Gaussian1D) -> float:
    """d(model P, target Q) for single Gaussians, by closed form."""
    vf = spec.variance_floor
    v1, v2 = p.variance + vf, q.variance + vf
    if spec.kind == "mmd":
        val = mmd2_gaussian(spec.kernel, p.mean, v1, q.mean, v2)
    elif spec.kind == "cramer":
        # 1-D identity: squared Cramer = half of the squared Energy MMD
        val = 0.5 * mmd2_gaussian(_ENERGY1, p.mean, v1, q.mean, v2)
    elif spec.kind == "pdf_l2":
        val = pdf_l2_gaussian(p.mean, v1, q.mean, v2)
    elif spec.kind == "kl":
        val = kl_gaussian(q.mean, v2, p.mean, v1)
    else:
        raise Unsupported(f"no Gaussian closed form for kind {spec.kind!r}")
    return max(float(val), 0.0)


def divergence_gmm(
    spec: DivergenceSpec,
    p: GaussianMixture1D,
    q: GaussianMixture1D,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """d(model P, target Q) for Gaussian mixtures.

    mmd/pdf_l2/cramer are exact pairwise-component sums; kl and tvd_mc are
    Monte-Carlo estimates with ``spec.mc_samples`` draws per target component.
    """
    vf = spec.variance_floor
    w1, m1, v1 = p.weights, p.means, p.variances + vf
    w2, m2, v2 = q.weights, q.means, q.variances + vf

    if spec.kind in ("mmd", "cramer"):
        kernel = spec.kernel if spec.kind == "mmd" else _ENERGY1
        val = _pairwise_quadratic(lambda dm, sv: gaussian_k0(kernel, dm, sv), w1, m1, v1, w2, m2, v2)
        if spec.kind == "cramer":
            val *= 0.5
        return max(float(val), 0.0)
    if spec.kind == "pdf_l2":
        val = _pairwise_quadratic(_gauss_conv_density, w1, m1, v1, w2, m2, v2)
        return max(float(val), 0.0)

    if rng is None:
        raise InvalidInput(f"{spec.kind} requires an RNG")
    if spec.mc_samples < 1:
        raise InvalidInput("mc_samples must be >= 1")
    b = spec.mc_samples
    # B draws per component of Q, weighted by the component weights
    total = 0.0
    for wj, mj, vj in zip(w2, m2, v2):
        z = rng.normal(mj, math.sqrt(vj), size=b)
        log_q = _gmm_logpdf(z, w2, m2, v2)
        log_p = _gmm_logpdf(z, w1, m1, v1)
        if spec.kind == "kl":
            total += wj * float(np.mean(log_q - log_p))
        else:  # tvd_mc
            total += wj * float(np.mean(np.abs(1.0 - np.exp(log_p - log_q))))
    return max(total, 0.0)


def _pairwise_quadratic(term, w1, m1, v1, w2, m2, v2) -> float:
    """sum_ij a_i a_j term(mi - mj, vi + vj) assembled as PP + QQ - 2 PQ."""

    def block(wa, ma, va, wb, mb, vb):
        dm = ma[:, None] - mb[None, :]
        sv = va[:, None] + vb[None, :]
        return float(wa @ term(dm, sv) @ wb)

    return block(w1, m1, v1, w1, m1, v1) + block(w2, m2, v2, w2, m2, v2) - 2.0 * block(
        w1, m1, v1, w2, m2, v2
    )


def _gauss_conv_density(dm, sv):
    # integral of phi(.; mi, vi) phi(.; mj, vj) = N(mi - mj; 0, vi + vj)
    return np.exp(-(dm**2) / (2.0 * sv)) / np.sqrt(2.0 * math.pi * sv)


def _gmm_logpdf(z, w, m, v):
    z = np.asarray(z, dtype=float)[:, None]
    log_comp = (
        -0.5 * (z - m[None, :]) ** 2 / v[None, :]
        - 0.5 * np.log(2.0 * math.pi * v[None, :])
        + np.log(w[None, :])
    )
    return special.logsumexp(log_comp, axis=1)


def kernel_gram(kernel: KernelSpec, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Kernel matrix k(x_i, y_j) for point sets of shape (n, d), (m, d)."""
    diff = x[:, None, :] - y[None, :, :]
    dist = np.sqrt(np.sum(diff**2, axis=-1))
    if kernel.kind == "energy":
        nx = np.linalg.norm(x, axis=1)
        ny = np.linalg.norm(y, axis=1)
        return nx[:, None] ** kernel.beta + ny[None, :] ** kernel.beta - dist**kernel.beta
    if kernel.kind == "rbf":
        return np.exp(-(dist**2) / (4.0 * kernel.sigma**2))
    if kernel.kind == "laplace":
        return np.exp(-dist / kernel.sigma)
    # coulomb
    d = x.shape[1]
    if d < 2:
        raise InvalidInput("coulomb kernel requires dimension >= 2")
    with np.errstate(divide="ignore"):
        vals = -np.log(dist) if d == 2 else dist ** (2.0 - d)
    return vals


def mmd_squared_mc(kernel: KernelSpec, x: EmpiricalSample, y: EmpiricalSample) -> float:
    """U-statistic estimator of squared MMD between two samples."""
    if len(x) < 2 or len(y) < 2:
        raise InvalidInput("MMD U-statistic needs at least two points per sample")
    if x.dim != y.dim:
        raise InvalidInput("sample dimensions do not match")
    xp, yp = x.points, y.points
    if kernel.kind == "coulomb":
        union = np.vstack([xp, yp])
        diff = union[:, None, :] - union[None, :, :]
        dist = np.sqrt(np.sum(diff**2, axis=-1))
        np.fill_diagonal(dist, 1.0)
        if np.any(dist == 0):
            raise DegenerateInput("coulomb kernel is singular at coincident points")
    kxx = kernel_gram(kernel, xp, xp)
    kyy = kernel_gram(kernel, yp, yp)
    kxy = kernel_gram(kernel, xp, yp)
    n, m = len(x), len(y)
    np.fill_diagonal(kxx, 0.0)
    np.fill_diagonal(kyy, 0.0)
    return (
        kxx.sum() / (n * (n - 1))
        + kyy.sum() / (m * (m - 1))
        - 2.0 * kxy.mean()
    )


def mmd_squared_atomic(kernel: KernelSpec, p: Atomic, q: Atomic) -> float:
    """Exact population squared MMD between two finite atomic measures."""
    if p.dim != q.dim:
        raise InvalidInput("atomic dimensions do not match")
    kpp = p.masses @ kernel_gram(kernel, p.locations, p.locations) @ p.masses
    kqq = q.masses @ kernel_gram(kernel, q.locations, q.locations) @ q.masses
    kpq = p.masses @ kernel_gram(kernel, p.locations, q.locations) @ q.masses
    return float(kpp + kqq - 2.0 * kpq)


def cramer_sq_atomic(p: Atomic, q: Atomic) -> float:
    """Exact integral of |F_P - F_Q|^2 over the merged breakpoint grid."""
    zp, zq = p.locations_1d(), q.locations_1d()
    grid = np.unique(np.concatenate([zp, zq]))
    if grid.size == 1:
        return 0.0
    fp = _atomic_cdf(zp, p.masses, grid[:-1])
    fq = _atomic_cdf(zq, q.masses, grid[:-1])
    widths = np.diff(grid)
    return float(np.sum((fp - fq) ** 2 * widths))


def _atomic_cdf(locs, masses, z):
    order = np.argsort(locs, kind="stable")
    slocs, smass = locs[order], masses[order]
    cum = np.cumsum(smass)
    idx = np.searchsorted(slocs, z, side="right")
    out = np.zeros_like(np.asarray(z, dtype=float))
    nz = idx > 0
    out[nz] = cum[idx[nz] - 1]
    return out
