"""Random communication weight family and its certified structural bounds.

The family is a shifted rational-decay kernel

    psi(x, z) = psi0 + K(z) * (1 + ||x||^2)^(-beta(z)),
    K(z)    = K0 * (1 + sigmaK * z),
    beta(z) = beta0 * (1 + sigmaB * z),          z in Omega = [-1, 1].

It is radially symmetric, strictly positive, bounded by
psiM = psi0 + K0*(1+sigmaK), and nonincreasing in ||x|| for every sample z.
psi0 > 0 gives a uniform positive lower bound (unconditional flocking
regime); psi0 = 0 gives the conditional regime where the flocking
admissibility condition on initial data has real content.

Canonical evaluation order is ``psi0 + K * exp(negbeta * log(1 + r^2))``;
the compiled and fallback trajectory kernels use the same elementary-op
sequence so that scalar evaluation, jet propagation and integration agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

from .jets import binomial_table, jet2_exp, jet2_log, jet2_mul

__all__ = [
    "CommunicationKernel",
    "KernelCertificate",
    "KernelDomainError",
    "eval_psi",
    "eval_psi_vec",
    "eval_psi_primitive",
    "tail_integral",
    "certify",
    "z_coefficients",
]

SQRT2 = math.sqrt(2.0)


class KernelDomainError(ValueError):
    """Argument outside the kernel domain (r < 0 or z outside Omega)."""


@dataclass(frozen=True)
class CommunicationKernel:
    """Parameters of one member of the kernel family."""

    psi0: float = 0.5
    K0: float = 1.0
    sigmaK: float = 0.0
    beta0: float = 1.0
    sigmaB: float = 0.0

    def __post_init__(self):
        if self.psi0 < 0:
            raise ValueError("psi0 must be nonnegative")
        if self.K0 < 0:
            raise ValueError("K0 must be nonnegative")
        if not 0.0 <= self.sigmaK < 1.0:
            raise ValueError("sigmaK must lie in [0, 1)")
        if not 0.0 <= self.sigmaB < 1.0:
            raise ValueError("sigmaB must lie in [0, 1)")
        if self.beta0 <= 0:
            raise ValueError("beta0 must be positive")
        if self.psi0 == 0.0 and self.K0 * (1.0 - self.sigmaK) <= 0.0:
            raise ValueError("kernel is not strictly positive: psi0 = 0 needs K0*(1-sigmaK) > 0")

    @property
    def psiM(self) -> float:
        """Global upper bound, attained at r = 0 and z = 1."""
        return self.psi0 + self.K0 * (1.0 + self.sigmaK)

    @property
    def psi_lower(self) -> float:
        """Global lower bound; the infimum over r -> infinity equals psi0."""
        return self.psi0

    def K(self, z: float) -> float:
        return self.K0 * (1.0 + self.sigmaK * z)

    def beta(self, z: float) -> float:
        return self.beta0 * (1.0 + self.sigmaB * z)


@dataclass(frozen=True)
class KernelCertificate:
    """Numerically certified bounds for one kernel.

    ``eps_psi`` bounds sup |d^a_r d^b_z psi| over 1 <= a+b <= order; it is
    obtained by grid search with local refinement and overestimates the true
    supremum by the padding factor (at most 1%).
    """

    psiM: float
    psi_lower: float
    lip: float
    eps_psi: float
    order: int

    def __post_init__(self):
        if min(self.psiM, self.psi_lower, self.lip, self.eps_psi) < 0:
            raise ValueError("certificate bounds must be nonnegative")
        if self.psi_lower > self.psiM:
            raise ValueError("psi_lower must not exceed psiM")

    @property
    def has_uniform_lower_bound(self) -> bool:
        return self.psi_lower > 0.0


def _check_domain(r, z) -> None:
    if np.any(np.asarray(r) < 0):
        raise KernelDomainError("radius must be nonnegative")
    zarr = np.asarray(z)
    if np.any(zarr < -1.0) or np.any(zarr > 1.0):
        raise KernelDomainError("sample z must lie in [-1, 1]")


def z_coefficients(kernel: CommunicationKernel, z: float) -> tuple[float, float, float, float]:
    """Affine z-jets of the amplitude and (negated) exponent at sample z.

    Returns (K(z), K'(z), -beta(z), -beta'(z)); these four numbers are all
    the trajectory kernels need, since K and beta are affine in z.
    """
    K = kernel.K0 * (1.0 + kernel.sigmaK * z)
    Kp = kernel.K0 * kernel.sigmaK
    nb = -(kernel.beta0 * (1.0 + kernel.sigmaB * z))
    nbp = -(kernel.beta0 * kernel.sigmaB)
    return K, Kp, nb, nbp


def eval_psi(kernel: CommunicationKernel, r, z):
    """psi(r, z) for scalar or array radius r >= 0 and sample z in [-1, 1]."""
    _check_domain(r, z)
    K, _, nb, _ = z_coefficients(kernel, float(z))
    r = np.asarray(r, dtype=float)
    s = r * r
    u = 1.0 + s
    w = np.exp(nb * np.log(u))
    out = kernel.psi0 + K * w
    return float(out) if out.ndim == 0 else out


def eval_psi_vec(kernel: CommunicationKernel, x: np.ndarray, z: float) -> float:
    """psi on a vector argument; routes through ||x|| so psi(x) == psi(-x) exactly."""
    x = np.asarray(x, dtype=float)
    r = math.sqrt(float(np.dot(x, x)))
    return eval_psi(kernel, r, z)


@lru_cache(maxsize=100_000)
def _decay_integral(x: float, beta: float) -> float:
    """J(x, beta) = int_0^x (1+s^2)^(-beta) ds by adaptive quadrature.

    Memoized per (x, beta): the implicit-radius root solve evaluates the
    primitive repeatedly at repeated arguments.
    """
    if x == 0.0:
        return 0.0
    if beta == 1.0:
        return math.atan(x)
    if x <= 50.0:
        val, _ = quad(lambda s: (1.0 + s * s) ** (-beta), 0.0, x, epsabs=1e-14, epsrel=1e-12, limit=500)
        return val
    head, _ = quad(lambda s: (1.0 + s * s) ** (-beta), 0.0, 50.0, epsabs=1e-14, epsrel=1e-12, limit=500)
    tail, _ = quad(lambda s: (1.0 + s * s) ** (-beta), 50.0, x, epsabs=1e-14, epsrel=1e-12, limit=500)
    return head + tail


def eval_psi_primitive(kernel: CommunicationKernel, x: float, z: float) -> float:
    """Primitive Psi(x, z) = int_0^x psi(eta, z) d eta, monotone in x.

    Closed form (arctan) when beta(z) = 1, adaptive quadrature otherwise;
    always >= psi0 * x.
    """
    if x < 0:
        raise KernelDomainError("upper limit must be nonnegative")
    _check_domain(0.0, z)
    K, _, nb, _ = z_coefficients(kernel, float(z))
    beta = -nb
    base = kernel.psi0 * x
    if K == 0.0 or x == 0.0:
        return base
    return base + K * _decay_integral(float(x), float(beta))


def tail_integral(kernel: CommunicationKernel, z: float, a: float) -> float:
    """int_a^infinity psi(s, z) ds; infinite iff psi0 > 0 or 2 beta(z) <= 1."""
    if a < 0:
        raise KernelDomainError("lower limit must be nonnegative")
    _check_domain(0.0, z)
    if kernel.psi0 > 0.0:
        return math.inf
    K, _, nb, _ = z_coefficients(kernel, float(z))
    beta = -nb
    if K == 0.0:
        return 0.0
    if beta <= 0.5:
        return math.inf
    if beta == 1.0:
        return K * (math.pi / 2.0 - math.atan(a))
    val, _ = quad(lambda s: (1.0 + s * s) ** (-beta), a, np.inf, epsabs=1e-14, epsrel=1e-12, limit=500)
    return K * val


# ---------------------------------------------------------------------------
# Derivative certification by grid search with local refinement.
# ---------------------------------------------------------------------------

_PAD = 1.002  # padding on the refined grid maximum; keeps the bound within 1%


def _mixed_partial_block(kernel: CommunicationKernel, r: np.ndarray, z: np.ndarray, m: int) -> np.ndarray:
    """|d^a_r d^b_z psi| on the grid; shape (npoints, m+1, m+1)."""
    B = binomial_table(m)
    n = r.shape[0]
    rj = np.zeros((n, m + 1, m + 1))
    rj[:, 0, 0] = r
    if m >= 1:
        rj[:, 1, 0] = 1.0
    u = jet2_mul(rj, rj, B, m)
    u[:, 0, 0] += 1.0
    L = jet2_log(u, B, m)
    nb = np.zeros((n, m + 1, m + 1))
    nb[:, 0, 0] = -(kernel.beta0 * (1.0 + kernel.sigmaB * z))
    if m >= 1:
        nb[:, 0, 1] = -(kernel.beta0 * kernel.sigmaB)
    e = jet2_mul(nb, L, B, m)
    w = jet2_exp(e, B, m)
    Kj = np.zeros((n, m + 1, m + 1))
    Kj[:, 0, 0] = kernel.K0 * (1.0 + kernel.sigmaK * z)
    if m >= 1:
        Kj[:, 0, 1] = kernel.K0 * kernel.sigmaK
    psi = jet2_mul(Kj, w, B, m)
    psi[:, 0, 0] += kernel.psi0
    return np.abs(psi)


def _grid(kernel: CommunicationKernel, nr: int, nz: int) -> tuple[np.ndarray, np.ndarray]:
    beta_min = kernel.beta0 * (1.0 - kernel.sigmaB)
    # the |d_z psi| surface peaks near (1+r^2) = exp(1/beta); reach past it
    arg = min(1.0 / max(beta_min, 1e-3), 40.0)
    r_peak = math.sqrt(max(math.exp(arg) - 1.0, 4.0))
    r_max = max(10.0, 3.0 * r_peak)
    r = np.concatenate([np.linspace(0.0, 2.0, nr), np.geomspace(2.0, r_max, nr)[1:]])
    z = np.linspace(-1.0, 1.0, nz)
    return r, z


def _sup_over_grid(kernel, r_line, z_line, m, select):
    R, Z = np.meshgrid(r_line, z_line, indexing="ij")
    block = _mixed_partial_block(kernel, R.ravel(), Z.ravel(), m)
    vals = select(block)
    idx = int(np.argmax(vals))
    return float(vals[idx]), float(R.ravel()[idx]), float(Z.ravel()[idx])


def _refine(kernel, m, select, r_line, z_line, rounds=2):
    best, r_star, z_star = _sup_over_grid(kernel, r_line, z_line, m, select)
    dr = np.max(np.diff(r_line))
    dz = np.max(np.diff(z_line)) if len(z_line) > 1 else 0.0
    for _ in range(rounds):
        r_lo, r_hi = max(r_star - dr, 0.0), r_star + dr
        z_lo, z_hi = max(z_star - dz, -1.0), min(z_star + dz, 1.0)
        r_loc = np.linspace(r_lo, r_hi, 21)
        z_loc = np.linspace(z_lo, z_hi, 21) if dz > 0 else np.array([z_star])
        cand, r_star, z_star = _sup_over_grid(kernel, r_loc, z_loc, m, select)
        best = max(best, cand)
        dr = (r_hi - r_lo) / 20.0
        dz = (z_hi - z_lo) / 20.0 if dz > 0 else 0.0
    return best


def certify(kernel: CommunicationKernel, order: int) -> KernelCertificate:
    """Certified bounds on psi and its mixed partials up to total ``order``.

    The supremum of |d^a_r d^b_z psi| over 1 <= a+b <= order is located by a
    dense two-scale grid over [0, R_max] x [-1, 1] (bivariate jet
    arithmetic supplies all partials at once), refined twice around the
    maximizer, then padded; global upper/lower bounds of psi itself follow
    from the family structure (maximum at r = 0, infimum as r -> infinity).
    """
    if order < 1:
        raise ValueError("certificate order must be >= 1")
    m = order
    if kernel.K0 == 0.0:
        return KernelCertificate(psiM=kernel.psiM, psi_lower=kernel.psi0, lip=0.0, eps_psi=0.0, order=m)
    r_line, z_line = _grid(kernel, 81, 41)

    def all_partials(block):
        acc = np.zeros(block.shape[0])
        for a in range(m + 1):
            for b in range(m + 1 - a):
                if a + b == 0:
                    continue
                acc = np.maximum(acc, block[:, a, b])
        return acc

    eps_raw = _refine(kernel, m, all_partials, r_line, z_line)
    lip_raw = _refine(kernel, m, lambda blk: blk[:, 1, 0], r_line, z_line)
    return KernelCertificate(
        psiM=kernel.psiM,
        psi_lower=kernel.psi0,
        lip=lip_raw * _PAD,
        eps_psi=eps_raw * _PAD,
        order=m,
    )
