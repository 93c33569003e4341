"""Probability structure over the sample interval [-1, 1].

Deterministic Gauss quadrature against the sample density is the primary
expectation path; Monte Carlo is the statistical oracle.  Weighted-norm
reductions run in ascending node order so results are reproducible.

Densities: "uniform" (1/2 on the interval) and "tgauss" (centered Gaussian
of width sigma truncated to the interval, renormalized).  The truncated
Gaussian rule is built by the discretized orthogonal-polynomial recurrence
(fine reference grid, then the symmetric tridiagonal eigenproblem).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.linalg import eigh_tridiagonal
from scipy.special import roots_legendre

__all__ = [
    "QuadratureRule",
    "RandomFieldSamples",
    "build_quadrature",
    "pdf_density",
    "sample_pdf",
    "expectation",
    "l2pi_norm",
    "hk_norm",
    "monte_carlo",
    "MonteCarloResult",
]


def pdf_density(pdf_tag: str, sigma: float = 0.5):
    """Density of the named pdf on [-1, 1], as a vectorized callable."""
    if pdf_tag == "uniform":
        return lambda z: np.full_like(np.asarray(z, dtype=float), 0.5)
    if pdf_tag == "tgauss":
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        mass, _ = quad(lambda s: math.exp(-0.5 * (s / sigma) ** 2), -1.0, 1.0, epsabs=1e-15, epsrel=1e-13)
        return lambda z: np.exp(-0.5 * (np.asarray(z, dtype=float) / sigma) ** 2) / mass
    raise ValueError(f"unknown pdf tag {pdf_tag!r}")


def sample_pdf(pdf_tag: str, rng: np.random.Generator, n: int, sigma: float = 0.5) -> np.ndarray:
    """Draw n samples of z from the named pdf."""
    if pdf_tag == "uniform":
        return rng.uniform(-1.0, 1.0, size=n)
    if pdf_tag == "tgauss":
        out = np.empty(n)
        filled = 0
        while filled < n:
            draw = rng.normal(0.0, sigma, size=max(n - filled, 16))
            keep = draw[np.abs(draw) <= 1.0]
            take = min(keep.size, n - filled)
            out[filled : filled + take] = keep[:take]
            filled += take
        return out
    raise ValueError(f"unknown pdf tag {pdf_tag!r}")


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Nodes and probability weights realizing the expectation over z."""

    nodes: np.ndarray
    weights: np.ndarray
    pdf_tag: str

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        if nodes.shape != weights.shape or nodes.ndim != 1:
            raise ValueError("nodes and weights must be matching 1-d arrays")
        if np.any(weights <= 0):
            raise ValueError("weights must be positive")
        if abs(float(weights.sum()) - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1 (probability rule)")
        if np.any(nodes < -1.0) or np.any(nodes > 1.0):
            raise ValueError("nodes must lie in [-1, 1]")

    @property
    def n(self) -> int:
        return self.nodes.shape[0]


def build_quadrature(pdf_tag: str, n: int, sigma: float = 0.5) -> QuadratureRule:
    """Gauss rule with n nodes against the named density (exact to degree 2n-1)."""
    if n < 1:
        raise ValueError("need at least one node")
    if pdf_tag == "uniform":
        x, w = roots_legendre(n)
        return QuadratureRule(nodes=x, weights=w / 2.0, pdf_tag=pdf_tag)
    if pdf_tag == "tgauss":
        density = pdf_density(pdf_tag, sigma)
        nodes, weights = _stieltjes_rule(density, n)
        return QuadratureRule(nodes=nodes, weights=weights, pdf_tag=pdf_tag)
    raise ValueError(f"unknown pdf tag {pdf_tag!r}")


def _stieltjes_rule(density, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss rule for a smooth density via the discretized three-term recurrence."""
    n_fine = max(240, 24 * n)
    x, w = roots_legendre(n_fine)
    wf = w * density(x)
    mu0 = float(wf.sum())
    a = np.zeros(n)
    b = np.zeros(n)  # b[0] unused
    p_prev = np.zeros_like(x)
    p = np.ones_like(x)
    nrm2_prev = 0.0
    nrm2 = mu0
    for k in range(n):
        a[k] = float(np.sum(wf * x * p * p)) / nrm2
        if k > 0:
            b[k] = nrm2 / nrm2_prev
        p_next = (x - a[k]) * p - (b[k] * p_prev if k > 0 else 0.0)
        p_prev, p = p, p_next
        nrm2_prev, nrm2 = nrm2, float(np.sum(wf * p * p))
    vals, vecs = eigh_tridiagonal(a, np.sqrt(b[1:]))
    weights = mu0 * vecs[0, :] ** 2
    weights = weights / weights.sum()  # remove residual discretization mass error
    order = np.argsort(vals)
    return vals[order], weights[order]


@dataclass(eq=False)
class RandomFieldSamples:
    """Per-node time series of one scalar quantity, plus optional z-jets.

    values[q, t] is the quantity at node q and time t; jets[q, t, k], when
    present, carries its raw z-derivatives for Sobolev-type norms.
    """

    nodes: np.ndarray
    times: np.ndarray
    values: np.ndarray
    jets: np.ndarray | None = None

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.nodes.shape[0], self.times.shape[0]):
            raise ValueError("values must have shape (n_nodes, n_times)")
        if self.jets is not None:
            self.jets = np.asarray(self.jets, dtype=float)
            if self.jets.shape[:2] != self.values.shape:
                raise ValueError("jets must have shape (n_nodes, n_times, m+1)")

    @property
    def order(self) -> int:
        return 0 if self.jets is None else self.jets.shape[2] - 1


def _check_alignment(samples: RandomFieldSamples, rule: QuadratureRule) -> None:
    if samples.nodes.shape != rule.nodes.shape or not np.array_equal(samples.nodes, rule.nodes):
        raise ValueError("samples are not aligned with the quadrature nodes")


def expectation(samples: RandomFieldSamples, rule: QuadratureRule) -> np.ndarray:
    """E[field](t): weighted node sum per timestamp, ascending node order."""
    _check_alignment(samples, rule)
    acc = np.zeros_like(samples.times)
    for q in range(rule.n):
        acc = acc + rule.weights[q] * samples.values[q]
    return acc


def l2pi_norm(samples: RandomFieldSamples, rule: QuadratureRule) -> np.ndarray:
    """Weighted root-mean-square over z per timestamp."""
    _check_alignment(samples, rule)
    acc = np.zeros_like(samples.times)
    for q in range(rule.n):
        acc = acc + rule.weights[q] * samples.values[q] ** 2
    return np.sqrt(acc)


def hk_norm(samples: RandomFieldSamples, rule: QuadratureRule, k: int) -> np.ndarray:
    """Sobolev-in-z norm: sqrt(sum_{l<=k} ||d^l_z field||^2_{L2,pi}) per timestamp."""
    if k == 0:
        return l2pi_norm(samples, rule)
    if samples.jets is None or samples.order < k:
        raise ValueError(f"samples carry jets to order {samples.order}, need {k}")
    _check_alignment(samples, rule)
    acc = np.zeros_like(samples.times)
    for ell in range(k + 1):
        sq = np.zeros_like(samples.times)
        for q in range(rule.n):
            sq = sq + rule.weights[q] * samples.jets[q, :, ell] ** 2
        acc = acc + sq
    return np.sqrt(acc)


@dataclass(eq=False)
class MonteCarloResult:
    mean: np.ndarray
    variance: np.ndarray
    std_error: np.ndarray
    n_samples: int


def monte_carlo(field, n_samples: int, seed, pdf_tag: str = "uniform", sigma: float = 0.5) -> MonteCarloResult:
    """Seeded Monte Carlo estimate of E[field(z)] with unbiased variance.

    ``field`` maps a sample z to a scalar or array; ``seed`` may be an int
    or a numpy SeedSequence.
    """
    if n_samples < 2:
        raise ValueError("need at least two samples")
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rng = np.random.Generator(np.random.Philox(seq))
    zs = sample_pdf(pdf_tag, rng, n_samples, sigma)
    vals = np.stack([np.asarray(field(float(z)), dtype=float) for z in zs])
    mean = vals.mean(axis=0)
    var = vals.var(axis=0, ddof=1)
    se = np.sqrt(var / n_samples)
    return MonteCarloResult(mean=mean, variance=var, std_error=se, n_samples=n_samples)
