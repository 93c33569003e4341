"""Truncated Taylor-jet arithmetic in one random parameter.

A jet of order ``m`` is the array ``[f, f', f'', ..., f^(m)]`` of *raw*
derivatives with respect to the parameter (project-wide convention: raw
derivatives, NOT Taylor-normalized coefficients ``f^(k)/k!``).  With this
convention products carry binomial weights (Leibniz rule) and the m-th
coefficient of a product reproduces the binomially weighted sums that the
higher-order sensitivity systems require.

All elementary operations broadcast over leading axes; the coefficient axis
is always the last one.  Loop order inside each operation is fixed
(ascending coefficient, ascending summation index) so that results are
reproducible and identical to the compiled kernels' operation order.

Bivariate jets (two independent variables, e.g. radius and parameter) are
supported for derivative certification; coefficients live on the last two
axes and entries are valid for total order ``a + b <= m`` only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "binomial_table",
    "jet_mul",
    "jet_exp",
    "jet_log",
    "jet_compose",
    "jet_var",
    "jet_const",
    "Jet",
    "faa_di_bruno_reference",
    "jet2_mul",
    "jet2_exp",
    "jet2_log",
]


def binomial_table(m: int) -> np.ndarray:
    """(m+1)x(m+1) table of binomial coefficients C(n, k) as float64."""
    if m < 0:
        raise ValueError("jet order must be >= 0")
    B = np.zeros((m + 1, m + 1))
    for n in range(m + 1):
        for k in range(n + 1):
            B[n, k] = float(math.comb(n, k))
    return B


def _order(coeffs: np.ndarray) -> int:
    return coeffs.shape[-1] - 1


def jet_mul(f: np.ndarray, g: np.ndarray, binom: np.ndarray | None = None) -> np.ndarray:
    """Leibniz product: out[n] = sum_k C(n,k) f[k] g[n-k]."""
    m = _order(f)
    if _order(g) != m:
        raise ValueError("jet orders differ")
    B = binomial_table(m) if binom is None else binom
    out = np.zeros(np.broadcast_shapes(f.shape[:-1], g.shape[:-1]) + (m + 1,))
    for n in range(m + 1):
        acc = np.zeros(out.shape[:-1])
        for k in range(n + 1):
            acc = acc + B[n, k] * f[..., k] * g[..., n - k]
        out[..., n] = acc
    return out


def jet_exp(e: np.ndarray, binom: np.ndarray | None = None) -> np.ndarray:
    """exp of a jet: w[0] = exp(e[0]); w[n] = sum_j C(n-1,j) e[j+1] w[n-1-j]."""
    m = _order(e)
    B = binomial_table(m) if binom is None else binom
    out = np.zeros_like(np.asarray(e, dtype=float))
    out[..., 0] = np.exp(e[..., 0])
    for n in range(1, m + 1):
        acc = np.zeros(out.shape[:-1])
        for j in range(n):
            acc = acc + B[n - 1, j] * e[..., j + 1] * out[..., n - 1 - j]
        out[..., n] = acc
    return out


def jet_log(u: np.ndarray, binom: np.ndarray | None = None) -> np.ndarray:
    """log of a jet with u[0] > 0.

    From u' = L' u:  L[n] = (u[n] - sum_{j<=n-2} C(n-1,j) L[j+1] u[n-1-j]) / u[0].
    """
    m = _order(u)
    B = binomial_table(m) if binom is None else binom
    out = np.zeros_like(np.asarray(u, dtype=float))
    out[..., 0] = np.log(u[..., 0])
    for n in range(1, m + 1):
        acc = np.zeros(out.shape[:-1])
        for j in range(n - 1):
            acc = acc + B[n - 1, j] * out[..., j + 1] * u[..., n - 1 - j]
        out[..., n] = (u[..., n] - acc) / u[..., 0]
    return out


def jet_var(value: float, m: int) -> np.ndarray:
    """Jet of the independent variable itself: [value, 1, 0, ...]."""
    c = np.zeros(m + 1)
    c[0] = value
    if m >= 1:
        c[1] = 1.0
    return c


def jet_const(value: float, m: int) -> np.ndarray:
    c = np.zeros(m + 1)
    c[0] = value
    return c


def jet_compose(fderivs: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Raw derivatives of f(g(z)) from f-derivatives at g[0] and the inner jet g.

    Production route for composition: truncated power-series Horner
    evaluation on Taylor-normalized coefficients.  The explicit
    combinatorial chain-rule sum (`faa_di_bruno_reference`) serves as the
    independent low-order oracle for this routine.
    """
    fderivs = np.asarray(fderivs, dtype=float)
    g = np.asarray(g, dtype=float)
    m = _order(g)
    if _order(fderivs) < m:
        raise ValueError("need f-derivatives up to the jet order")
    fact = np.array([math.factorial(k) for k in range(m + 1)])
    F = fderivs[: m + 1] / fact
    G = g / fact
    G0 = G.copy()
    G0[0] = 0.0
    # Horner on truncated series: H = F[m]; H = F[k] + H * G0
    H = np.zeros(m + 1)
    H[0] = F[m]
    for k in range(m - 1, -1, -1):
        H = _series_mul(H, G0, m)
        H[0] += F[k]
    return H * fact


def _series_mul(a: np.ndarray, b: np.ndarray, m: int) -> np.ndarray:
    out = np.zeros(m + 1)
    for n in range(m + 1):
        s = 0.0
        for k in range(n + 1):
            s += a[k] * b[n - k]
        out[n] = s
    return out


def _diophantine_solutions(n: int):
    """All (k_1, ..., k_n) with k_1 + 2 k_2 + ... + n k_n = n."""

    def rec(idx: int, remaining: int, partial: list[int]):
        if idx == n:
            if remaining == 0:
                yield tuple(partial)
            return
        part = idx + 1
        for cnt in range(remaining // part + 1):
            yield from rec(idx + 1, remaining - cnt * part, partial + [cnt])

    yield from rec(0, n, [])


def faa_di_bruno_reference(psi_derivs: np.ndarray, inner_jets: np.ndarray, n: int) -> float:
    """n-th derivative of f(g(z)) via the explicit combinatorial chain rule.

    Reference oracle only (n <= 4): enumerates nonnegative integer solutions
    of k_1 + 2 k_2 + ... + n k_n = n and sums
    n!/(k_1! ... k_n!) f^(k)(g) prod_j (g^(j)/j!)^(k_j) with k = sum k_j.
    """
    if n > 4:
        raise ValueError("reference oracle supports n <= 4 only")
    if n < 0:
        raise ValueError("derivative order must be >= 0")
    f = np.asarray(psi_derivs, dtype=float)
    g = np.asarray(inner_jets, dtype=float)
    if n == 0:
        return float(f[0])
    total = 0.0
    for ks in _diophantine_solutions(n):
        k = sum(ks)
        coef = math.factorial(n)
        for kj in ks:
            coef //= math.factorial(kj)
        term = float(coef) * f[k]
        for j, kj in enumerate(ks, start=1):
            if kj:
                term *= (g[j] / math.factorial(j)) ** kj
        total += term
    return total


@dataclass(frozen=True, eq=False)
class Jet:
    """Convenience wrapper over a raw-derivative coefficient array."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim != 1:
            raise ValueError("Jet coefficients must be one-dimensional")
        if not np.all(np.isfinite(c)):
            raise ValueError("Jet coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    @property
    def order(self) -> int:
        return self.coeffs.shape[0] - 1

    @classmethod
    def variable(cls, value: float, m: int) -> "Jet":
        return cls(jet_var(value, m))

    @classmethod
    def constant(cls, value: float, m: int) -> "Jet":
        return cls(jet_const(value, m))

    def _coerce(self, other) -> np.ndarray:
        if isinstance(other, Jet):
            return other.coeffs
        return jet_const(float(other), self.order)

    def __add__(self, other) -> "Jet":
        return Jet(self.coeffs + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other) -> "Jet":
        return Jet(self.coeffs - self._coerce(other))

    def __rsub__(self, other) -> "Jet":
        return Jet(self._coerce(other) - self.coeffs)

    def __mul__(self, other) -> "Jet":
        return Jet(jet_mul(self.coeffs, self._coerce(other)))

    __rmul__ = __mul__

    def __neg__(self) -> "Jet":
        return Jet(-self.coeffs)

    def exp(self) -> "Jet":
        return Jet(jet_exp(self.coeffs))

    def log(self) -> "Jet":
        return Jet(jet_log(self.coeffs))

    def value(self) -> float:
        return float(self.coeffs[0])

    def derivative(self, k: int) -> float:
        return float(self.coeffs[k])


# ---------------------------------------------------------------------------
# Bivariate jets: coefficient block C[..., a, b] = d^a/dr^a d^b/dz^b f.
# Entries are computed (and valid) for total order a + b <= m only.
# ---------------------------------------------------------------------------


def _total_order_indices(m: int):
    for tot in range(m + 1):
        for a in range(tot + 1):
            yield a, tot - a


def jet2_mul(f: np.ndarray, g: np.ndarray, binom: np.ndarray, m: int) -> np.ndarray:
    out = np.zeros(np.broadcast_shapes(f.shape[:-2], g.shape[:-2]) + f.shape[-2:])
    for a, b in _total_order_indices(m):
        acc = np.zeros(out.shape[:-2])
        for p in range(a + 1):
            for q in range(b + 1):
                acc = acc + (binom[a, p] * binom[b, q]) * f[..., p, q] * g[..., a - p, b - q]
        out[..., a, b] = acc
    return out


def jet2_exp(e: np.ndarray, binom: np.ndarray, m: int) -> np.ndarray:
    out = np.zeros_like(np.asarray(e, dtype=float))
    out[..., 0, 0] = np.exp(e[..., 0, 0])
    for a, b in _total_order_indices(m):
        if a == 0 and b == 0:
            continue
        acc = np.zeros(out.shape[:-2])
        if a >= 1:
            # d/dr direction: w_r = e_r * w
            for p in range(a):
                for q in range(b + 1):
                    acc = acc + (binom[a - 1, p] * binom[b, q]) * e[..., p + 1, q] * out[..., a - 1 - p, b - q]
        else:
            # d/dz direction: w_z = e_z * w
            for q in range(b):
                acc = acc + binom[b - 1, q] * e[..., 0, q + 1] * out[..., 0, b - 1 - q]
        out[..., a, b] = acc
    return out


def jet2_log(u: np.ndarray, binom: np.ndarray, m: int) -> np.ndarray:
    out = np.zeros_like(np.asarray(u, dtype=float))
    out[..., 0, 0] = np.log(u[..., 0, 0])
    for a, b in _total_order_indices(m):
        if a == 0 and b == 0:
            continue
        acc = np.zeros(out.shape[:-2])
        if a >= 1:
            # u_r = L_r * u; isolate the (a, b) coefficient of L
            for p in range(a):
                for q in range(b + 1):
                    if p == a - 1 and q == b:
                        continue
                    acc = acc + (binom[a - 1, p] * binom[b, q]) * out[..., p + 1, q] * u[..., a - 1 - p, b - q]
            out[..., a, b] = (u[..., a, b] - acc) / u[..., 0, 0]
        else:
            for q in range(b - 1):
                acc = acc + binom[b - 1, q] * out[..., 0, q + 1] * u[..., 0, b - 1 - q]
            out[..., 0, b] = (u[..., 0, b] - acc) / u[..., 0, 0]
    return out
