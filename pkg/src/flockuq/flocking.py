"""Pathwise flocking machinery: Lyapunov functionals, the implicit radius,
admissibility of initial data, decay verification, and the exponential
envelope engine for coupled dissipative differential inequalities.

For a sample z with zero-momentum data, flocking is admissible when

    ||V0|| < (1/sqrt(2)) * int_{sqrt(2)||X0||}^inf psi(s, z) ds,

and the uniform position radius x_M(z) is the unique solution of

    ||V0|| = (1/sqrt(2)) * [Psi(sqrt(2) x_M, z) - Psi(sqrt(2)||X0||, z)].

Along such a path, sup_t ||X(t)|| <= x_M and ||V(t)|| decays at least at
rate psi(sqrt(2) x_M, z).  An infinite radius (math.inf) is the explicit
"unbounded" outcome when admissibility fails; that is a legitimate
experimental regime, not an error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import EnsembleState, Trajectory, config_norms
from .kernels import CommunicationKernel, eval_psi, eval_psi_primitive, tail_integral

__all__ = [
    "FlockingCertificate",
    "EnvelopeConstants",
    "FitResult",
    "fit_decay_rate",
    "lyapunov",
    "solve_xM",
    "check_flocking_condition",
    "make_certificate",
    "verify_flocking",
    "envelope_constants",
    "verify_sddi_envelope",
    "forced_decay_bound",
    "integrate_ode",
    "NodeFlocking",
    "expected_flocking",
]

SQRT2 = math.sqrt(2.0)


@dataclass
class FlockingCertificate:
    """Per-sample flocking verdict and rates."""

    z: float
    condition_holds: bool
    xM: float  # math.inf encodes the "unbounded" outcome
    predicted_rate: float | None = None
    fitted_rate: float | None = None
    sup_X: float | None = None

    def to_dict(self) -> dict:
        return {
            "z": self.z,
            "condition_holds": self.condition_holds,
            "xM": "unbounded" if math.isinf(self.xM) else self.xM,
            "predicted_rate": self.predicted_rate,
            "fitted_rate": self.fitted_rate,
            "sup_X": self.sup_X,
        }


@dataclass(frozen=True)
class EnvelopeConstants:
    """Constants of the exponential envelope for the coupled inequalities

    |X'| <= V,   V' <= -alpha V + gamma e^{-alpha t} X + f.
    """

    alpha: float
    gamma: float
    f0: float
    f_l1: float
    A_inf: float
    B_inf: float


@dataclass(frozen=True)
class FitResult:
    rate: float | None
    n_points: int
    t_start: float
    t_end: float

    @property
    def vacuous(self) -> bool:
        return self.rate is None


def fit_decay_rate(
    times: np.ndarray,
    values: np.ndarray,
    floor_rel: float = 1e-8,
    from_peak: bool = False,
) -> FitResult:
    """Least-squares slope of log(values) over the window values >= floor_rel * ref.

    ``ref`` is the first value (or the peak with ``from_peak``); returns a
    vacuous result when the series carries no usable decay window.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    start = int(np.argmax(v)) if from_peak else 0
    ref = v[start]
    if not ref > 0:
        return FitResult(None, 0, 0.0, 0.0)
    idx = np.arange(v.shape[0])
    mask = (idx >= start) & (v > 0) & (v >= floor_rel * ref)
    if int(mask.sum()) < 2 or t[mask][-1] <= t[mask][0]:
        return FitResult(None, int(mask.sum()), 0.0, 0.0)
    slope = np.polyfit(t[mask], np.log(v[mask]), 1)[0]
    return FitResult(-float(slope), int(mask.sum()), float(t[mask][0]), float(t[mask][-1]))


def lyapunov(state: EnsembleState, kernel: CommunicationKernel) -> tuple[float, float]:
    """Lyapunov pair L+- = ||V|| +- (1/sqrt2) Psi(sqrt2 ||X||, z)."""
    nx, nv = config_norms(state)
    psi_part = eval_psi_primitive(kernel, SQRT2 * nx, state.z) / SQRT2
    return nv + psi_part, nv - psi_part


def check_flocking_condition(kernel: CommunicationKernel, z: float, X0norm: float, V0norm: float) -> bool:
    """True iff ||V0|| < (1/sqrt2) int_{sqrt2 ||X0||}^inf psi(s, z) ds."""
    if X0norm < 0 or V0norm < 0:
        raise ValueError("norms must be nonnegative")
    avail = tail_integral(kernel, z, SQRT2 * X0norm)
    if math.isinf(avail):
        return True
    return V0norm < avail / SQRT2


def solve_xM(kernel: CommunicationKernel, z: float, X0norm: float, V0norm: float) -> float:
    """The implicit uniform position radius; math.inf when admissibility fails.

    Bracketing by doubling, bisection to width 1e-8, then Newton polish to
    |residual| <= 1e-12 * max(1, ||V0||).
    """
    if X0norm < 0 or V0norm < 0:
        raise ValueError("norms must be nonnegative")
    if V0norm == 0.0:
        return X0norm
    if not check_flocking_condition(kernel, z, X0norm, V0norm):
        return math.inf
    a = SQRT2 * X0norm
    psi0_at_a = eval_psi_primitive(kernel, a, z)

    def g(x: float) -> float:
        return (eval_psi_primitive(kernel, SQRT2 * x, z) - psi0_at_a) / SQRT2 - V0norm

    lo = X0norm
    hi = max(2.0 * X0norm, X0norm + 1.0)
    for _ in range(200):
        if g(hi) >= 0.0:
            break
        lo = hi
        hi *= 2.0
    else:  # pragma: no cover - admissibility guarantees a bracket
        raise RuntimeError("failed to bracket the implicit radius")
    while hi - lo > 1e-8:
        mid = 0.5 * (lo + hi)
        if g(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    tol = 1e-12 * max(1.0, V0norm)
    for _ in range(5):
        gx = g(x)
        if abs(gx) <= tol:
            break
        x -= gx / eval_psi(kernel, SQRT2 * x, z)
        x = min(max(x, lo), hi)
    return x


def make_certificate(kernel: CommunicationKernel, z: float, X0norm: float, V0norm: float) -> FlockingCertificate:
    holds = check_flocking_condition(kernel, z, X0norm, V0norm)
    xM = solve_xM(kernel, z, X0norm, V0norm)
    rate = eval_psi(kernel, SQRT2 * xM, z) if math.isfinite(xM) else None
    return FlockingCertificate(z=z, condition_holds=holds, xM=xM, predicted_rate=rate)


@dataclass
class FlockingReport:
    passed: bool
    sup_x_ok: bool
    envelope_ok: bool
    violations: list = field(default_factory=list)
    fit: FitResult | None = None

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "sup_x_ok": self.sup_x_ok,
            "envelope_ok": self.envelope_ok,
            "violations": self.violations,
        }


def verify_flocking(traj: Trajectory, certificate: FlockingCertificate, rel_slack: float = 1e-6) -> FlockingReport:
    """Check sup_t ||X|| <= x_M and the exponential velocity envelope on a path.

    Fills ``certificate.sup_X`` and ``certificate.fitted_rate`` (least-squares
    fit of log ||V|| over the window ||V|| >= 1e-8 ||V0||).
    """
    if not certificate.condition_holds:
        raise ValueError("trajectory initial data does not satisfy the flocking condition")
    x_norms = traj.x_norms()
    v_norms = traj.v_norms()
    sup_x = float(np.max(x_norms))
    certificate.sup_X = sup_x
    violations: list = []
    sup_x_ok = sup_x <= certificate.xM * (1.0 + rel_slack)
    if not sup_x_ok:
        violations.append({"check": "sup_x", "value": sup_x, "bound": certificate.xM})
    rate = certificate.predicted_rate
    v0 = v_norms[0]
    envelope = v0 * np.exp(-rate * (traj.times - traj.times[0]))
    bad = np.nonzero(v_norms > envelope * (1.0 + rel_slack))[0]
    envelope_ok = bad.size == 0
    for k in bad[:10]:
        violations.append(
            {"check": "v_envelope", "t": float(traj.times[k]), "value": float(v_norms[k]), "bound": float(envelope[k])}
        )
    fit = fit_decay_rate(traj.times, v_norms)
    certificate.fitted_rate = fit.rate
    return FlockingReport(passed=sup_x_ok and envelope_ok, sup_x_ok=sup_x_ok, envelope_ok=envelope_ok,
                          violations=violations, fit=fit)


def envelope_constants(alpha: float, gamma: float, f0: float = 0.0, f_l1: float = 0.0) -> EnvelopeConstants:
    """Closed-form envelope constants.

    A_inf = exp(gamma * int_0^inf s e^{-alpha s} ds) = exp(gamma / alpha^2),
    B_inf = max(gamma/alpha, 1) * (1 + 8 gamma / (alpha^2 e^2) * A_inf).
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    arg = gamma / (alpha * alpha)
    A_inf = math.exp(arg) if arg < 709.0 else math.inf
    B_inf = max(gamma / alpha, 1.0) * (1.0 + (8.0 * gamma / (alpha * alpha * math.e * math.e)) * A_inf)
    return EnvelopeConstants(alpha=alpha, gamma=gamma, f0=f0, f_l1=f_l1, A_inf=A_inf, B_inf=B_inf)


@dataclass
class EnvelopeReport:
    passed: bool
    x_violations: list
    v_violations: list

    def to_dict(self) -> dict:
        return {"passed": self.passed, "x_violations": self.x_violations, "v_violations": self.v_violations}


def verify_sddi_envelope(
    times: np.ndarray,
    series_X: np.ndarray,
    series_V: np.ndarray,
    constants: EnvelopeConstants,
    f=None,
    rel_slack: float = 1e-9,
) -> EnvelopeReport:
    """Check both envelope inequalities at every sample of (X, V).

    X(t) <= (1 + 2 B/alpha)(X0 + V0 + f(0) + ||f||_L1) and
    V(t) <= B (X0 + V0 + f(0) + ||f||_L1) e^{-alpha t / 2} + f(t/2)/alpha.
    """
    t = np.asarray(times, dtype=float)
    sx = np.asarray(series_X, dtype=float)
    sv = np.asarray(series_V, dtype=float)
    alpha, B = constants.alpha, constants.B_inf
    data0 = sx[0] + sv[0] + constants.f0 + constants.f_l1
    bound_x = (1.0 + 2.0 * B / alpha) * data0
    f_half = np.array([f(tk / 2.0) for tk in t]) if f is not None else np.zeros_like(t)
    bound_v = B * data0 * np.exp(-(alpha / 2.0) * t) + f_half / alpha
    xv = [
        {"t": float(t[k]), "value": float(sx[k]), "bound": float(bound_x)}
        for k in np.nonzero(sx > bound_x * (1.0 + rel_slack))[0][:10]
    ]
    vv = [
        {"t": float(t[k]), "value": float(sv[k]), "bound": float(bound_v[k])}
        for k in np.nonzero(sv > bound_v * (1.0 + rel_slack))[0][:10]
    ]
    return EnvelopeReport(passed=not xv and not vv, x_violations=xv, v_violations=vv)


def forced_decay_bound(alpha: float, y0: float, f, f_linf: float, t: float) -> float:
    """Envelope for y' <= -alpha y + f with f continuous decaying to zero:

    y(t) <= (1/alpha) max_{[t/2, t]} |f| + y0 e^{-alpha t} + (||f||_inf/alpha) e^{-alpha t / 2}.
    """
    if t < 0:
        raise ValueError("time must be nonnegative")
    grid = np.linspace(t / 2.0, t, 17)
    fmax = float(np.max(np.abs([f(s) for s in grid]))) if t > 0 else abs(f(0.0))
    return fmax / alpha + y0 * math.exp(-alpha * t) + (f_linf / alpha) * math.exp(-(alpha / 2.0) * t)


def integrate_ode(fun, y0, dt: float, n_steps: int, t0: float = 0.0):
    """Plain fixed-step RK4 for small oracle systems: fun(t, y) -> dy/dt."""
    y = np.asarray(y0, dtype=float).copy()
    times = t0 + dt * np.arange(n_steps + 1)
    out = np.empty((n_steps + 1,) + y.shape)
    out[0] = y
    for k in range(n_steps):
        t = times[k]
        k1 = np.asarray(fun(t, y))
        k2 = np.asarray(fun(t + 0.5 * dt, y + 0.5 * dt * k1))
        k3 = np.asarray(fun(t + 0.5 * dt, y + 0.5 * dt * k2))
        k4 = np.asarray(fun(t + dt, y + dt * k3))
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k + 1] = y
    return times, out


@dataclass(eq=False)
class NodeFlocking:
    """Per-quadrature-node flocking result bundle."""

    z: float
    certificate: FlockingCertificate
    times: np.ndarray
    x_norms: np.ndarray
    v_norms: np.ndarray
    report: FlockingReport | None = None
    trajectory: Trajectory | None = None


@dataclass
class ExpectedFlockingReport:
    E_xM: float
    times: np.ndarray
    E_v: np.ndarray
    E_v0: float
    psi_lower: float
    passed: bool
    violations: list

    def to_dict(self) -> dict:
        return {
            "E_xM": self.E_xM,
            "E_v0": self.E_v0,
            "psi_lower": self.psi_lower,
            "passed": self.passed,
            "violations": self.violations,
        }


def expected_flocking(nodes: list[NodeFlocking], rule, psi_lower: float, rel_slack: float = 1e-6) -> ExpectedFlockingReport:
    """Quadrature expectations of the radius and the velocity-norm decay.

    Requires a uniform positive kernel lower bound psi_lower > 0; asserts
    E[||V(t)||] <= E[||V0||] e^{-psi_lower t} (1 + slack) at saved times.
    """
    if psi_lower <= 0:
        raise ValueError("expected decay needs a positive uniform kernel lower bound")
    if len(nodes) != len(rule.nodes):
        raise ValueError("node results do not match the quadrature rule")
    times = nodes[0].times
    E_xM = 0.0
    E_v = np.zeros_like(nodes[0].v_norms)
    for q, node in enumerate(nodes):  # ascending node order, deterministic reduction
        if not np.array_equal(node.times, times):
            raise ValueError("node time grids differ")
        w = float(rule.weights[q])
        E_xM += w * node.certificate.xM
        E_v = E_v + w * node.v_norms
    E_v0 = float(E_v[0])
    envelope = E_v0 * np.exp(-psi_lower * (times - times[0]))
    bad = np.nonzero(E_v > envelope * (1.0 + rel_slack))[0]
    violations = [
        {"t": float(times[k]), "value": float(E_v[k]), "bound": float(envelope[k])} for k in bad[:10]
    ]
    return ExpectedFlockingReport(
        E_xM=float(E_xM), times=times, E_v=E_v, E_v0=E_v0, psi_lower=psi_lower,
        passed=bad.size == 0, violations=violations,
    )
