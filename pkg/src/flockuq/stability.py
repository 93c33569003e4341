"""Paired-trajectory stability machinery.

Two primal runs (base and perturbed initial data, same kernel, same sample,
same step, same summation order) are integrated independently and their
differences are formed by subtraction; integrating the difference system
directly is left to the test oracles.  The stability constant is

    M0 = 1 + B(1 + 2/psi_m),

with B the envelope constant for alpha = psi_m and
gamma = 2 sqrt(2) Lip(psi) ||V0||, and psi_m the smaller of the kernel
values at the two uniform radii.  Jet-difference stability at order l uses
the envelope rate psi_m / lambda_l with lambda_l = 2^{l+1}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import config_norms
from .flocking import FitResult, envelope_constants, fit_decay_rate, solve_xM
from .kernels import CommunicationKernel, KernelCertificate, eval_psi
from .sensitivity import JetEnsemble, JetTrajectory, integrate_jets, sensitivity_norms

__all__ = [
    "PairedRun",
    "StabilityReport",
    "velocity_perturbation",
    "paired_run",
    "psi_m",
    "m0_constant",
    "verify_l2_stability",
    "verify_hk_stability",
]

SQRT2 = math.sqrt(2.0)


@dataclass(eq=False)
class PairedRun:
    """Base and perturbed jet trajectories on identical grids."""

    base: JetTrajectory
    pert: JetTrajectory
    delta0_x: float
    delta0_v: float

    def __post_init__(self):
        if not np.array_equal(self.base.times, self.pert.times):
            raise ValueError("paired runs must share the time grid")
        if self.base.z != self.pert.z:
            raise ValueError("paired runs must share the sample z")

    @property
    def order(self) -> int:
        return self.base.order

    def delta_norms(self, k: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """Stacked norms of the order-k difference jets over time."""
        dX = self.base.Xj[:, :, :, k] - self.pert.Xj[:, :, :, k]
        dV = self.base.Vj[:, :, :, k] - self.pert.Vj[:, :, :, k]
        return (
            np.sqrt(np.sum(dX * dX, axis=(1, 2))),
            np.sqrt(np.sum(dV * dV, axis=(1, 2))),
        )


def velocity_perturbation(
    N: int,
    d: int,
    magnitude: float,
    rng: np.random.Generator,
    agents: tuple[int, int] = (0, 1),
    orders: tuple[int, ...] = (0,),
    m: int = 0,
) -> np.ndarray:
    """Momentum-neutral velocity jet perturbation of stacked norm ``magnitude``.

    Adds +w to one agent and -w to another (per requested jet order), with
    ||w|| = magnitude / sqrt(2), so the total momentum and all its
    z-derivatives are unchanged while ||Delta V(0)|| = magnitude exactly
    at each perturbed order.
    """
    if N < 2:
        raise ValueError("need at least two agents for a momentum-neutral perturbation")
    a, b = agents
    dV = np.zeros((N, d, m + 1))
    for k in orders:
        if not 0 <= k <= m:
            raise ValueError(f"perturbation order {k} outside jet range 0..{m}")
        u = rng.normal(size=d)
        u /= math.sqrt(float(np.dot(u, u)))
        w = (magnitude / SQRT2) * u
        dV[a, :, k] += w
        dV[b, :, k] -= w
    return dV


def paired_run(
    kernel: CommunicationKernel,
    initial: JetEnsemble,
    perturbation_v: np.ndarray,
    T: float,
    dt: float,
    save_every: int = 1,
    momentum_tol: float = 1e-10,
) -> PairedRun:
    """Integrate base and perturbed initial data with identical settings."""
    pert = JetEnsemble(t=initial.t, z=initial.z, Xj=initial.Xj.copy(), Vj=initial.Vj + perturbation_v)
    for ens, tag in ((initial, "base"), (pert, "perturbed")):
        mom = ens.Vj[:, :, 0].sum(axis=0)
        scale = max(1.0, float(np.max(np.abs(ens.Vj[:, :, 0]))))
        if float(np.max(np.abs(mom))) > momentum_tol * ens.N * scale:
            raise ValueError(f"{tag} initial data violates zero total momentum")
    base_traj = integrate_jets(initial, kernel, T, dt, save_every)
    pert_traj = integrate_jets(pert, kernel, T, dt, save_every)
    d0 = initial.Xj[:, :, 0] - pert.Xj[:, :, 0]
    dv0 = initial.Vj[:, :, 0] - pert.Vj[:, :, 0]
    return PairedRun(
        base=base_traj,
        pert=pert_traj,
        delta0_x=float(np.sqrt(np.sum(d0 * d0))),
        delta0_v=float(np.sqrt(np.sum(dv0 * dv0))),
    )


def psi_m(kernel: CommunicationKernel, z: float, xM_base: float, xM_pert: float) -> float:
    """min of the kernel values at the two uniform radii (both finite)."""
    if not (math.isfinite(xM_base) and math.isfinite(xM_pert)):
        raise ValueError("both uniform radii must be finite")
    return min(eval_psi(kernel, SQRT2 * xM_base, z), eval_psi(kernel, SQRT2 * xM_pert, z))


def m0_constant(certificate: KernelCertificate, z: float, V0norm: float, psi_m_value: float) -> float:
    """Stability constant M0 = 1 + B(1 + 2/psi_m) with gamma = 2 sqrt2 Lip ||V0||."""
    if psi_m_value <= 0:
        raise ValueError("psi_m must be positive")
    gamma = 2.0 * SQRT2 * certificate.lip * V0norm
    B = envelope_constants(psi_m_value, gamma).B_inf
    return 1.0 + B * (1.0 + 2.0 / psi_m_value)


@dataclass
class OrderStability:
    order: int
    fitted_rate: float | None
    required_rate: float
    rate_ok: bool
    sup_delta_x: float
    x_drift: float
    drift_ok: bool
    implied_envelope_constant: float
    vacuous: bool


@dataclass
class StabilityReport:
    z: float
    psi_m: float
    M0: float
    sup_ratio: float
    delta_v_rate: float | None
    passed: bool
    violations: list = field(default_factory=list)
    orders: list[OrderStability] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "z": self.z,
            "psi_m": self.psi_m,
            "M0": self.M0,
            "sup_ratio": self.sup_ratio,
            "delta_v_rate": self.delta_v_rate,
            "passed": self.passed,
            "violations": self.violations,
            "orders": [vars(o) for o in self.orders],
        }


def _initial_norms(traj: JetTrajectory) -> tuple[float, float]:
    st = traj.jet_state(0).base_state()
    return config_norms(st)


def verify_l2_stability(
    run: PairedRun,
    kernel: CommunicationKernel,
    certificate: KernelCertificate,
    rel_slack: float = 1e-6,
    rate_slack: float = 0.1,
) -> StabilityReport:
    """Uniform pairwise stability of trajectories with respect to initial data.

    Asserts sup_t (||Delta_x|| + ||Delta_v||) <= M0 (||Delta0_x|| + ||Delta0_v||)
    and that ||Delta_v|| decays at fitted rate >= psi_m/2 less the slack.
    Zero perturbations pass vacuously.
    """
    z = run.base.z
    x0b, v0b = _initial_norms(run.base)
    x0p, v0p = _initial_norms(run.pert)
    xM_b = solve_xM(kernel, z, x0b, v0b)
    xM_p = solve_xM(kernel, z, x0p, v0p)
    pm = psi_m(kernel, z, xM_b, xM_p)
    M0 = m0_constant(certificate, z, max(v0b, v0p), pm)
    dx, dv = run.delta_norms(0)
    denom = run.delta0_x + run.delta0_v
    violations: list = []
    if denom == 0.0:
        sup_ratio = 0.0
        if float(np.max(dx + dv)) != 0.0:
            violations.append({"check": "identical_runs_differ"})
        return StabilityReport(z=z, psi_m=pm, M0=M0, sup_ratio=sup_ratio, delta_v_rate=None,
                               passed=not violations, violations=violations)
    sup_ratio = float(np.max(dx + dv)) / denom
    ratio_ok = sup_ratio <= M0 * (1.0 + rel_slack)
    if not ratio_ok:
        violations.append({"check": "sup_ratio", "value": sup_ratio, "bound": M0})
    fit = fit_decay_rate(run.base.times, dv, from_peak=True)
    required = (pm / 2.0) * (1.0 - rate_slack)
    rate_ok = fit.rate is not None and fit.rate >= required
    if not rate_ok:
        violations.append({"check": "delta_v_rate", "value": fit.rate, "bound": required})
    return StabilityReport(z=z, psi_m=pm, M0=M0, sup_ratio=sup_ratio, delta_v_rate=fit.rate,
                           passed=ratio_ok and rate_ok, violations=violations)


def _drift(times: np.ndarray, series: np.ndarray, window_frac: float = 0.8) -> float:
    """Relative growth over the trailing window; needs a horizon long enough
    for the difference norms to level off (several multiples of 1/psi_m)."""
    t0 = times[0] + window_frac * (times[-1] - times[0])
    w = times >= t0
    scale = max(float(np.max(series)), 1e-300)
    return float(np.max(series[w]) - series[w][0]) / scale


def verify_hk_stability(
    run: PairedRun,
    kernel: CommunicationKernel,
    certificate: KernelCertificate,
    ell: int,
    rate_slack_factor: float = 2.0,
    drift_tol: float = 1e-3,
) -> StabilityReport:
    """Jet-difference stability up to order ell.

    The velocity-difference sums sum_{k<=ell} ||d^k_z Delta_v|| must decay
    exponentially at fitted rate >= psi_m / (rate_slack_factor * lambda_ell)
    with lambda_ell = 2^{ell+1}; the position-difference sums must stay
    bounded (drift check beyond the transient).  Also reports the smallest
    constant E with S_v(t) <= (S_v(0) + E) exp(-psi_m t / lambda_ell).
    """
    if ell > run.order:
        raise ValueError(f"requested order {ell} exceeds jet order {run.order}")
    z = run.base.z
    x0b, v0b = _initial_norms(run.base)
    x0p, v0p = _initial_norms(run.pert)
    pm = psi_m(kernel, z, solve_xM(kernel, z, x0b, v0b), solve_xM(kernel, z, x0p, v0p))
    M0 = m0_constant(certificate, z, max(v0b, v0p), pm)
    times = run.base.times
    lam = 2.0 ** (ell + 1)
    required = pm / (rate_slack_factor * lam)

    orders: list[OrderStability] = []
    violations: list = []
    passed = True
    sum_dv = np.zeros_like(times)
    sum_dx = np.zeros_like(times)
    for k in range(ell + 1):
        dx, dv = run.delta_norms(k)
        sum_dv = sum_dv + dv
        sum_dx = sum_dx + dx
        res = _order_stability(times, k, dx, dv, pm, lam, required, drift_tol)
        orders.append(res)
        if not res.vacuous and not (res.rate_ok and res.drift_ok):
            passed = False
            violations.append({"check": "order", "order": k, "rate": res.fitted_rate, "required": res.required_rate,
                               "drift": res.x_drift})
    total = _order_stability(times, -1, sum_dx, sum_dv, pm, lam, required, drift_tol)
    if not total.vacuous and not (total.rate_ok and total.drift_ok):
        passed = False
        violations.append({"check": "summed", "rate": total.fitted_rate, "required": total.required_rate,
                           "drift": total.x_drift})
    dv_rate = total.fitted_rate
    sup_ratio = 0.0
    denom = run.delta0_x + run.delta0_v
    if denom > 0:
        dx0, dv0 = run.delta_norms(0)
        sup_ratio = float(np.max(dx0 + dv0)) / denom
    return StabilityReport(z=z, psi_m=pm, M0=M0, sup_ratio=sup_ratio, delta_v_rate=dv_rate,
                           passed=passed, violations=violations, orders=orders)


def _order_stability(times, k, dx, dv, pm, lam, required, drift_tol) -> OrderStability:
    if float(np.max(dv)) == 0.0 and float(np.max(dx)) == 0.0:
        return OrderStability(k, None, required, True, 0.0, 0.0, True, 0.0, True)
    fit = fit_decay_rate(times, dv, from_peak=True)
    rate_ok = fit.rate is not None and fit.rate >= required
    # smallest E with S_v(t) <= (S_v(0) + E) * exp(-pm t / lam); diagnostic
    grow = dv * np.exp((pm / lam) * (times - times[0]))
    implied = max(0.0, float(np.max(grow)) - float(dv[0]))
    drift = _drift(times, dx)
    drift_ok = drift < drift_tol
    return OrderStability(k, fit.rate, required, rate_ok, float(np.max(dx)), drift, drift_ok, implied, False)
