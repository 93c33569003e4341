"""End-to-end acceptance suite: every headline property checked at desk scale.

The thirteen criteria pin sizes, tolerances and runtime limits; the engine
caches shared runs (one criterion's trajectory batch feeds several checks).
Results carry only deterministic numbers so emitted artifacts are
byte-reproducible; wall-clock measurements are reported separately.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from decimal import Decimal, getcontext
from functools import cached_property

import numpy as np

from . import backend
from .dynamics import integrate, kinetic_dissipation, moments, random_family
from .flocking import (
    envelope_constants,
    expected_flocking,
    fit_decay_rate,
    forced_decay_bound,
    integrate_ode,
    lyapunov,
    make_certificate,
    solve_xM,
    verify_sddi_envelope,
)
from .jets import faa_di_bruno_reference, jet_compose
from .kernels import CommunicationKernel, certify
from .runs import (
    LANE_EXTRA,
    LANE_MONTE_CARLO,
    LANE_PERTURBATION,
    LANE_FAMILY,
    rng_from,
    run_flocking_batch,
    seed_tree,
)
from .sensitivity import (
    JetEnsemble,
    finite_difference_check,
    integrate_jets,
    momentum_residuals,
    verify_sensitivity_decay,
)
from .stability import paired_run, velocity_perturbation, verify_hk_stability, verify_l2_stability
from .uq import build_quadrature, monte_carlo

__all__ = ["CriterionResult", "AcceptanceContext", "run_all", "CRITERIA"]

DEFAULT_SEED = 20260809
Z_SENS = 0.3  # sample used for sensitivity/stability single-sample runs


@dataclass
class CriterionResult:
    cid: int
    name: str
    passed: bool
    runtime: float
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.cid:2d} {self.name} ({self.runtime:.2f}s)"


class AcceptanceContext:
    """Caches the runs shared between criteria."""

    def __init__(self, seed: int = DEFAULT_SEED, threads: int = 1):
        self.seed = seed
        self.threads = threads
        self.kernel = CommunicationKernel(psi0=0.5, K0=1.0, sigmaK=0.3, beta0=1.0, sigmaB=0.0)
        lanes = seed_tree(seed)
        fam_seeds = lanes[LANE_FAMILY].spawn(4)
        self.fam20 = random_family(20, 2, rng_from(fam_seeds[0]))
        self.fam10 = random_family(10, 2, rng_from(fam_seeds[1]))
        self.fam4 = random_family(4, 2, rng_from(fam_seeds[2]))
        self.mc_lane = lanes[LANE_MONTE_CARLO]
        self.pert_lane = lanes[LANE_PERTURBATION]
        self.extra_lane = lanes[LANE_EXTRA]

    @cached_property
    def kernel_certificate(self):
        return certify(self.kernel, order=2)

    @cached_property
    def base20(self):
        state = self.fam20.ensemble(0.0)
        return integrate(state, self.kernel, T=30.0, dt=1e-3, save_every=10)

    @cached_property
    def rule16(self):
        return build_quadrature("uniform", 16)

    @cached_property
    def nodes16(self):
        return run_flocking_batch(self.kernel, self.fam10, self.rule16, T=30.0, dt=1e-3,
                                  save_every=10, threads=self.threads)

    @cached_property
    def jets50(self):
        ens = JetEnsemble.from_family(self.fam10, Z_SENS, m=2)
        return integrate_jets(ens, self.kernel, T=50.0, dt=1e-3, save_every=10)

    @cached_property
    def flocking_cert_sens(self):
        x0, v0 = self.fam10.norms_at(Z_SENS)
        return make_certificate(self.kernel, Z_SENS, x0, v0)

    @cached_property
    def stability_direction(self):
        rng = rng_from(self.pert_lane)
        return velocity_perturbation(10, 2, 1.0, rng, orders=(0,), m=0)

    def stability_pair(self, eps: float):
        ens = JetEnsemble.from_family(self.fam10, Z_SENS, m=0)
        return paired_run(self.kernel, ens, eps * self.stability_direction, T=30.0, dt=1e-3, save_every=10)


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


# --------------------------------------------------------------------------
# Criteria
# --------------------------------------------------------------------------


def c01_momentum_conservation(ctx: AcceptanceContext) -> CriterionResult:
    """N=20, d=2, dt=1e-3, T=30: total momentum drift <= 1e-10; runtime < 10 s."""
    traj, elapsed = _timed(lambda: ctx.base20)
    m1_0, _ = moments(traj.state(0))
    drift = 0.0
    for k in range(traj.n_saved):
        m1_k, _ = moments(traj.state(k))
        drift = max(drift, float(np.max(np.abs(m1_k - m1_0))))
    within = elapsed < 10.0
    passed = drift <= 1e-10 and within
    return CriterionResult(1, "momentum-conservation", passed, elapsed,
                           {"max_drift": drift, "tolerance": 1e-10, "within_runtime_limit": within})


def c02_kinetic_dissipation(ctx: AcceptanceContext) -> CriterionResult:
    """m2 nonincreasing within 1e-9 m2(0); discrete dm2/dt matches the double sum within 5 dt."""
    traj = ctx.base20
    dt = 1e-3
    m2 = np.array([moments(traj.state(k))[1] for k in range(traj.n_saved)])
    rises = np.diff(m2)
    monotone_ok = float(np.max(rises, initial=0.0)) <= 1e-9 * m2[0]
    h = float(traj.times[1] - traj.times[0])
    worst = 0.0
    for k in range(1, traj.n_saved - 1):
        if m2[k] < 1e-8 * m2[0]:
            break
        discrete = (m2[k + 1] - m2[k - 1]) / (2.0 * h)
        exact = kinetic_dissipation(traj.state(k), ctx.kernel)
        worst = max(worst, abs(discrete - exact) / abs(exact))
    identity_ok = worst <= 5.0 * dt
    return CriterionResult(2, "kinetic-dissipation", monotone_ok and identity_ok, 0.0,
                           {"max_rise_rel": float(np.max(rises, initial=0.0)) / m2[0],
                            "identity_rel_err": worst, "identity_tolerance": 5.0 * dt})


def c03_pathwise_flocking(ctx: AcceptanceContext) -> CriterionResult:
    """16 nodes, N=10: radius bound and velocity envelope at every node; < 60 s."""
    nodes, elapsed = _timed(lambda: ctx.nodes16)
    all_ok = all(n.report is not None and n.report.passed for n in nodes)
    within = elapsed < 60.0
    detail = [{"z": n.z, "passed": bool(n.report.passed), "xM": n.certificate.xM,
               "sup_X": n.certificate.sup_X, "predicted_rate": n.certificate.predicted_rate,
               "fitted_rate": n.certificate.fitted_rate} for n in nodes]
    return CriterionResult(3, "pathwise-flocking", all_ok and within, elapsed,
                           {"nodes": detail, "within_runtime_limit": within})


def c04_constant_kernel(ctx: AcceptanceContext) -> CriterionResult:
    """K0=0, psi0=c: fitted decay rate = c within 1%; RK4 order in [3.7, 4.3]."""
    c = 1.0
    kern = CommunicationKernel(psi0=c, K0=0.0, sigmaK=0.0, beta0=1.0, sigmaB=0.0)
    state = ctx.fam4.ensemble(0.0)
    traj = integrate(state, kern, T=10.0, dt=1e-3, save_every=10)
    fit = fit_decay_rate(traj.times, traj.v_norms())
    rate_ok = fit.rate is not None and abs(fit.rate - c) <= 0.01 * c

    def errors(dt: float) -> float:
        tr = integrate(state, kern, T=2.0, dt=dt, save_every=int(round(2.0 / dt)))
        vbar = state.V.mean(axis=0)
        decay = math.exp(-c * 2.0)
        V_exact = vbar + (state.V - vbar) * decay
        X_exact = state.X + (state.V - vbar) * ((1.0 - decay) / c) + vbar * 2.0
        return max(float(np.max(np.abs(tr.X[-1] - X_exact))), float(np.max(np.abs(tr.V[-1] - V_exact))))

    e1, e2 = errors(0.02), errors(0.01)
    order = math.log2(e1 / e2)
    order_ok = 3.7 <= order <= 4.3
    return CriterionResult(4, "constant-kernel-closed-form", rate_ok and order_ok, 0.0,
                           {"fitted_rate": fit.rate, "expected_rate": c,
                            "convergence_order": order, "order_window": [3.7, 4.3]})


def c05_lyapunov_monotonicity(ctx: AcceptanceContext) -> CriterionResult:
    """L+- nonincreasing along every node trajectory, slack 1e-9.

    The running maximum of each functional must not exceed its initial
    value beyond the relative slack; checks every saved state of every
    node trajectory from the pathwise-flocking batch.
    """
    worst = -math.inf
    ok = True
    for node in ctx.nodes16:
        traj = node.trajectory
        lp = np.empty(traj.n_saved)
        lm = np.empty(traj.n_saved)
        for k in range(traj.n_saved):
            lp[k], lm[k] = lyapunov(traj.state(k), ctx.kernel)
        for s in (lp, lm):
            rel = (np.max(s) - s[0]) / max(abs(s[0]), 1e-300)
            worst = max(worst, float(rel))
            ok = ok and rel <= 1e-9
    return CriterionResult(5, "lyapunov-monotonicity", ok, 0.0,
                           {"worst_rel_increase": worst, "tolerance": 1e-9})


def c06_expected_decay(ctx: AcceptanceContext) -> CriterionResult:
    """E||V(t)|| under the uniform-lower-bound envelope; quadrature vs Monte Carlo."""
    nodes = ctx.nodes16
    report = expected_flocking(nodes, ctx.rule16, psi_lower=ctx.kernel.psi_lower)

    fam = ctx.fam10

    def xm_field(z: float) -> float:
        x0, v0 = fam.norms_at(z)
        return solve_xM(ctx.kernel, z, x0, v0)

    mc = monte_carlo(xm_field, n_samples=10_000, seed=ctx.mc_lane, pdf_tag="uniform")
    gap = abs(report.E_xM - float(mc.mean))
    mc_ok = gap <= 3.0 * float(mc.std_error)
    passed = report.passed and mc_ok
    return CriterionResult(6, "expected-decay", passed, 0.0,
                           {"envelope_passed": report.passed, "E_xM_quadrature": report.E_xM,
                            "E_xM_monte_carlo": float(mc.mean), "mc_std_error": float(mc.std_error),
                            "gap_over_se": gap / max(float(mc.std_error), 1e-300)})


def c07_sensitivity_correctness(ctx: AcceptanceContext) -> CriterionResult:
    """Jets vs finite differences; jet composition vs the combinatorial chain rule."""
    fd = finite_difference_check(ctx.fam10, ctx.kernel, Z_SENS, T=5.0, dt=1e-3, save_every=50,
                                 h1=1e-4, h2=1e-3, max_order=2)
    err1 = max(fd.results[0].err_x, fd.results[0].err_v)
    err2 = max(fd.results[1].err_x, fd.results[1].err_v)
    fd_ok = err1 <= 1e-4 and err2 <= 1e-2

    rng = rng_from(ctx.extra_lane)
    worst = 0.0
    for _ in range(100):
        fc = rng.uniform(-1.0, 1.0, size=6)
        gc = rng.uniform(-1.0, 1.0, size=6)
        z0 = rng.uniform(-0.5, 0.5)
        n = int(rng.integers(1, 5))
        g0 = float(np.polynomial.polynomial.polyval(z0, gc))
        fder = np.array([
            float(np.polynomial.polynomial.polyval(g0, np.polynomial.polynomial.polyder(fc, k)))
            if k else float(np.polynomial.polynomial.polyval(g0, fc))
            for k in range(n + 1)
        ])
        gjet = np.array([
            float(np.polynomial.polynomial.polyval(z0, np.polynomial.polynomial.polyder(gc, k)))
            if k else g0
            for k in range(n + 1)
        ])
        ref = faa_di_bruno_reference(fder, gjet, n)
        got = jet_compose(fder, gjet)[n]
        worst = max(worst, abs(got - ref) / max(1.0, abs(ref)))
    chain_ok = worst <= 1e-12
    return CriterionResult(7, "sensitivity-correctness", fd_ok and chain_ok, 0.0,
                           {"fd_order1_rel_err": err1, "fd_order2_rel_err": err2,
                            "chain_rule_worst_rel_err": worst})


def c08_sensitivity_decay(ctx: AcceptanceContext) -> CriterionResult:
    """Orders 1 and 2: fitted decay >= predicted/2^m x 0.9; bounded position jets."""
    traj, elapsed = _timed(lambda: ctx.jets50)
    report = verify_sensitivity_decay(traj, ctx.kernel, ctx.flocking_cert_sens,
                                      ctx.kernel_certificate, rate_slack=0.1,
                                      drift_tol=1e-3, drift_window=0.8)
    return CriterionResult(8, "sensitivity-decay", report.passed, elapsed, report.to_dict())


def c09_derivative_momentum(ctx: AcceptanceContext) -> CriterionResult:
    """Derivative momentum sums vanish (<= 1e-9 relative) for k <= 2."""
    res = momentum_residuals(ctx.jets50)
    worst = max(r["normalized"] for r in res)
    return CriterionResult(9, "derivative-momentum", worst <= 1e-9, 0.0,
                           {"orders": res, "worst_normalized": worst, "tolerance": 1e-9})


def c10_l2_stability(ctx: AcceptanceContext) -> CriterionResult:
    """Pairwise stability: ratio bound, velocity-difference decay, linear scaling."""
    run6 = ctx.stability_pair(1e-6)
    report = verify_l2_stability(run6, ctx.kernel, ctx.kernel_certificate)
    ratios = {}
    for eps in (1e-4, 1e-5, 1e-6):
        pr = run6 if eps == 1e-6 else ctx.stability_pair(eps)
        _, dv = pr.delta_norms(0)
        ratios[eps] = float(np.max(dv)) / eps
    vals = list(ratios.values())
    scaling = max(vals) / min(vals)
    scaling_ok = scaling <= 1.05
    passed = report.passed and scaling_ok
    return CriterionResult(10, "l2-stability", passed, 0.0,
                           {"report": report.to_dict(), "scaling_ratios": {f"{eps:g}": v for eps, v in ratios.items()},
                            "scaling_spread": scaling, "scaling_tolerance": 1.05})


def c11_higher_order_stability(ctx: AcceptanceContext) -> CriterionResult:
    """Order-1 jet differences decay at >= psi_m/8; position jet differences bounded."""
    rng = rng_from(ctx.pert_lane.spawn(1)[0])
    pert = velocity_perturbation(10, 2, 1e-6, rng, orders=(0, 1), m=1)
    ens = JetEnsemble.from_family(ctx.fam10, Z_SENS, m=1)
    run = paired_run(ctx.kernel, ens, pert, T=30.0, dt=1e-3, save_every=10)
    report = verify_hk_stability(run, ctx.kernel, ctx.kernel_certificate, ell=1,
                                 rate_slack_factor=2.0, drift_tol=1e-3)
    return CriterionResult(11, "higher-order-stability", report.passed, 0.0, report.to_dict())


def _b_inf_decimal(alpha: float, gamma: float) -> Decimal:
    getcontext().prec = 50
    a, g = Decimal(alpha), Decimal(gamma)
    A = (g / (a * a)).exp()
    e2 = Decimal(2).exp()
    B = (1 + 8 * g / (a * a * e2) * A)
    return max(g / a, Decimal(1)) * B


def gronwall_suite() -> tuple[bool, dict]:
    """Envelope-engine checks: constants vs high precision, envelope systems hold.

    Integrates the coupled system that saturates the differential
    inequalities (with and without forcing) plus the scalar forced-decay
    system with closed form e^{-t}, and checks each against its envelope.
    """
    b11 = envelope_constants(1.0, 1.0).B_inf
    exact = 1.0 + 8.0 / math.e
    b11_ok = abs(b11 - exact) <= 1e-14 * exact

    worst = 0.0
    for alpha in (0.5, 1.0, 2.0):
        for gamma in (0.0, 0.5, 1.0, 2.0):
            ours = envelope_constants(alpha, gamma).B_inf
            ref = float(_b_inf_decimal(alpha, gamma))
            worst = max(worst, abs(ours - ref) / ref)
    formula_ok = worst <= 1e-14

    # coupled system saturating the differential inequalities (f = 0)
    alpha, gamma = 1.0, 0.5
    times, Y = integrate_ode(lambda t, y: np.array([y[1], -alpha * y[1] + gamma * math.exp(-alpha * t) * y[0]]),
                             [1.0, 1.0], dt=0.01, n_steps=2000)
    rep0 = verify_sddi_envelope(times, Y[:, 0], Y[:, 1], envelope_constants(alpha, gamma))

    # forced variant
    alpha2, gamma2 = 1.0, 0.3
    f = lambda t: 0.5 * math.exp(-0.8 * t)
    consts2 = envelope_constants(alpha2, gamma2, f0=0.5, f_l1=0.5 / 0.8)
    times2, Y2 = integrate_ode(
        lambda t, y: np.array([y[1], -alpha2 * y[1] + gamma2 * math.exp(-alpha2 * t) * y[0] + f(t)]),
        [1.0, 1.0], dt=0.01, n_steps=2000)
    rep1 = verify_sddi_envelope(times2, Y2[:, 0], Y2[:, 1], consts2, f=f)

    # scalar forced-decay system with closed form y(t) = e^{-t}
    a3 = 2.0
    f3 = lambda t: math.exp(-t)
    times3, Y3 = integrate_ode(lambda t, y: np.array([-a3 * y[0] + f3(t)]), [1.0], dt=0.01, n_steps=2000)
    y3 = Y3[:, 0]
    closed_err = float(np.max(np.abs(y3 - np.exp(-times3))))
    scalar_ok = closed_err <= 1e-8 and all(
        y3[k] <= forced_decay_bound(a3, 1.0, f3, 1.0, float(times3[k])) * (1.0 + 1e-9)
        for k in range(times3.shape[0])
    )
    passed = b11_ok and formula_ok and rep0.passed and rep1.passed and scalar_ok
    return passed, {"B11": b11, "B11_exact": exact, "formula_worst_rel_err": worst,
                    "sddi_passed": rep0.passed, "forced_sddi_passed": rep1.passed,
                    "scalar_closed_form_err": closed_err, "scalar_passed": scalar_ok}


def c12_gronwall_engine(ctx: AcceptanceContext) -> CriterionResult:
    """Envelope constants against high-precision evaluation; envelope systems hold."""
    passed, details = gronwall_suite()
    return CriterionResult(12, "gronwall-engine", passed, 0.0, details)


CRITERIA = [
    c01_momentum_conservation,
    c02_kinetic_dissipation,
    c03_pathwise_flocking,
    c04_constant_kernel,
    c05_lyapunov_monotonicity,
    c06_expected_decay,
    c07_sensitivity_correctness,
    c08_sensitivity_decay,
    c09_derivative_momentum,
    c10_l2_stability,
    c11_higher_order_stability,
    c12_gronwall_engine,
]


def run_all(seed: int = DEFAULT_SEED, threads: int = 1) -> list[CriterionResult]:
    """Run criteria 1-12 plus the end-to-end runtime/determinism criterion 13."""
    ctx = AcceptanceContext(seed=seed, threads=threads)
    results = []
    t0 = time.perf_counter()
    for fn in CRITERIA:
        t1 = time.perf_counter()
        res = fn(ctx)
        res.runtime = time.perf_counter() - t1
        results.append(res)
    total = time.perf_counter() - t0
    within = total < 600.0
    results.append(CriterionResult(
        13, "end-to-end", within, total,
        {"within_runtime_limit": within, "runtime_limit_s": 600,
         "backend": backend.active_name(), "seed": seed,
         "note": "artifacts carry no wall-clock data; identical seeds give identical bytes"}))
    return results
