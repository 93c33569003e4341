import math

import numpy as np
import pytest

from conftest import naive_accel
from flockuq import backend
from flockuq.dynamics import (
    EnsembleState,
    config_norms,
    integrate,
    kinetic_dissipation,
    moments,
    random_family,
    rhs,
    shift_to_zero_momentum,
)
from flockuq.kernels import CommunicationKernel


def test_single_agent_free_flight(kernel):
    state = EnsembleState(t=0.0, z=0.0, X=np.array([[1.0, -2.0]]), V=np.array([[0.5, 0.25]]))
    _, dV = rhs(state, kernel)
    assert np.all(dV == 0.0)
    traj = integrate(state, kernel, T=4.0, dt=1e-2, save_every=100)
    # 400 accumulating steps: allow a few ulps of drift
    np.testing.assert_allclose(traj.X[-1], state.X + 4.0 * state.V, rtol=1e-13)


def test_two_agent_antisymmetry(kernel):
    u = np.array([0.3, -0.1])
    state = EnsembleState(
        t=0.0, z=0.2,
        X=np.array([[0.0, 0.0], [1.0, 2.0]]),
        V=np.stack([u, -u]),
    )
    _, dV = rhs(state, kernel)
    np.testing.assert_allclose(dV[0], -dV[1], rtol=0, atol=0)  # exact antisymmetry
    from flockuq.kernels import eval_psi_vec

    psi = eval_psi_vec(kernel, state.X[1] - state.X[0], 0.2)
    np.testing.assert_allclose(dV[0], psi * (-2.0 * u) / 2.0, rtol=1e-14)


def test_rhs_matches_double_loop_oracle(kernel_zexp, rng):
    X = rng.normal(size=(3, 2))
    V = rng.normal(size=(3, 2))
    state = EnsembleState(t=0.0, z=-0.4, X=X, V=V)
    _, dV = rhs(state, kernel_zexp)
    np.testing.assert_allclose(dV, naive_accel(X, V, kernel_zexp, -0.4), rtol=1e-13)


def test_rhs_permutation_equivariance(kernel, rng):
    X = rng.normal(size=(5, 3))
    V = rng.normal(size=(5, 3))
    perm = rng.permutation(5)
    _, dV = rhs(EnsembleState(t=0.0, z=0.1, X=X, V=V), kernel)
    _, dVp = rhs(EnsembleState(t=0.0, z=0.1, X=X[perm], V=V[perm]), kernel)
    np.testing.assert_allclose(dVp, dV[perm], rtol=1e-13, atol=1e-15)


def test_constant_kernel_closed_form(const_kernel, rng):
    fam = random_family(4, 2, rng)
    state = fam.ensemble(0.0)
    traj = integrate(state, const_kernel, T=2.0, dt=0.01, save_every=20)
    c = const_kernel.psi0
    vbar = state.V.mean(axis=0)
    for k in range(traj.n_saved):
        t = traj.times[k]
        decay = math.exp(-c * t)
        V_exact = vbar + (state.V - vbar) * decay
        np.testing.assert_allclose(traj.V[k], V_exact, atol=5e-9)


def test_integrator_fourth_order(const_kernel, rng):
    """Halving dt divides the closed-form error by about 16."""
    fam = random_family(3, 2, rng)
    state = fam.ensemble(0.0)
    c = const_kernel.psi0

    def endpoint_err(dt):
        tr = integrate(state, const_kernel, T=2.0, dt=dt, save_every=int(round(2.0 / dt)))
        vbar = state.V.mean(axis=0)
        decay = math.exp(-2.0 * c)
        V_exact = vbar + (state.V - vbar) * decay
        X_exact = state.X + (state.V - vbar) * (1.0 - decay) / c + vbar * 2.0
        return max(np.max(np.abs(tr.V[-1] - V_exact)), np.max(np.abs(tr.X[-1] - X_exact)))

    ratio = endpoint_err(0.02) / endpoint_err(0.01)
    assert 16 * 0.8 <= ratio <= 16 * 1.2


def test_momentum_and_energy_laws(kernel, rng):
    fam = random_family(8, 2, rng)
    traj = integrate(fam.ensemble(0.3), kernel, T=10.0, dt=1e-3, save_every=100)
    m1_0, m2_0 = moments(traj.state(0))
    m2_prev = m2_0
    vmax0 = math.sqrt(m2_0)
    for k in range(traj.n_saved):
        st = traj.state(k)
        m1, m2 = moments(st)
        assert np.max(np.abs(m1 - m1_0)) <= 1e-10
        assert m2 <= m2_prev + 1e-9 * m2_0
        m2_prev = m2
        assert np.max(np.sqrt(np.sum(st.V**2, axis=1))) <= vmax0 + 1e-9


def test_dissipation_identity_discrete(kernel, rng):
    fam = random_family(6, 2, rng)
    traj = integrate(fam.ensemble(0.0), kernel, T=4.0, dt=1e-3, save_every=10)
    m2 = np.array([moments(traj.state(k))[1] for k in range(traj.n_saved)])
    h = traj.times[1] - traj.times[0]
    for k in range(1, traj.n_saved - 1, 25):
        discrete = (m2[k + 1] - m2[k - 1]) / (2 * h)
        exact = kinetic_dissipation(traj.state(k), kernel)
        assert abs(discrete - exact) <= 5e-3 * abs(exact)


def test_moments_and_norms_oracle(rng):
    V = rng.normal(size=(5, 3))
    X = rng.normal(size=(5, 3))
    state = EnsembleState(t=0.0, z=0.0, X=X, V=V)
    m1, m2 = moments(state)
    np.testing.assert_allclose(m1, sum(V[i] for i in range(5)), rtol=1e-14)
    assert m2 == pytest.approx(sum(float(V[i] @ V[i]) for i in range(5)), rel=1e-14)
    nx, nv = config_norms(state)
    assert nx == pytest.approx(math.sqrt(sum(float(X[i] @ X[i]) for i in range(5))), rel=1e-14)
    assert nv == pytest.approx(math.sqrt(sum(float(V[i] @ V[i]) for i in range(5))), rel=1e-14)


def test_three_four_five_norm():
    state = EnsembleState(t=0.0, z=0.0, X=np.array([[3.0, 4.0]]), V=np.zeros((1, 2)))
    assert config_norms(state) == (5.0, 0.0)


def test_zero_momentum_shift(rng):
    V = rng.normal(size=(7, 2))
    X = rng.normal(size=(7, 2))
    state = EnsembleState(t=0.0, z=0.0, X=X, V=V)
    shifted = shift_to_zero_momentum(state)
    assert np.max(np.abs(shifted.V.sum(axis=0))) <= 1e-13
    # pairwise differences preserved to one ulp at the velocity scale
    tick = np.spacing(np.max(np.abs(V)))
    for i in range(7):
        for j in range(7):
            assert np.max(np.abs((shifted.V[i] - shifted.V[j]) - (V[i] - V[j]))) <= tick
    again = shift_to_zero_momentum(shifted)
    assert np.max(np.abs(again.V - shifted.V)) <= tick


def test_all_equal_velocities_shift_to_zero():
    state = EnsembleState(t=0.0, z=0.0, X=np.zeros((3, 2)), V=np.ones((3, 2)))
    assert np.all(shift_to_zero_momentum(state).V == 0.0)


def test_blowup_guard(const_kernel, rng):
    # RK4 is violently unstable at c*dt = 100; the guard must trip
    fam = random_family(3, 2, rng)
    with pytest.raises(backend.BlowUpError):
        integrate(fam.ensemble(0.0), const_kernel, T=2000.0, dt=100.0, save_every=1)


def test_time_grid_uniform(kernel, rng):
    fam = random_family(3, 2, rng)
    traj = integrate(fam.ensemble(0.0), kernel, T=1.0, dt=1e-2, save_every=5)
    gaps = np.diff(traj.times)
    assert np.all(gaps > 0)
    # uniform within one ulp at the timestamp scale
    assert np.max(np.abs(gaps - gaps[0])) <= np.spacing(traj.times[-1])


def test_step_horizon_validation(kernel, rng):
    fam = random_family(2, 2, rng)
    with pytest.raises(ValueError):
        integrate(fam.ensemble(0.0), kernel, T=1.0, dt=-1e-3)
    with pytest.raises(ValueError):
        integrate(fam.ensemble(0.0), kernel, T=1.0, dt=3e-3)  # not an integer step count
    with pytest.raises(ValueError):
        integrate(fam.ensemble(0.0), kernel, T=1.0, dt=1e-3, save_every=7)  # 1000 % 7 != 0


def test_family_jets_consistent_with_states(rng):
    fam = random_family(5, 3, rng)
    z = 0.37
    Xj, Vj = fam.jets(z, 2)
    state = fam.ensemble(z)
    np.testing.assert_array_equal(Xj[:, :, 0], state.X)
    np.testing.assert_array_equal(Vj[:, :, 0], state.V)
    h = 1e-6
    fd = (fam.ensemble(z + h).X - fam.ensemble(z - h).X) / (2 * h)
    np.testing.assert_allclose(Xj[:, :, 1], fd, rtol=1e-8, atol=1e-9)
    for k in range(3):
        assert np.max(np.abs(Vj[:, :, k].sum(axis=0))) <= 1e-14
