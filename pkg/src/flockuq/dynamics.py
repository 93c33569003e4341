"""Agent ensemble state, the alignment ODE right-hand side, and RK4 integration.

The model for N agents in R^d at a fixed sample z:

    dx_i/dt = v_i
    dv_i/dt = (1/N) sum_j psi(x_j - x_i, z) (v_j - v_i)

The interaction sum runs over ascending j (the i = j term contributes an
exact zero) so trajectories are bitwise reproducible; all decay statements
assume the zero-total-momentum frame, reachable via
:func:`shift_to_zero_momentum`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import backend
from .jets import binomial_table
from .kernels import CommunicationKernel, eval_psi, z_coefficients

__all__ = [
    "EnsembleState",
    "Trajectory",
    "InitialFamily",
    "random_family",
    "rhs",
    "integrate",
    "moments",
    "config_norms",
    "shift_to_zero_momentum",
    "kinetic_dissipation",
]


@dataclass(eq=False)
class EnsembleState:
    """Positions and velocities of N agents at one (t, z)."""

    t: float
    z: float
    X: np.ndarray  # (N, d)
    V: np.ndarray  # (N, d)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.V = np.asarray(self.V, dtype=float)
        if self.X.shape != self.V.shape or self.X.ndim != 2:
            raise ValueError("X and V must share shape (N, d)")

    @property
    def N(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def validate(self) -> None:
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.V))):
            raise ValueError("state contains non-finite entries")


@dataclass(eq=False)
class Trajectory:
    """Saved states of one integrated sample path on a uniform time grid."""

    times: np.ndarray  # (K,)
    X: np.ndarray  # (K, N, d)
    V: np.ndarray  # (K, N, d)
    dt: float
    z: float
    method: str = "rk4"

    @property
    def n_saved(self) -> int:
        return self.times.shape[0]

    def state(self, k: int) -> EnsembleState:
        return EnsembleState(t=float(self.times[k]), z=self.z, X=self.X[k], V=self.V[k])

    def x_norms(self) -> np.ndarray:
        return np.sqrt(np.sum(self.X * self.X, axis=(1, 2)))

    def v_norms(self) -> np.ndarray:
        return np.sqrt(np.sum(self.V * self.V, axis=(1, 2)))


@dataclass(frozen=True, eq=False)
class InitialFamily:
    """Random initial data as an explicit quadratic function of the sample z.

    x_i(z) = XA_i + XB_i z + XC_i z^2 componentwise (same for v with VA, VB,
    VC), so states and their z-derivative jets are available at any z.  When
    built with ``zero_momentum`` the velocity coefficient arrays are centered
    columnwise, hence total momentum vanishes identically in z (and so do
    all its z-derivatives).
    """

    XA: np.ndarray
    XB: np.ndarray
    XC: np.ndarray
    VA: np.ndarray
    VB: np.ndarray
    VC: np.ndarray

    @property
    def N(self) -> int:
        return self.XA.shape[0]

    @property
    def d(self) -> int:
        return self.XA.shape[1]

    def ensemble(self, z: float) -> EnsembleState:
        X = self.XA + z * self.XB + (z * z) * self.XC
        V = self.VA + z * self.VB + (z * z) * self.VC
        return EnsembleState(t=0.0, z=z, X=X, V=V)

    def jets(self, z: float, m: int) -> tuple[np.ndarray, np.ndarray]:
        """Raw-derivative jet arrays (N, d, m+1) of the initial data at z."""
        N, d = self.XA.shape
        Xj = np.zeros((N, d, m + 1))
        Vj = np.zeros((N, d, m + 1))
        Xj[:, :, 0] = self.XA + z * self.XB + (z * z) * self.XC
        Vj[:, :, 0] = self.VA + z * self.VB + (z * z) * self.VC
        if m >= 1:
            Xj[:, :, 1] = self.XB + (2.0 * z) * self.XC
            Vj[:, :, 1] = self.VB + (2.0 * z) * self.VC
        if m >= 2:
            Xj[:, :, 2] = 2.0 * self.XC
            Vj[:, :, 2] = 2.0 * self.VC
        return Xj, Vj

    def norms_at(self, z: float) -> tuple[float, float]:
        state = self.ensemble(z)
        return config_norms(state)


def random_family(
    N: int,
    d: int,
    rng: np.random.Generator,
    x_scale: float = 1.0,
    v_scale: float = 1.0,
    z_lin: float = 0.3,
    z_quad: float = 0.1,
    zero_momentum: bool = True,
) -> InitialFamily:
    """Draw a random initial family; z_lin/z_quad scale the z-dependence."""

    def draw(scale):
        return rng.uniform(-scale, scale, size=(N, d))

    XA, XB, XC = draw(x_scale), draw(x_scale * z_lin), draw(x_scale * z_quad)
    VA, VB, VC = draw(v_scale), draw(v_scale * z_lin), draw(v_scale * z_quad)
    if zero_momentum:
        VA = VA - VA.mean(axis=0)
        VB = VB - VB.mean(axis=0)
        VC = VC - VC.mean(axis=0)
    return InitialFamily(XA=XA, XB=XB, XC=XC, VA=VA, VB=VB, VC=VC)


def _as_jets(arr: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(arr[:, :, None])


def rhs(state: EnsembleState, kernel: CommunicationKernel) -> tuple[np.ndarray, np.ndarray]:
    """Time derivative (dX/dt, dV/dt) of the ensemble at its own (t, z)."""
    state.validate()
    k0, k1, nb0, nb1 = z_coefficients(kernel, state.z)
    A = backend.active().jet_accel(
        _as_jets(state.X), _as_jets(state.V), kernel.psi0, k0, k1, nb0, nb1, binomial_table(0)
    )
    return state.V.copy(), np.asarray(A)[:, :, 0]


def integrate(
    state: EnsembleState,
    kernel: CommunicationKernel,
    T: float,
    dt: float,
    save_every: int = 1,
) -> Trajectory:
    """Classical fixed-step RK4 up to horizon T, saving every ``save_every`` steps.

    ``T`` must be an integer number of steps of size ``dt`` and that step
    count a multiple of ``save_every`` (uniform save grid).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if T < 0:
        raise ValueError("horizon must be nonnegative")
    n_steps = int(round(T / dt)) if T > 0 else 0
    if abs(n_steps * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError("T must be an integer multiple of dt")
    if n_steps == 0:
        times = np.array([state.t])
        return Trajectory(times=times, X=state.X[None].copy(), V=state.V[None].copy(), dt=dt, z=state.z)
    if n_steps % save_every != 0:
        raise ValueError("round(T/dt) must be a multiple of save_every")
    k0, k1, nb0, nb1 = z_coefficients(kernel, state.z)
    Xs, Vs = backend.active().jet_rk4(
        _as_jets(state.X), _as_jets(state.V), kernel.psi0, k0, k1, nb0, nb1,
        binomial_table(0), dt, n_steps, save_every,
    )
    n_save = n_steps // save_every
    times = state.t + np.arange(n_save + 1) * (save_every * dt)
    return Trajectory(times=times, X=np.asarray(Xs)[:, :, :, 0], V=np.asarray(Vs)[:, :, :, 0], dt=dt, z=state.z)


def moments(state: EnsembleState) -> tuple[np.ndarray, float]:
    """First and second velocity moments (m1 in R^d, m2 >= 0)."""
    m1 = state.V.sum(axis=0)
    m2 = float(np.sum(state.V * state.V))
    return m1, m2


def config_norms(state: EnsembleState) -> tuple[float, float]:
    """Euclidean norms of the stacked position and velocity vectors."""
    nx = math.sqrt(float(np.sum(state.X * state.X)))
    nv = math.sqrt(float(np.sum(state.V * state.V)))
    return nx, nv


def shift_to_zero_momentum(state: EnsembleState) -> EnsembleState:
    """Subtract the mean velocity from every agent."""
    mean = state.V.mean(axis=0)
    return EnsembleState(t=state.t, z=state.z, X=state.X.copy(), V=state.V - mean)


def kinetic_dissipation(state: EnsembleState, kernel: CommunicationKernel) -> float:
    """Dissipation rate of m2: -(1/N) sum_{i,j} psi(x_j - x_i, z) ||v_j - v_i||^2."""
    X, V = state.X, state.V
    dX = X[None, :, :] - X[:, None, :]
    dV = V[None, :, :] - V[:, None, :]
    r = np.sqrt(np.sum(dX * dX, axis=2))
    psi = eval_psi(kernel, r.ravel(), state.z).reshape(r.shape)
    return float(-(1.0 / state.N) * np.sum(psi * np.sum(dV * dV, axis=2)))
