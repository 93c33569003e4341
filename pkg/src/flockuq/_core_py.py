"""Pure-numpy fallback for the hot trajectory kernels.

Mirrors the compiled extension (`flockuq._core`) operation for operation:
same ascending-j accumulation of the pairwise interaction sum, same
elementary-op sequence for the kernel evaluation, same Runge-Kutta stage
expressions.  Within this backend the plain model is exactly the order-0
slice of the jet system, bit for bit.  Cross-backend agreement is at the
last-ulp level of the libm/numpy exp and log implementations, not bitwise.

The interaction term of the alignment model for agent i is

    accel_i = (1/N) sum_j psi(x_j - x_i, z) (v_j - v_i),

propagated here for full z-derivative jets of order m; m = 0 recovers the
base model.
"""

from __future__ import annotations

import numpy as np

NAME = "python"


class BlowUpError(RuntimeError):
    """Trajectory left the guarded region (an entry exceeded the threshold)."""


def _batch_mul(f: np.ndarray, g: np.ndarray, B: np.ndarray, out: np.ndarray) -> None:
    # out[:, n] = sum_k C(n,k) f[:, k] g[:, n-k], ascending k
    m = f.shape[1] - 1
    for n in range(m + 1):
        acc = B[n, 0] * f[:, 0] * g[:, n]
        for k in range(1, n + 1):
            acc = acc + B[n, k] * f[:, k] * g[:, n - k]
        out[:, n] = acc


def _batch_log(u: np.ndarray, B: np.ndarray, out: np.ndarray) -> None:
    m = u.shape[1] - 1
    out[:, 0] = np.log(u[:, 0])
    for n in range(1, m + 1):
        acc = np.zeros(u.shape[0])
        for j in range(n - 1):
            acc = acc + B[n - 1, j] * out[:, j + 1] * u[:, n - 1 - j]
        out[:, n] = (u[:, n] - acc) / u[:, 0]


def _batch_exp(e: np.ndarray, B: np.ndarray, out: np.ndarray) -> None:
    m = e.shape[1] - 1
    out[:, 0] = np.exp(e[:, 0])
    for n in range(1, m + 1):
        acc = B[n - 1, 0] * e[:, 1] * out[:, n - 1]
        for j in range(1, n):
            acc = acc + B[n - 1, j] * e[:, j + 1] * out[:, n - 1 - j]
        out[:, n] = acc


def jet_accel(
    Xj: np.ndarray,
    Vj: np.ndarray,
    psi0: float,
    k0: float,
    k1: float,
    nb0: float,
    nb1: float,
    binom: np.ndarray,
) -> np.ndarray:
    """Jet of the interaction acceleration; shapes (N, d, m+1)."""
    N, d, M1 = Xj.shape
    m = M1 - 1
    A = np.zeros_like(Vj)
    s = np.empty((N, M1))
    L = np.empty((N, M1))
    e = np.empty((N, M1))
    w = np.empty((N, M1))
    psi = np.empty((N, M1))
    tmp = np.empty((N, M1))
    for j in range(N):
        # squared distance jet, accumulated over components in ascending order
        s[:] = 0.0
        for dd in range(d):
            dx = Xj[j, dd][None, :] - Xj[:, dd, :]
            _batch_mul(dx, dx, binom, tmp)
            s += tmp
        s[:, 0] = 1.0 + s[:, 0]
        _batch_log(s, binom, L)
        e[:, 0] = nb0 * L[:, 0]
        for n in range(1, M1):
            e[:, n] = nb0 * L[:, n] + (n * nb1) * L[:, n - 1]
        _batch_exp(e, binom, w)
        psi[:, 0] = k0 * w[:, 0] + psi0
        for n in range(1, M1):
            psi[:, n] = k0 * w[:, n] + (n * k1) * w[:, n - 1]
        for dd in range(d):
            dv = Vj[j, dd][None, :] - Vj[:, dd, :]
            _batch_mul(psi, dv, binom, tmp)
            A[:, dd, :] += tmp
    A *= 1.0 / N
    return A


def jet_rk4(
    Xj: np.ndarray,
    Vj: np.ndarray,
    psi0: float,
    k0: float,
    k1: float,
    nb0: float,
    nb1: float,
    binom: np.ndarray,
    dt: float,
    n_steps: int,
    save_every: int,
    blowup: float = 1e12,
) -> tuple[np.ndarray, np.ndarray]:
    """Classical fixed-step RK4 on the jet system, saving every ``save_every`` steps.

    Returns saved arrays of shape (n_steps // save_every + 1, N, d, m+1)
    including the initial state.  Raises BlowUpError if any saved entry
    exceeds ``blowup`` in magnitude.
    """
    if n_steps % save_every != 0:
        raise ValueError("n_steps must be a multiple of save_every")
    n_save = n_steps // save_every
    X = np.array(Xj, dtype=float)
    V = np.array(Vj, dtype=float)
    Xout = np.empty((n_save + 1,) + X.shape)
    Vout = np.empty((n_save + 1,) + V.shape)
    Xout[0] = X
    Vout[0] = V
    hdt = 0.5 * dt
    dt6 = dt / 6.0

    def accel(Xs, Vs):
        return jet_accel(Xs, Vs, psi0, k0, k1, nb0, nb1, binom)

    for step in range(n_steps):
        A1 = accel(X, V)
        X2 = X + hdt * V
        V2 = V + hdt * A1
        A2 = accel(X2, V2)
        X3 = X + hdt * V2
        V3 = V + hdt * A2
        A3 = accel(X3, V3)
        X4 = X + dt * V3
        V4 = V + dt * A3
        A4 = accel(X4, V4)
        X = X + dt6 * (((V + 2.0 * V2) + 2.0 * V3) + V4)
        V = V + dt6 * (((A1 + 2.0 * A2) + 2.0 * A3) + A4)
        if (step + 1) % save_every == 0:
            k = (step + 1) // save_every
            Xout[k] = X
            Vout[k] = V
            worst = max(np.max(np.abs(X)), np.max(np.abs(V)))
            if not worst <= blowup:  # also catches NaN
                raise BlowUpError(f"entry exceeded {blowup:g} at step {step + 1}")
    return Xout, Vout
