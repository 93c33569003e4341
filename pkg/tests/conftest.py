"""Shared fixtures and independent reference implementations.

The oracles here are deliberately naive (pure-Python double loops, closed
forms, analytic kernel partials) and independent of the optimized paths
they check.
"""

import math

import numpy as np
import pytest

from flockuq.dynamics import random_family
from flockuq.kernels import CommunicationKernel


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(1234)))


@pytest.fixture
def kernel():
    """z-dependent kernel used across the suite."""
    return CommunicationKernel(psi0=0.5, K0=1.0, sigmaK=0.3, beta0=1.0, sigmaB=0.0)


@pytest.fixture
def kernel_zexp():
    """Kernel whose decay exponent also depends on z."""
    return CommunicationKernel(psi0=0.2, K0=1.0, sigmaK=0.3, beta0=0.8, sigmaB=0.2)


@pytest.fixture
def const_kernel():
    return CommunicationKernel(psi0=1.0, K0=0.0, sigmaK=0.0, beta0=1.0, sigmaB=0.0)


@pytest.fixture
def family6(rng):
    return random_family(6, 2, rng)


@pytest.fixture
def family10(rng):
    return random_family(10, 2, rng)


def naive_accel(X, V, kernel, z):
    """Straightforward double-loop evaluation of the interaction sum."""
    N, d = X.shape
    A = np.zeros((N, d))
    K = kernel.K0 * (1.0 + kernel.sigmaK * z)
    beta = kernel.beta0 * (1.0 + kernel.sigmaB * z)
    for i in range(N):
        for j in range(N):
            r2 = sum((X[j, c] - X[i, c]) ** 2 for c in range(d))
            psi = kernel.psi0 + K * math.exp(-beta * math.log(1.0 + r2))
            for c in range(d):
                A[i, c] += psi * (V[j, c] - V[i, c])
    return A / N


def handcoded_first_order_accel(Xj, Vj, kernel, z):
    """First-order sensitivity right-hand side with analytic kernel partials.

    Uses the explicit two-term structure: the kernel times the derivative of
    the velocity differences, plus (position-gradient dot position-jet
    difference + explicit z-partial) times the velocity differences.
    """
    N, d, _ = Xj.shape
    X, dX = Xj[:, :, 0], Xj[:, :, 1]
    V, dV = Vj[:, :, 0], Vj[:, :, 1]
    K = kernel.K0 * (1.0 + kernel.sigmaK * z)
    Kp = kernel.K0 * kernel.sigmaK
    beta = kernel.beta0 * (1.0 + kernel.sigmaB * z)
    bp = kernel.beta0 * kernel.sigmaB
    A0 = np.zeros((N, d))
    A1 = np.zeros((N, d))
    for i in range(N):
        for j in range(N):
            dxv = X[j] - X[i]
            u = 1.0 + float(dxv @ dxv)
            w = u ** (-beta)
            psi = kernel.psi0 + K * w
            dpsi_z = Kp * w + K * (-bp * math.log(u)) * w
            grad = (-2.0 * beta * K * u ** (-beta - 1.0)) * dxv
            ddx = dX[j] - dX[i]
            ddv = dV[j] - dV[i]
            dvv = V[j] - V[i]
            psi_dot = float(grad @ ddx) + dpsi_z
            A0[i] += psi * dvv
            A1[i] += psi * ddv + psi_dot * dvv
    return A0 / N, A1 / N
