import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flockuq.kernels import (
    CommunicationKernel,
    KernelDomainError,
    certify,
    eval_psi,
    eval_psi_primitive,
    eval_psi_vec,
    tail_integral,
)


def test_eval_at_origin():
    k = CommunicationKernel(psi0=0.1, K0=1.0, sigmaK=0.0, beta0=1.0, sigmaB=0.0)
    assert eval_psi(k, 0.0, 0.0) == pytest.approx(1.1, rel=1e-15)


def test_eval_closed_form_r1():
    # 0.1 + 1 * (1+1)^(-1) = 0.6
    k = CommunicationKernel(psi0=0.1, K0=1.0, sigmaK=0.0, beta0=1.0, sigmaB=0.0)
    assert eval_psi(k, 1.0, 0.0) == pytest.approx(0.6, rel=1e-14)


def test_constant_kernel():
    k = CommunicationKernel(psi0=0.5, K0=0.0)
    for r in (0.0, 1.0, 17.5):
        for z in (-1.0, 0.0, 1.0):
            assert eval_psi(k, r, z) == 0.5


def test_domain_errors():
    k = CommunicationKernel()
    with pytest.raises(KernelDomainError):
        eval_psi(k, -0.1, 0.0)
    with pytest.raises(KernelDomainError):
        eval_psi(k, 1.0, 1.5)
    with pytest.raises(KernelDomainError):
        eval_psi_primitive(k, -1.0, 0.0)


def test_invalid_parameters():
    with pytest.raises(ValueError):
        CommunicationKernel(psi0=-0.1)
    with pytest.raises(ValueError):
        CommunicationKernel(sigmaK=1.0)
    with pytest.raises(ValueError):
        CommunicationKernel(beta0=0.0)
    with pytest.raises(ValueError):
        CommunicationKernel(psi0=0.0, K0=0.0)


def test_primitive_constant_kernel():
    k = CommunicationKernel(psi0=1.0, K0=0.0)
    assert eval_psi_primitive(k, 2.0, 0.0) == pytest.approx(2.0, rel=1e-15)


def test_primitive_arctan():
    k = CommunicationKernel(psi0=0.0, K0=1.0, sigmaK=0.0, beta0=1.0, sigmaB=0.0)
    assert eval_psi_primitive(k, 1.0, 0.0) == pytest.approx(math.atan(1.0), rel=1e-13)
    assert eval_psi_primitive(k, 0.0, 0.7) == 0.0


def test_primitive_quadrature_matches_arctan_shape():
    # beta(z) = 1 reached through the z-dependence: quadrature path vs closed form
    k = CommunicationKernel(psi0=0.0, K0=1.0, sigmaK=0.0, beta0=0.8, sigmaB=0.25)
    z = 1.0  # beta = 0.8 * 1.25 = 1.0
    got = eval_psi_primitive(k, 3.0, z)
    assert got == pytest.approx(math.atan(3.0), rel=1e-12)


def test_primitive_additive(kernel_zexp):
    a, b, z = 1.3, 2.9, 0.4
    whole = eval_psi_primitive(kernel_zexp, a + b, z)
    first = eval_psi_primitive(kernel_zexp, a, z)
    from scipy.integrate import quad

    K = kernel_zexp.K(z)
    beta = kernel_zexp.beta(z)
    rest = kernel_zexp.psi0 * b + K * quad(lambda s: (1 + s * s) ** (-beta), a, a + b, epsrel=1e-12)[0]
    assert whole == pytest.approx(first + rest, rel=1e-10)


def test_tail_integral_arctan():
    k = CommunicationKernel(psi0=0.0, K0=1.0, sigmaK=0.0, beta0=1.0, sigmaB=0.0)
    assert tail_integral(k, 0.0, 0.0) == pytest.approx(math.pi / 2, rel=1e-13)
    assert math.isinf(tail_integral(CommunicationKernel(psi0=0.5), 0.0, 1.0))


def test_tail_integral_divergent_small_exponent():
    k = CommunicationKernel(psi0=0.0, K0=1.0, sigmaK=0.0, beta0=0.4, sigmaB=0.0)
    assert math.isinf(tail_integral(k, 0.0, 1.0))


def test_bounds_on_random_pairs(kernel_zexp, rng):
    cert = certify(kernel_zexp, 1)
    r = rng.uniform(0.0, 50.0, size=1000)
    z = rng.uniform(-1.0, 1.0, size=1000)
    for ri, zi in zip(r, z):
        v = eval_psi(kernel_zexp, float(ri), float(zi))
        assert 0.0 < v <= cert.psiM


@given(
    r1=st.floats(0.0, 30.0),
    r2=st.floats(0.0, 30.0),
    z=st.floats(-1.0, 1.0),
)
@settings(max_examples=200, deadline=None)
def test_monotone_nonincreasing(r1, r2, z):
    k = CommunicationKernel(psi0=0.2, K0=1.0, sigmaK=0.4, beta0=0.9, sigmaB=0.3)
    lo, hi = sorted((r1, r2))
    assert eval_psi(k, hi, z) <= eval_psi(k, lo, z) + 1e-15


def test_vector_symmetry_exact(kernel_zexp, rng):
    for _ in range(50):
        x = rng.normal(size=3)
        z = float(rng.uniform(-1, 1))
        assert eval_psi_vec(kernel_zexp, x, z) == eval_psi_vec(kernel_zexp, -x, z)


def test_lipschitz_bound_sampled(kernel_zexp, rng):
    cert = certify(kernel_zexp, 1)
    for _ in range(300):
        r1, r2 = sorted(rng.uniform(0.0, 20.0, size=2))
        z = float(rng.uniform(-1, 1))
        gap = abs(eval_psi(kernel_zexp, r2, z) - eval_psi(kernel_zexp, r1, z))
        assert gap <= cert.lip * (r2 - r1) + 1e-12


class TestCertify:
    def test_constant_kernel(self):
        cert = certify(CommunicationKernel(psi0=0.5, K0=0.0), 1)
        assert cert.eps_psi == 0.0
        assert cert.lip == 0.0
        assert cert.psi_lower == cert.psiM == 0.5

    def test_lower_bound_is_shift(self):
        cert = certify(CommunicationKernel(psi0=0.1, K0=1.0, sigmaK=0.0, beta0=1.0, sigmaB=0.0), 1)
        assert cert.psi_lower == 0.1
        assert cert.has_uniform_lower_bound

    def test_flags_missing_lower_bound(self):
        cert = certify(CommunicationKernel(psi0=0.0, K0=1.0, sigmaK=0.5, beta0=1.0, sigmaB=0.0), 1)
        assert cert.psi_lower == 0.0
        assert not cert.has_uniform_lower_bound

    def test_first_order_bound_vs_analytic_scan(self, kernel_zexp):
        """Certified bound against an independent analytic-derivative scan."""
        cert = certify(kernel_zexp, 1)
        r = np.linspace(0.0, 60.0, 4001)
        z = np.linspace(-1.0, 1.0, 81)
        R, Z = np.meshgrid(r, z, indexing="ij")
        K = kernel_zexp.K0 * (1.0 + kernel_zexp.sigmaK * Z)
        Kp = kernel_zexp.K0 * kernel_zexp.sigmaK
        beta = kernel_zexp.beta0 * (1.0 + kernel_zexp.sigmaB * Z)
        bp = kernel_zexp.beta0 * kernel_zexp.sigmaB
        u = 1.0 + R * R
        w = u ** (-beta)
        d_r = np.abs(K * (-beta) * u ** (-beta - 1.0) * 2.0 * R)
        d_z = np.abs(Kp * w + K * (-bp) * np.log(u) * w)
        true_sup = max(d_r.max(), d_z.max())
        assert cert.eps_psi >= true_sup * (1.0 - 1e-6)
        assert cert.eps_psi <= true_sup * 1.01
        assert cert.lip >= d_r.max() * (1.0 - 1e-6)

    def test_order_validation(self, kernel):
        with pytest.raises(ValueError):
            certify(kernel, 0)

    def test_second_order_runs(self, kernel_zexp):
        cert = certify(kernel_zexp, 2)
        assert cert.order == 2
        assert cert.eps_psi > 0


def test_eval_against_high_precision_oracle(kernel_zexp):
    mpmath = pytest.importorskip("mpmath")
    mpmath.mp.dps = 50
    for r, z in ((0.0, 0.0), (1.0, 0.5), (3.7, -0.8), (12.0, 1.0)):
        K = mpmath.mpf(kernel_zexp.K0) * (1 + mpmath.mpf(kernel_zexp.sigmaK) * mpmath.mpf(z))
        beta = mpmath.mpf(kernel_zexp.beta0) * (1 + mpmath.mpf(kernel_zexp.sigmaB) * mpmath.mpf(z))
        ref = mpmath.mpf(kernel_zexp.psi0) + K * (1 + mpmath.mpf(r) ** 2) ** (-beta)
        assert eval_psi(kernel_zexp, r, z) == pytest.approx(float(ref), rel=1e-14)
