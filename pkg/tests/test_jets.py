import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flockuq.jets import (
    Jet,
    binomial_table,
    faa_di_bruno_reference,
    jet2_exp,
    jet2_log,
    jet2_mul,
    jet_compose,
    jet_const,
    jet_exp,
    jet_log,
    jet_mul,
    jet_var,
)


def test_exp_of_affine():
    # raw derivatives of exp(a z) at z0 are a^k exp(a z0)
    a, z0, m = 0.7, 0.3, 6
    e = jet_const(a * z0, m)
    e[1] = a
    w = jet_exp(e)
    expect = np.array([a**k * math.exp(a * z0) for k in range(m + 1)])
    np.testing.assert_allclose(w, expect, rtol=1e-13)


def test_log_closed_form():
    # log(1 + z^2) at z0 = 0.5: derivatives by hand up to order 3
    z0, m = 0.5, 3
    u = jet_const(1 + z0 * z0, m)
    u[1], u[2] = 2 * z0, 2.0
    L = jet_log(u)
    uval = 1 + z0**2
    d1 = 2 * z0 / uval
    d2 = 2.0 / uval - (2 * z0) ** 2 / uval**2
    d3 = -3.0 * (2.0 * (2 * z0)) / uval**2 + 2.0 * (2 * z0) ** 3 / uval**3
    np.testing.assert_allclose(L, [math.log(uval), d1, d2, d3], rtol=1e-13)


def test_mul_leibniz_against_polynomials():
    # (1 + 2z + 3z^2)(4 - z) raw derivatives at z = 0.2
    z0, m = 0.2, 4
    f = np.array([1 + 2 * z0 + 3 * z0**2, 2 + 6 * z0, 6.0, 0.0, 0.0])
    g = np.array([4 - z0, -1.0, 0.0, 0.0, 0.0])
    h = jet_mul(f, g)
    import numpy.polynomial.polynomial as P

    prod = P.polymul([1, 2, 3], [4, -1])
    expect = [float(P.polyval(z0, P.polyder(prod, k))) if k else float(P.polyval(z0, prod)) for k in range(m + 1)]
    np.testing.assert_allclose(h, expect, rtol=1e-14, atol=1e-14)


def test_exp_log_roundtrip(rng):
    m = 5
    f = rng.normal(size=m + 1)
    f[0] = 1.5  # keep exp moderate
    w = jet_exp(f)
    back = jet_log(w)
    np.testing.assert_allclose(back, f, rtol=1e-12, atol=1e-12)


def test_chain_rule_first_order():
    f = np.array([2.0, 3.0])  # value, f'
    g = np.array([1.0, 0.5])
    assert faa_di_bruno_reference(f, g, 1) == pytest.approx(3.0 * 0.5)


def test_chain_rule_second_order():
    # f''(g) g'^2 + f'(g) g''
    f = np.array([1.0, 2.0, 5.0])
    g = np.array([0.3, 0.7, -0.4])
    expect = 5.0 * 0.7**2 + 2.0 * (-0.4)
    assert faa_di_bruno_reference(f, g, 2) == pytest.approx(expect, rel=1e-15)


def test_chain_rule_exp_square():
    # third derivative of exp(z^2) at z = 1 equals 20 e
    e1 = math.e
    f = np.array([e1, e1, e1, e1])
    g = np.array([1.0, 2.0, 2.0, 0.0])
    assert faa_di_bruno_reference(f, g, 3) == pytest.approx(20 * math.e, rel=1e-14)
    assert jet_compose(f, g)[3] == pytest.approx(20 * math.e, rel=1e-13)


def test_chain_rule_order_guard():
    with pytest.raises(ValueError):
        faa_di_bruno_reference(np.zeros(6), np.zeros(6), 5)


def test_compose_matches_reference_on_random_polynomials(rng):
    import numpy.polynomial.polynomial as P

    for _ in range(100):
        fc = rng.uniform(-1, 1, size=6)
        gc = rng.uniform(-1, 1, size=6)
        z0 = float(rng.uniform(-0.5, 0.5))
        n = int(rng.integers(1, 5))
        g0 = float(P.polyval(z0, gc))
        fder = np.array([float(P.polyval(g0, P.polyder(fc, k))) if k else float(P.polyval(g0, fc))
                         for k in range(n + 1)])
        gjet = np.array([float(P.polyval(z0, P.polyder(gc, k))) if k else g0 for k in range(n + 1)])
        ref = faa_di_bruno_reference(fder, gjet, n)
        got = jet_compose(fder, gjet)[n]
        assert abs(got - ref) <= 1e-12 * max(1.0, abs(ref))


@given(st.integers(1, 4))
@settings(max_examples=20, deadline=None)
def test_truncation_commutes_with_mul(m):
    rng = np.random.default_rng(7 + m)
    f = rng.normal(size=m + 1)
    g = rng.normal(size=m + 1)
    full = jet_mul(f, g)
    short = jet_mul(f[:m], g[:m])
    assert np.array_equal(full[:m], short)


def test_jet_wrapper_algebra():
    z = Jet.variable(0.5, 4)
    # (1 + z^2): derivatives 1.25, 1.0, 2.0, 0, 0
    u = 1.0 + z * z
    np.testing.assert_allclose(u.coeffs, [1.25, 1.0, 2.0, 0.0, 0.0], rtol=1e-15)
    w = u.log().exp()
    np.testing.assert_allclose(w.coeffs, u.coeffs, rtol=1e-13, atol=1e-14)
    assert (-z).coeffs[1] == -1.0
    assert (2.0 - z).value() == 1.5


def test_jet_rejects_bad_input():
    with pytest.raises(ValueError):
        Jet(np.array([[1.0, 2.0]]))
    with pytest.raises(ValueError):
        Jet(np.array([np.nan]))


def test_bivariate_against_univariate_slices():
    # along the z axis the bivariate jet must reduce to the univariate one
    m = 4
    B = binomial_table(m)
    z0, r0 = -0.3, 1.2
    u2 = np.zeros((1, m + 1, m + 1))
    u2[0, 0, 0] = r0 * r0 + z0 + 2.0  # shifted to keep the argument positive
    u2[0, 0, 1] = 1.0  # d/dz of (r0^2 + z)
    L2 = jet2_log(u2, B, m)
    u1 = jet_var(z0, m)
    u1[0] = r0 * r0 + z0 + 2.0
    L1 = jet_log(u1)
    np.testing.assert_allclose(L2[0, 0, :], L1, rtol=1e-13)
    w2 = jet2_exp(L2, B, m)
    np.testing.assert_allclose(w2[0, 0, :], jet_exp(L1), rtol=1e-13)
    np.testing.assert_allclose(jet2_mul(u2, u2, B, m)[0, 0, :], jet_mul(u1, u1), rtol=1e-13)


def test_bivariate_mixed_partials_vs_finite_differences():
    # d^2/(dr dz) of K(z) (1+r^2)^(-beta(z)) via bivariate jets vs nested FD
    m = 2
    B = binomial_table(m)

    def psi(r, z):
        K = 1.3 * (1 + 0.4 * z)
        beta = 0.8 * (1 + 0.3 * z)
        return 0.2 + K * (1 + r * r) ** (-beta)

    r0, z0 = 1.7, -0.4
    rj = np.zeros((1, m + 1, m + 1))
    rj[0, 0, 0], rj[0, 1, 0] = r0, 1.0
    u = jet2_mul(rj, rj, B, m)
    u[0, 0, 0] += 1.0
    L = jet2_log(u, B, m)
    nb = np.zeros_like(u)
    nb[0, 0, 0], nb[0, 0, 1] = -(0.8 * (1 + 0.3 * z0)), -(0.8 * 0.3)
    w = jet2_exp(jet2_mul(nb, L, B, m), B, m)
    Kj = np.zeros_like(u)
    Kj[0, 0, 0], Kj[0, 0, 1] = 1.3 * (1 + 0.4 * z0), 1.3 * 0.4
    p = jet2_mul(Kj, w, B, m)
    p[0, 0, 0] += 0.2
    h = 1e-4
    fd_rz = (psi(r0 + h, z0 + h) - psi(r0 + h, z0 - h) - psi(r0 - h, z0 + h) + psi(r0 - h, z0 - h)) / (4 * h * h)
    assert p[0, 1, 1] == pytest.approx(fd_rz, rel=1e-4)
    fd_rr = (psi(r0 + h, z0) - 2 * psi(r0, z0) + psi(r0 - h, z0)) / (h * h)
    assert p[0, 2, 0] == pytest.approx(fd_rr, rel=1e-4)
