import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from polaronlab.model import ModelParams, theta11
from polaronlab.renorm import (
    LINEAR,
    LOG,
    DivergenceFitError,
    fit_divergence,
    sigma1,
    sigma2,
    sigma2_term_a_nested,
    theta10,
    theta20,
    theta21,
    theta21_closed_term,
)

UNIT = ModelParams(g=1.0)


def test_sigma1_decoupled():
    assert sigma1(UNIT.replace(g=0.0), 10.0).value == 0.0


@pytest.mark.parametrize("c,xi,g", [(1.0, 1.0, 1.0), (2.0, 0.5, 0.3), (0.7, 3.0, 2.0)])
def test_sigma1_small_cutoff_law(c, xi, g):
    p = ModelParams(c=c, xi=xi, g=g)
    L = 1e-3 * c / xi
    assert sigma1(p, L).value / (-4 * math.pi * g**2 * L**3 / (3 * c**2)) == pytest.approx(1.0, rel=0.01)


@pytest.mark.parametrize("c,xi,g", [(1.0, 1.0, 1.0), (2.0, 0.5, 0.3), (0.7, 3.0, 2.0)])
def test_sigma1_slope_law(c, xi, g):
    p = ModelParams(c=c, xi=xi, g=g)
    L = 1e3 * c / xi
    slope = (sigma1(p, 2 * L).value - sigma1(p, L).value) / L
    assert slope == pytest.approx(-4 * math.pi * g**2 / (xi * (0.5 + xi)), rel=0.01)


@given(st.lists(st.floats(1e-3, 1e3), min_size=2, max_size=6, unique=True))
def test_sigma1_negative_and_decreasing(Ls):
    vals = [sigma1(UNIT, L).value for L in sorted(Ls)]
    assert all(v < 0 for v in vals)
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_sigma1_infinite_cutoff_rejected():
    with pytest.raises(ValueError):
        sigma1(UNIT, math.inf)


def test_theta10_vanishing_cases():
    assert theta10((0, 0, 0), 0.0, 0.0, 5.0, UNIT).value == 0.0
    assert theta10((0.1, 0.2, 0.3), 0.4, 1.0, 5.0, UNIT.replace(g=0.0)).value == 0.0


def test_theta10_radial_oracle():
    # P = p = 0: -int v^2 [1/(D + 1) - 1/D] = int v^2 / (D (D + 1)), D = k^2/2 + omega
    def f(k):
        v2 = k / math.sqrt(1 + k * k)
        D = 0.5 * k * k + math.sqrt(k * k + k**4)
        return 4 * math.pi * k * k * v2 / (D * (D + 1))

    expect = integrate.quad(f, 0, 1, epsabs=1e-13)[0] + integrate.quad(f, 1, math.inf, epsabs=1e-13)[0]
    got = theta10((0, 0, 0), 0.0, 1.0, math.inf, UNIT)
    assert got.converged
    assert got.value == pytest.approx(expect, rel=1e-9)
    assert got.value == pytest.approx(4.7388, abs=1e-4)


@settings(max_examples=100)
@given(
    st.floats(0.0, 3.0), st.floats(0.0, 2.0), st.floats(0.0, 2.0),
    st.floats(0.05, 2.0), st.floats(0.01, 1.0),
)
def test_theta10_monotone_in_eta_and_mu(Q, eta, mu, d_eta, d_mu):
    p = UNIT.replace(P=(0.0, 0.0, Q))
    base = theta10((0, 0, 0), eta, mu, 20.0, p, tol=1e-9).value
    assert theta10((0, 0, 0), eta + d_eta, mu, 20.0, p, tol=1e-9).value > base
    assert theta10((0, 0, 0), eta, mu + d_mu, 20.0, p, tol=1e-9).value > base


def test_theta10_rotation_invariance(rng):
    P = np.array([0.0, 0.0, 0.8])
    p = np.array([0.1, -0.2, 0.3])
    ref = theta10(p, 0.3, 1.0, math.inf, UNIT.replace(P=tuple(P)))
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    rot = theta10(q @ p, 0.3, 1.0, math.inf, UNIT.replace(P=tuple(q @ P)))
    assert rot.value == pytest.approx(ref.value, abs=ref.error + rot.error + 1e-12)


def test_theta10_cutoff_saturation():
    # model cutoff 1.5 makes the integrand vanish beyond |k| = 1.5
    p = UNIT.replace(cutoff=1.5, P=(0, 0, 0.4))
    vals = [theta10((0, 0, 0), 0.2, 1.0, L, p).value for L in (1.5, 3.0, math.inf)]
    assert vals[1] == vals[0] and vals[2] == vals[0]
    assert theta10((0, 0, 0), 0.2, 1.0, 1.0, p).value != vals[0]


def test_sigma2_decoupled_and_homogeneous():
    assert sigma2(UNIT.replace(g=0.0), 3.0).value == 0.0
    a = sigma2(UNIT.replace(g=0.5), 3.0, rtol=1e-12).value
    b = sigma2(UNIT.replace(g=2.0), 3.0, rtol=1e-12).value
    assert (a / 0.5**4) == pytest.approx(b / 2.0**4, rel=1e-10)


def test_sigma2_term_a_against_nested_route():
    merged = sigma2(UNIT, 1.0, rtol=1e-9).term_a.value
    nested = sigma2_term_a_nested(UNIT, 1.0, tol=1e-8).value
    assert merged == pytest.approx(nested, rel=1e-7)


def test_sigma2_finite_cutoff_required():
    with pytest.raises(ValueError):
        sigma2(UNIT, math.inf)


def test_theta20_zero_point_and_decoupled():
    assert theta20((0, 0, 0), 0.0, 0.0, 1.0, UNIT, tol=1e-6).value == pytest.approx(0.0, abs=1e-6)
    assert theta20((0.1, 0, 0), 0.2, 1.0, 1.0, UNIT.replace(g=0.0)).value == 0.0
    assert theta21((0, 0, 0.1), 0.2, (0.3, 0, 0), (0, 0.2, 0.1), 1.0, 2.0, UNIT.replace(g=0.0)).value == 0.0


def test_theta21_closed_term_composition():
    params = UNIT.replace(P=(0.0, 0.0, 0.5))
    p, k, l = np.array([0.1, 0.0, 0.2]), np.array([0.3, 0.0, 0.0]), np.array([0.0, 0.2, 0.1])
    eta, mu = 0.2, 1.0
    got = theta21_closed_term(p, eta, k, l, mu, math.inf, params, tol=1e-11).value

    def v(q):
        q = np.linalg.norm(q)
        return math.sqrt(q / math.sqrt(1 + q * q))

    def om(q):
        q = np.linalg.norm(q)
        return math.sqrt(q * q + q**4)

    P = params.P_vec
    th = theta10(p + k + l, eta + om(k) + om(l), mu, math.inf, params, tol=1e-11).value
    dk = 0.5 * np.sum((P - p - k) ** 2) + eta + om(k) + mu
    dl = 0.5 * np.sum((P - p - l) ** 2) + eta + om(l) + mu
    assert got == pytest.approx(v(k) * v(l) * th / (dk * dl), rel=1e-12)
    # the same prefactor structure as theta11
    assert theta11(p, eta, k, l, mu, params) <= 0.0


def test_theta21_finite_at_infinite_cutoff():
    r = theta21((0, 0, 0.1), 0.2, (0.3, 0, 0), (0, 0.2, 0.1), 1.0, math.inf, UNIT, tol=1e-6)
    assert r.converged and math.isfinite(r.value)


def test_fit_divergence_examples():
    L = np.array([1.0, 2.0, 5.0, 9.0])
    fit = fit_divergence(np.column_stack([L, 3 * L - 7]))
    assert fit.form == LINEAR
    assert fit.coefficient == pytest.approx(3.0) and fit.offset == pytest.approx(-7.0)
    assert fit.residual == pytest.approx(0.0, abs=1e-12)
    fit = fit_divergence(np.column_stack([L, 2 * np.log(L) + 1]), LOG)
    assert fit.coefficient == pytest.approx(2.0) and fit.offset == pytest.approx(1.0)
    np.testing.assert_allclose(fit.predict(L), 2 * np.log(L) + 1)


def test_fit_divergence_sigma1():
    samples = [(L, sigma1(UNIT, L).value) for L in (200, 400, 800, 1600)]
    assert fit_divergence(samples).coefficient == pytest.approx(-8 * math.pi / 3, rel=0.02)


def test_fit_divergence_errors():
    with pytest.raises(DivergenceFitError):
        fit_divergence([(1, 1), (2, 2), (3, 3)])
    with pytest.raises(DivergenceFitError):
        fit_divergence([(1, 1), (1, 2), (3, 3), (4, 4)])
    with pytest.raises(DivergenceFitError):
        fit_divergence([(0, 1), (2, 2), (3, 3), (4, 4)], LOG)
    with pytest.raises(DivergenceFitError):
        fit_divergence([(1, 1), (2, 2), (3, 3), (4, 4)], "cubic")
