import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from polaronlab.model import INFINITE_CUTOFF, ModelError, ModelParams, dispersion, form_factor, theta11, theta22

finite = st.floats(-5.0, 5.0, allow_nan=False)
vec = st.tuples(finite, finite, finite).map(np.array)
positive = st.floats(0.05, 5.0)


def test_params_validation():
    with pytest.raises(ModelError):
        ModelParams(c=0.0)
    with pytest.raises(ModelError):
        ModelParams(xi=-1.0)
    with pytest.raises(ModelError):
        ModelParams(g=-0.1)
    with pytest.raises(ModelError):
        ModelParams(kappa=-1e-3)
    with pytest.raises(ModelError):
        ModelParams(cutoff=0.0)
    assert ModelParams().cutoff == INFINITE_CUTOFF
    assert ModelParams(P=0.5).P == (0.5, 0.5, 0.5)
    assert ModelParams(P=(0, 0, 1)).replace(g=2.0).g == 2.0


def test_dispersion_examples():
    p = ModelParams(kappa=0.3)
    assert dispersion([0, 0, 0], p) == pytest.approx(0.3)
    assert dispersion([0, 0, 1.0], ModelParams()) == pytest.approx(math.sqrt(2.0), rel=1e-15)


def test_form_factor_examples():
    p = ModelParams(g=1.0, cutoff=2.0)
    assert form_factor([0.0, 1.0, 0.0], p) == pytest.approx(2**-0.25, rel=1e-14)
    assert form_factor([0.0, 0.0, 2.0], p) == 0.0
    assert form_factor([3.0, 0.0, 0.0], p) == 0.0
    assert form_factor([0.0, 0.0, 0.0], p) == 0.0
    assert np.all(form_factor(np.ones((4, 3)), ModelParams(g=0.0)) == 0.0)


def test_form_factor_ignores_kappa():
    k = np.array([0.3, -0.2, 0.9])
    a = form_factor(k, ModelParams(g=0.7, kappa=0.0))
    b = form_factor(k, ModelParams(g=0.7, kappa=0.4))
    assert a == b


@given(vec, positive, positive, st.floats(0.0, 2.0))
def test_dispersion_bounds_and_parity(k, c, xi, kappa):
    p = ModelParams(c=c, xi=xi, kappa=kappa)
    om = dispersion(k, p)
    kk = np.linalg.norm(k)
    slack = 1e-14 * (1.0 + kappa)
    assert om - kappa >= c * kk * (1 - 1e-14) - slack
    assert om - kappa >= xi * kk**2 * (1 - 1e-14) - slack
    assert om == dispersion(-k, p)
    assert dispersion(k, p.replace(kappa=kappa + 0.1)) > om


@given(st.floats(0.0, 10.0), st.floats(0.0, 10.0), positive, positive)
def test_dispersion_monotone_in_k(a, b, c, xi):
    p = ModelParams(c=c, xi=xi)
    lo, hi = sorted((a, b))
    assert dispersion([0, 0, lo], p) <= dispersion([0, 0, hi], p)


def test_form_factor_bound_on_random_samples(rng):
    k = rng.normal(size=(10_000, 3)) * rng.uniform(0.0, 20.0, size=(10_000, 1))
    kk = np.linalg.norm(k, axis=1)
    for c, xi, g in ((1.0, 1.0, 1.0), (0.3, 2.0, 0.5), (3.0, 1.5, 2.0)):
        v = form_factor(k, ModelParams(c=c, xi=xi, g=g))
        assert np.all(v <= g * np.minimum(np.sqrt(kk / c), 1.0) * (1 + 1e-14))


def test_form_factor_sharp_bound_any_xi(rng):
    # for xi < 1 the large-k limit g / sqrt(xi) exceeds g, so the cap is 1 / sqrt(xi)
    k = rng.normal(size=(10_000, 3)) * rng.uniform(0.0, 50.0, size=(10_000, 1))
    kk = np.linalg.norm(k, axis=1)
    for c, xi in ((3.0, 0.1), (0.5, 0.25), (1.0, 4.0)):
        v = form_factor(k, ModelParams(c=c, xi=xi, g=1.0))
        assert np.all(v <= np.minimum(np.sqrt(kk / c), xi**-0.5) * (1 + 1e-14))
    far = form_factor([0.0, 0.0, 1e8], ModelParams(c=1.0, xi=0.1, g=1.0))
    assert far > 1.0


def test_theta11_hand_value():
    p = ModelParams(c=1.0, xi=1.0, g=1.0)
    z = np.array([0.0, 0.0, 1.0])
    val = theta11(np.zeros(3), 0.0, z, z, 1.0, p)
    assert val == pytest.approx(-(2**-0.5) / (3 + 2 * math.sqrt(2)), rel=1e-14)
    assert val == pytest.approx(-0.121320, abs=1e-6)


def test_theta11_cutoff_and_zero_denominator():
    p = ModelParams(g=1.0, cutoff=1.0)
    assert theta11(np.zeros(3), 0.0, [0, 0, 1.5], [0, 0.2, 0], 1.0, p) == 0.0
    with pytest.raises(ModelError):
        theta11(np.zeros(3), 0.0, np.zeros(3), np.zeros(3), 0.0, ModelParams(g=1.0))


@given(vec, vec, vec, st.floats(0.0, 3.0), st.floats(0.01, 3.0))
def test_theta11_sign_symmetry_and_bound(P, k, l, eta, mu):
    p = ModelParams(g=0.8, kappa=0.1, P=tuple(P))
    p0 = np.zeros(3)
    a = theta11(p0, eta, k, l, mu, p)
    assert a <= 0.0
    assert a == pytest.approx(theta11(p0, eta, l, k, mu, p), rel=1e-14, abs=0)
    assert abs(a) <= form_factor(k, p) * form_factor(l, p) / mu * (1 + 1e-12)


def test_theta22_composes_theta11():
    p = ModelParams(c=1.2, xi=0.7, g=0.9, kappa=0.05, P=(0.1, -0.2, 0.4))
    rng = np.random.default_rng(3)
    pp, k1, k2, l1, l2 = rng.normal(size=(5, 3))
    eta, mu = 0.3, 0.8
    om = lambda k: math.sqrt(p.c**2 * (k @ k) + p.xi**2 * (k @ k) ** 2) + p.kappa  # noqa: E731
    v = lambda k: p.g * math.sqrt((k @ k) / (om(k) - p.kappa))  # noqa: E731
    d1 = 0.5 * np.sum((p.P_vec - pp - k1) ** 2) + eta + om(k1) + mu
    d2 = 0.5 * np.sum((p.P_vec - pp - l1) ** 2) + eta + om(l1) + mu
    q = p.P_vec - (pp + k1 + l1) - k2 - l2
    inner = -v(k2) * v(l2) / (0.5 * q @ q + eta + om(k1) + om(l1) + om(k2) + om(l2) + mu)
    expect = v(k1) * v(l1) * inner / (d1 * d2)
    assert theta22(pp, eta, k1, k2, l1, l2, mu, p) == pytest.approx(expect, rel=1e-13)


@given(vec, vec, vec, vec, vec)
def test_theta22_sign_and_cutoff(pp, k1, k2, l1, l2):
    p = ModelParams(g=1.0, kappa=0.2, cutoff=3.0)
    val = theta22(pp, 0.1, k1, k2, l1, l2, 0.5, p)
    assert val <= 0.0
    far = k1 / max(np.linalg.norm(k1), 1e-9) * 3.5 if np.linalg.norm(k1) > 0 else np.array([3.5, 0, 0])
    assert theta22(pp, 0.1, far, k2, l1, l2, 0.5, p) == 0.0
