import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gwperc import DomainError, LimitLaw, constants, make_spec

pos = st.floats(1e-3, 1e3)


@pytest.fixture(scope="module", params=["uniform3", "mu12", "zeta15", "zeta12"])
def law(request):
    d = {"uniform3": {"kind": "explicit", "pmf": {"1": 1 / 3, "2": 1 / 3, "3": 1 / 3}},
         "mu12": {"kind": "explicit", "pmf": {"1": 0.8, "2": 0.2}},
         "zeta15": {"kind": "zeta_tail", "alpha": 1.5},
         "zeta12": {"kind": "zeta_tail", "alpha": 1.2}}[request.param]
    return LimitLaw(constants(make_spec(d)))


def test_finite_variance_closed_forms(uniform3):
    law = LimitLaw(constants(uniform3))
    # C = 3: phi(theta) = 1 - theta / (3 + theta), an exponential law of mean 1/3
    for th in (0.0, 0.5, 3.0, 40.0):
        assert law.phi(th) == pytest.approx(3 / (3 + th), rel=1e-14)
        assert law.size_biased_lt(th) == pytest.approx((3 / (3 + th)) ** 2, rel=1e-14)
    assert law.u(2.0, 1.5) == pytest.approx(1.5 / (1 + 0.5 * 2.0), rel=1e-15)
    assert law.mean() == pytest.approx(1 / 3)
    assert law.size_biased_mean() == pytest.approx(2 / 3)


def test_phi_limits(law):
    assert law.phi(0.0) == 1.0
    assert law.u(0.0, 2.5) == 2.5
    assert law.u(1.0, 0.0) == 0.0
    # phi(theta) -> 0 as theta -> infinity, like beta x**(1-alpha) for stable laws
    assert law.phi(1e8) < law.phi(1e4) < law.phi(1.0)
    assert law.phi(1e40) < 1e-6
    x = 1e8 / law.C
    assert law.phi(1e8) == pytest.approx(1 - (1 + x ** (1 - law.alpha)) ** -law.beta, rel=1e-9)


def test_phi_prime_finite_difference(law):
    for th in (0.1, 1.0, 10.0):
        h = 1e-6 * th
        fd = (law.phi(th + h) - law.phi(th - h)) / (2 * h)
        assert law.phi_prime(th) == pytest.approx(fd, rel=1e-6)


def test_size_biased_is_derivative(law):
    th = np.logspace(-2, 2, 9)
    assert np.allclose(law.size_biased_lt(th), -law.C * law.phi_prime(th), rtol=1e-13)


def test_flow_derivative_is_branching_mechanism(law):
    # d/dt u(t, lam) = -psi(u(t, lam))
    for lam in (0.2, 3.0):
        for t in (0.5, 2.0):
            h = 1e-6
            fd = (law.u(t + h, lam) - law.u(t - h, lam)) / (2 * h)
            assert fd == pytest.approx(-law.psi(law.u(t, lam)), rel=1e-6)


@given(pos, pos, pos)
def test_semigroup(s, t, lam):
    for d in ({"kind": "explicit", "pmf": {"1": 0.8, "2": 0.2}}, {"kind": "zeta_tail", "alpha": 1.5}):
        law = LimitLaw(constants(make_spec(d)))
        a = law.u(s, law.u(t, lam))
        b = law.u(s + t, lam)
        assert abs(a - b) <= 1e-12 * b


@given(pos)
def test_identity_phi_u(theta):
    for d in ({"kind": "explicit", "pmf": {"2": 1.0}}, {"kind": "zeta_tail", "alpha": 1.2}):
        law = LimitLaw(constants(make_spec(d)))
        assert abs((1 - law.phi(theta)) - law.u(1.0, theta) / law.C) <= 1e-12


@given(st.floats(0, 5), st.floats(0.05, 5), pos, st.floats(0, 5))
def test_branching_property(a, dt, theta, b):
    law = LimitLaw(constants(make_spec({"kind": "zeta_tail", "alpha": 1.5})))
    lhs = law.csbp_transition_lt(a + b, dt, theta)
    rhs = law.csbp_transition_lt(a, dt, theta) * law.csbp_transition_lt(b, dt, theta)
    assert abs(lhs - rhs) <= 1e-12
    assert abs(law.csbp_transition_lt(a, dt, theta) - math.exp(-a * law.u(dt, theta))) <= 1e-12


@given(st.floats(0, 1e3), st.floats(0, 1e3))
def test_phi_monotone(a, b):
    law = LimitLaw(constants(make_spec({"kind": "zeta_tail", "alpha": 1.5})))
    lo, hi = sorted((a, b))
    assert 0.0 <= law.phi(hi) <= law.phi(lo) <= 1.0


def test_extinction_limit(law):
    a, dt = 0.8, 1.5
    assert law.csbp_transition_lt(a, dt, 1e12) == pytest.approx(law.extinction_lt(a, dt), rel=1e-3)


def test_mean_slope(law):
    th = 1e-6 if law.alpha == 2 else law.C * 1e-7 ** (1 / (law.alpha - 1))
    assert law.one_minus_phi(th) / th == pytest.approx(1 / law.C, rel=1e-4)


def test_stable_size_biased_mean_infinite(zeta15):
    assert LimitLaw(constants(zeta15)).size_biased_mean() == math.inf


def test_arrays_round_trip(law):
    th = np.linspace(0, 5, 7)
    out = law.phi(th)
    assert out.shape == th.shape
    assert np.allclose(out, [law.phi(float(t)) for t in th], rtol=0, atol=1e-15)


def test_domain_errors(law):
    with pytest.raises(DomainError):
        law.phi(-1.0)
    with pytest.raises(DomainError):
        law.u(-0.1, 1.0)
    with pytest.raises(DomainError):
        law.u(1.0, float("nan"))
    with pytest.raises(DomainError):
        law.csbp_transition_lt(1.0, 0.0, 1.0)
    with pytest.raises(DomainError):
        law.csbp_transition_lt(-1.0, 1.0, 1.0)
