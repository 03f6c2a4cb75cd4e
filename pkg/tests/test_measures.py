"""Radial measures: moment quadrature against scipy.integrate.quad, closed
forms for ball measures, and the two moment identities."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from bmstab.measures import (MomentTriple, ball_growth_derivatives,
                             ball_measure, make_measure, measure_from_spec,
                             moment_identities, moments, radial_profile)
from bmstab.oracles import central_derivative

ALL_KINDS = [
    {"kind": "lebesgue"},
    {"kind": "gaussian"},
    {"kind": "exp_power", "p": 1},
    {"kind": "exp_power", "p": 3},
]


def quad_moment(measure, D, n, power):
    """Independent oracle: 1-d adaptive quadrature of the moment integrand."""
    deriv = {0: measure.f, 1: measure.fprime, 2: measure.fsecond}[power]
    val, err = quad(lambda t: t ** (n - 1 + power) * float(deriv(t * D)),
                    0.0, 1.0, epsabs=1e-13, epsrel=1e-12, limit=200)
    return val


@pytest.mark.parametrize("spec", ALL_KINDS, ids=lambda s: s["kind"] + str(s.get("p", "")))
@pytest.mark.parametrize("n", [2, 3, 4])
@pytest.mark.parametrize("D", [0.5, 1.0, 2.0])
def test_moments_match_scipy_quad(spec, n, D):
    mu = make_measure(**spec)
    t = moments(mu, D, n)
    assert isinstance(t, MomentTriple)
    assert t.A == pytest.approx(quad_moment(mu, D, n, 0), rel=1e-9)
    assert t.B == pytest.approx(quad_moment(mu, D, n, 1), rel=1e-9, abs=1e-12)
    assert t.C == pytest.approx(quad_moment(mu, D, n, 2), rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("spec", ALL_KINDS, ids=lambda s: s["kind"] + str(s.get("p", "")))
@pytest.mark.parametrize("n", [2, 3, 4])
@pytest.mark.parametrize("R", [0.5, 1.0, 2.0])
def test_moment_identity_residuals(spec, n, R):
    mu = make_measure(**spec)
    r1, r2 = moment_identities(mu, R, n)
    assert r1 < 1e-10
    assert r2 < 1e-10


def test_radial_profile_matches_pointwise(gaussian):
    D = np.array([0.3, 0.3, 1.0, 1.7, 1.0])
    prof = radial_profile(gaussian, D, 3, powers=(0, 1, 2))
    assert prof.shape == (3, 5)
    for j, d in enumerate(D):
        t = moments(gaussian, float(d), 3)
        assert prof[0, j] == pytest.approx(t.A, rel=1e-12)
        assert prof[1, j] == pytest.approx(t.B, rel=1e-12)
        assert prof[2, j] == pytest.approx(t.C, rel=1e-12)
    # repeated scales share the same value exactly
    assert prof[0, 0] == prof[0, 1]
    assert prof[0, 2] == prof[0, 4]


@pytest.mark.parametrize("R", [0.4, 1.0, 1.9])
def test_ball_measure_closed_forms(R, lebesgue, gaussian, exp1):
    assert ball_measure(lebesgue, R, 2) == pytest.approx(math.pi * R * R,
                                                         rel=1e-12)
    assert ball_measure(lebesgue, R, 3) == pytest.approx(
        4.0 / 3.0 * math.pi * R ** 3, rel=1e-12)
    assert ball_measure(gaussian, R, 2) == pytest.approx(
        2 * math.pi * (1.0 - math.exp(-R * R / 2)), rel=1e-10)
    # exp(-r): 2 pi integral_0^R r e^{-r} dr = 2 pi (1 - e^{-R}(1+R))
    assert ball_measure(exp1, R, 2) == pytest.approx(
        2 * math.pi * (1.0 - math.exp(-R) * (1.0 + R)), rel=1e-10)


@pytest.mark.parametrize("spec", ALL_KINDS, ids=lambda s: s["kind"] + str(s.get("p", "")))
@pytest.mark.parametrize("n", [2, 3])
def test_ball_growth_derivatives_match_fd(spec, n):
    mu = make_measure(**spec)
    R = 1.1
    G, G1, G2 = ball_growth_derivatives(mu, R, n)
    assert G == pytest.approx(ball_measure(mu, R, n), rel=1e-12)
    fd1 = central_derivative(lambda r: ball_measure(mu, r, n), R,
                             order=1, step=1e-3, vectorized=False)
    fd2 = central_derivative(lambda r: ball_measure(mu, r, n), R,
                             order=2, step=1e-3, vectorized=False)
    assert G1 == pytest.approx(fd1, rel=1e-7)
    assert G2 == pytest.approx(fd2, rel=1e-5, abs=1e-7)


def test_gaussian_growth_flat_at_one():
    # the gaussian surface term (n-1)f(R)/R + f'(R) vanishes at R = sqrt(n-1)
    mu = make_measure(kind="gaussian")
    _, _, G2 = ball_growth_derivatives(mu, 1.0, 2)
    assert abs(G2) < 1e-14


def test_measure_describe_and_spec_roundtrip():
    for spec in ALL_KINDS:
        mu = measure_from_spec(dict(spec))
        desc = mu.describe()
        assert desc["kind"] == spec["kind"]
        if "p" in spec:
            assert desc["p"] == spec["p"]
        again = measure_from_spec(dict(desc))  # describe() is a valid spec
        r = np.linspace(0.1, 2.0, 7)
        assert np.allclose(again.f(r), mu.f(r), rtol=1e-14)


def test_custom_measure_profile():
    # f(r) = exp(-r^2/2 - 0.3 r): log-concave, decreasing, smooth
    def f(r):
        return np.exp(-0.5 * r * r - 0.3 * r)

    mu = make_measure(kind="custom",
                      f=f,
                      fprime=lambda r: -(r + 0.3) * f(r),
                      fsecond=lambda r: ((r + 0.3) ** 2 - 1.0) * f(r))
    r1, r2 = moment_identities(mu, 1.3, 3)
    assert r1 < 1e-10 and r2 < 1e-10


def test_make_measure_rejects_bad_profiles():
    with pytest.raises(ValueError):
        make_measure(kind="cauchy")
    with pytest.raises(ValueError):
        make_measure(kind="exp_power", p=0)  # p must be >= 1
    # not log-concave: (log f)'' = 4/(1+r)^2 > 0
    with pytest.raises(ValueError):
        make_measure(kind="custom",
                     f=lambda r: (1.0 + r) ** -4.0,
                     fprime=lambda r: -4.0 * (1.0 + r) ** -5.0,
                     fsecond=lambda r: 20.0 * (1.0 + r) ** -6.0)
    # increasing density
    with pytest.raises(ValueError):
        make_measure(kind="custom",
                     f=lambda r: np.exp(+0.1 * r - 0.5 * r * r),
                     fprime=lambda r: (0.1 - r) * np.exp(0.1 * r - 0.5 * r * r),
                     fsecond=lambda r: ((0.1 - r) ** 2 - 1.0)
                     * np.exp(0.1 * r - 0.5 * r * r))
