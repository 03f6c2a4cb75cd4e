"""Cofactor calculus, divergence/ibp identities, and variation formulas."""

import math

import numpy as np
import pytest

from bmstab.bodies import (FamilyError, ball_body, body_from_support,
                           make_family, measure_of_body)
from bmstab.measures import make_measure
from bmstab.oracles import central_derivative
from bmstab.sphere import (PolynomialSF, build_grid, curvature_matrix,
                           sf_exp, sf_ratio, sf_sum)
from bmstab.variation import (cheng_yau_residual, cofactor_field,
                              cofactor_matrix, first_variation, g_eval,
                              g_prime, g_prime_ball, g_second_ball,
                              ibp_residuals, log_correction,
                              mult_family_through, second_cofactor,
                              second_cofactor_field, variation_at_ball)


def random_symmetric(rng, N, scale=1.0):
    M = rng.normal(size=(N, N)) * scale
    return 0.5 * (M + M.T)


# ---------------------------------------------------------------------------
# cofactor calculus
# ---------------------------------------------------------------------------

def test_cofactor_2x2_closed_form():
    M = np.array([[2.0, 0.7], [0.7, -1.2]])
    C = cofactor_matrix(M)
    assert np.allclose(C, [[-1.2, -0.7], [-0.7, 2.0]], atol=1e-14)


def test_cofactor_identity_matrix():
    C = cofactor_matrix(np.eye(3))
    assert np.allclose(C, np.eye(3), atol=1e-14)
    assert np.sum(C * np.eye(3)) == pytest.approx(3.0)  # = 3 det


@pytest.mark.parametrize("N", [2, 3, 4, 5, 6])
def test_cofactor_homogeneity_identities(N):
    rng = np.random.default_rng(37 + N)
    for _ in range(200):
        M = random_symmetric(rng, N, scale=rng.uniform(0.1, 10.0))
        scale = max(np.abs(M).max(), 1.0) ** N
        C = cofactor_matrix(M)
        detM = np.linalg.det(M)
        assert abs(np.sum(C * M) - N * detM) < 1e-12 * scale
        C2 = second_cofactor(M)
        back = np.einsum("ijkl,kl->ij", C2, M)
        assert np.max(np.abs(back - (N - 1) * C)) < 1e-12 * scale


def test_cofactor_vs_determinant_gradient():
    # c_ij = d det / d M_ij for symmetric-structure perturbations is checked
    # through the general directional derivative of det at M
    rng = np.random.default_rng(11)
    M = random_symmetric(rng, 4)
    C = cofactor_matrix(M)
    got = np.zeros_like(M)
    for i in range(4):
        for j in range(4):
            E = np.zeros((4, 4))
            E[i, j] = 1.0
            got[i, j] = central_derivative(
                lambda t: np.linalg.det(M + t * E), 0.0, order=1, step=1e-5,
                vectorized=False)
    assert np.max(np.abs(got - C)) < 1e-8


def test_second_cofactor_vs_fd_of_cofactor():
    rng = np.random.default_rng(12)
    M = random_symmetric(rng, 4)
    C2 = second_cofactor(M)
    for i, j, k, l in ((0, 1, 2, 3), (1, 1, 2, 2), (0, 2, 1, 3), (0, 1, 0, 1),
                       (2, 3, 2, 3), (0, 0, 0, 0)):
        E = np.zeros((4, 4))
        E[k, l] = 1.0
        fd = central_derivative(
            lambda t: cofactor_matrix(M + t * E)[i, j], 0.0, order=1,
            step=1e-5, vectorized=False)
        assert C2[i, j, k, l] == pytest.approx(fd, abs=1e-8)


def test_second_cofactor_vanishing_pattern():
    rng = np.random.default_rng(13)
    M = random_symmetric(rng, 5)
    C2 = second_cofactor(M)
    for i in range(5):
        for j in range(5):
            assert np.max(np.abs(C2[i, j, i, :])) == 0.0  # shared row
            assert np.max(np.abs(C2[i, j, :, j])) == 0.0  # shared column


def test_cofactor_fields_match_pointwise(grid3):
    h = PolynomialSF(3, {(0, 0, 0): 1.0, (2, 0, 0): 0.12, (1, 1, 0): -0.05})
    Q = curvature_matrix(h, grid3).Q
    Cf = cofactor_field(Q)
    C2f = second_cofactor_field(Q)
    for idx in (0, 57, 211, 500):
        assert np.allclose(Cf[idx], cofactor_matrix(Q[idx]), atol=1e-13)
        assert np.allclose(C2f[idx], second_cofactor(Q[idx]), atol=1e-13)


# ---------------------------------------------------------------------------
# divergence-free rows and integration-by-parts identities
# ---------------------------------------------------------------------------

def test_cheng_yau_vanishes_on_circle(grid2):
    h = sf_sum([(1.0, PolynomialSF.constant(2, 1.0)),
                (0.1, PolynomialSF.cos_harmonic(3))])
    assert cheng_yau_residual(h, grid2) == 0.0


def test_cheng_yau_ball_any_dimension(grid3, grid4):
    for g in (grid3, grid4):
        h = PolynomialSF.constant(g.n, 1.3)
        assert cheng_yau_residual(h, g) < 1e-13


def test_cheng_yau_residual_small_for_smooth_bodies(grid3, grid4):
    h3 = PolynomialSF(3, {(0, 0, 0): 1.0, (0, 0, 2): 0.1})
    assert cheng_yau_residual(h3, grid3) < 1e-13
    h4 = PolynomialSF(4, {(0, 0, 0, 0): 1.0, (1, 1, 0, 0): 0.1})
    assert cheng_yau_residual(h4, grid4) < 1e-13


def test_ibp_residuals_circle(grid2):
    h = PolynomialSF.constant(2, 1.0)
    psi = PolynomialSF.cos_harmonic(2)
    omega = PolynomialSF.constant(2, 1.0)
    r1, r2 = ibp_residuals(h, psi, omega, grid2)
    assert r1 < 1e-12
    assert r2 < 1e-12


def test_ibp_residuals_sphere(grid3):
    h = PolynomialSF(3, {(0, 0, 0): 1.0, (2, 0, 0): 0.05})
    psi = PolynomialSF(3, {(0, 2, 0): 1.0})
    omega = PolynomialSF(3, {(0, 0, 2): 1.0})
    r1, r2 = ibp_residuals(h, psi, omega, grid3)
    assert r1 < 1e-8
    assert r2 < 1e-8


def test_ibp_trilinear_symmetry(grid3):
    # the trilinear form is fully symmetric: permuting the roles of the two
    # test functions must leave the residual structure unchanged
    h = PolynomialSF(3, {(0, 0, 0): 1.2, (1, 1, 0): 0.08})
    psi = PolynomialSF(3, {(2, 0, 0): 0.5})
    omega = PolynomialSF(3, {(0, 1, 1): 0.5})
    r12 = ibp_residuals(h, psi, omega, grid3)
    r21 = ibp_residuals(h, omega, psi, grid3)
    assert max(r12 + r21) < 1e-8


# ---------------------------------------------------------------------------
# g(s) and its derivatives
# ---------------------------------------------------------------------------

def test_g_eval_closed_forms(grid2, lebesgue, gaussian):
    one = PolynomialSF.constant(2, 1.0)
    fam = make_family("additive", one, one, grid2)
    assert g_eval(fam, lebesgue, 0.5) == pytest.approx(2.25 * math.pi,
                                                       rel=1e-12)
    assert g_eval(fam, gaussian, 0.2) == pytest.approx(
        2 * math.pi * (1 - math.exp(-1.44 / 2)), rel=1e-10)
    with pytest.raises(FamilyError):
        g_eval(fam, lebesgue, fam.a * 1.01)


def test_g_prime_ball_closed_forms(grid2, lebesgue, gaussian):
    one = PolynomialSF.constant(2, 1.0)
    cos1 = PolynomialSF.cos_harmonic(1)
    assert g_prime_ball(1.0, one, lebesgue, grid2) == pytest.approx(
        2 * math.pi, rel=1e-12)
    assert g_prime_ball(1.0, one, gaussian, grid2) == pytest.approx(
        2 * math.pi * math.exp(-0.5), rel=1e-12)
    assert abs(g_prime_ball(1.0, cos1, lebesgue, grid2)) < 1e-13


def test_g_second_ball_closed_forms(grid2, lebesgue, gaussian):
    one = PolynomialSF.constant(2, 1.0)
    cos1 = PolynomialSF.cos_harmonic(1)
    assert g_second_ball(1.0, one, lebesgue, grid2) == pytest.approx(
        2 * math.pi, rel=1e-12)
    # translations leave area fixed
    assert abs(g_second_ball(1.0, cos1, lebesgue, grid2)) < 1e-13
    assert g_second_ball(1.0, cos1, gaussian, grid2) == pytest.approx(
        -math.pi * math.exp(-0.5), rel=1e-12)
    with pytest.raises(ValueError):
        g_second_ball(1.0, one, lebesgue, grid2, route="secret")


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("mkind", ["lebesgue", "gaussian", "exp_power"])
def test_second_variation_routes_agree(n, mkind):
    g = build_grid(n, 160 if n == 2 else 16)
    mu = make_measure(kind=mkind, p=1) if mkind == "exp_power" \
        else make_measure(kind=mkind)
    rng = np.random.default_rng(7 * n)
    if n == 2:
        psi = sf_sum([(rng.normal(), PolynomialSF.constant(2, 1.0)),
                      (rng.normal(), PolynomialSF.cos_harmonic(2)),
                      (rng.normal(), PolynomialSF.sin_harmonic(3))])
    else:
        psi = PolynomialSF(3, {(0, 0, 0): rng.normal(),
                               (1, 1, 0): rng.normal(),
                               (0, 0, 2): rng.normal()})
    for R in (0.7, 1.0, 1.6):
        var = variation_at_ball(mu, R, psi, g)
        scale = max(abs(var.g2_moment), abs(var.g2_profile), 1e-12)
        assert abs(var.g2_moment - var.g2_profile) / scale < 1e-10
        assert var.route_gap < 1e-10 * scale + 1e-14


def test_first_variation_matches_fd(grid2, gaussian):
    base = sf_sum([(1.0, PolynomialSF.constant(2, 1.0)),
                   (0.08, PolynomialSF.cos_harmonic(2))])
    psi = PolynomialSF.cos_harmonic(2)
    fam = make_family("additive", base, psi, grid2)
    body = body_from_support(base, grid2)
    analytic = first_variation(gaussian, body, psi)
    fd = central_derivative(lambda s: g_eval(fam, gaussian, s), 0.0,
                            order=1, step=1e-3, vectorized=False)
    assert analytic == pytest.approx(fd, rel=1e-7)


def test_g_prime_away_from_zero(grid2, exp1):
    base = PolynomialSF.constant(2, 1.0)
    psi = PolynomialSF.cos_harmonic(2)
    fam = make_family("additive", base, psi, grid2)
    s0 = 0.3 * fam.a
    analytic = g_prime(exp1, fam, s=s0)
    fd = central_derivative(lambda s: g_eval(fam, exp1, s), s0,
                            order=1, step=1e-4, vectorized=False)
    assert analytic == pytest.approx(fd, rel=1e-6)


def test_variation_at_ball_g0_g1(grid3, gaussian):
    psi = PolynomialSF(3, {(0, 0, 0): 0.5, (1, 1, 0): 0.3})
    var = variation_at_ball(gaussian, 1.2, psi, grid3)
    K = ball_body(1.2, grid3)
    assert var.g0 == pytest.approx(measure_of_body(gaussian, K), rel=1e-12)
    assert var.g1 == pytest.approx(
        first_variation(gaussian, K, psi), rel=1e-10)


def test_log_correction_at_ball(grid2, gaussian):
    # closed form R^{n-2} f(R) int psi^2 for a centered R-ball
    R = 1.4
    K = ball_body(R, grid2)
    psi = PolynomialSF.cos_harmonic(2)
    got = log_correction(gaussian, K, psi)
    want = R ** 0 * math.exp(-R * R / 2) * math.pi  # int cos^2 = pi
    assert got == pytest.approx(want, rel=1e-10)
    var = variation_at_ball(gaussian, R, psi, grid2)
    assert got == pytest.approx(var.log_corr, rel=1e-10)


def test_log_correction_general_body_vs_double_fd(grid2, gaussian):
    """g''_mult(0) - g''_add(0) must equal the correction term when the
    multiplicative family is built through the same initial direction."""
    base = sf_sum([(1.0, PolynomialSF.constant(2, 1.0)),
                   (0.06, PolynomialSF.cos_harmonic(2))])
    psi = PolynomialSF.cos_harmonic(2)
    body = body_from_support(base, grid2)
    fam_add = make_family("additive", base, psi, grid2)
    fam_mul = mult_family_through(base, psi, grid2)
    step = 2e-3
    g2_add = central_derivative(lambda s: g_eval(fam_add, gaussian, s), 0.0,
                                order=2, step=step, vectorized=False)
    g2_mul = central_derivative(lambda s: g_eval(fam_mul, gaussian, s), 0.0,
                                order=2, step=step, vectorized=False)
    corr = log_correction(gaussian, body, psi)
    assert corr == pytest.approx(g2_mul - g2_add, rel=1e-4)


def test_mult_family_initial_speed(grid2):
    base = sf_sum([(1.0, PolynomialSF.constant(2, 1.0)),
                   (0.05, PolynomialSF.cos_harmonic(2))])
    psi = PolynomialSF.cos_harmonic(2)
    fam = mult_family_through(base, psi, grid2)
    # d h_s / ds at s=0 equals psi
    eps = 1e-6
    hp = fam.support_at(eps).values(grid2.nodes)
    hm = fam.support_at(-eps).values(grid2.nodes)
    speed = (hp - hm) / (2 * eps)
    assert np.max(np.abs(speed - psi.values(grid2.nodes))) < 1e-9
