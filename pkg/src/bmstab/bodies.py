"""Convex bodies given by support functions on a sphere grid.

A body is accepted only if its support candidate h is strictly positive and
the curvature matrix Q(h; u) is positive definite at every grid node; the
smallest eigenvalue and the offending node are reported otherwise.  The
measure of a body under a radial density f uses the boundary parametrization
by the outer normal:

    gamma(K) = int_{S^{n-1}} h(u) det Q(h; u) A(D(u)) du,
    D(u)^2   = h(u)^2 + |grad_S h(u)|^2,

with A the first radial moment of the density at scale D."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import measures as _measures
from .sphere import (CurvatureField, PolynomialSF, SphereGrid,
                     SphericalFunction, ball_volume, batch_det,
                     curvature_matrix, sf_product_powers, sf_sum, sphere_area)


class NonPositiveSupport(ValueError):
    def __init__(self, msg, node=None):
        super().__init__(msg)
        self.node = node


class NotConvex(ValueError):
    def __init__(self, msg, node=None, min_eig=None):
        super().__init__(msg)
        self.node = node
        self.min_eig = min_eig


class FamilyError(ValueError):
    pass


@dataclass
class Body:
    h: SphericalFunction
    grid: SphereGrid = field(repr=False)
    hvals: np.ndarray = field(repr=False)
    grad0: np.ndarray = field(repr=False)
    curvature: CurvatureField = field(repr=False)
    D: np.ndarray = field(repr=False)
    is_symmetric: bool = False

    @property
    def n(self):
        return self.grid.n

    @property
    def min_curvature_eig(self):
        return float(np.min(self.curvature.min_eig))


def body_from_support(h, grid):
    """Validate a support-function candidate and cache its boundary data."""
    if h.n != grid.n:
        raise ValueError("support function dimension does not match the grid")
    d = h.d2_ext0(grid.nodes)
    if np.any(d.val <= 0.0):
        i = int(np.argmin(d.val))
        raise NonPositiveSupport(
            f"support function nonpositive (h={d.val[i]:.6g} at node {i})",
            node=grid.nodes[i])
    cf = curvature_matrix(h, grid)
    if np.any(cf.min_eig <= 0.0):
        i = int(np.argmin(cf.min_eig))
        raise NotConvex(
            "curvature matrix not positive definite "
            f"(min eigenvalue {cf.min_eig[i]:.6g} at node {i})",
            node=grid.nodes[i], min_eig=float(cf.min_eig[i]))
    D = np.sqrt(d.val ** 2 + np.sum(d.grad ** 2, axis=1))
    return Body(h=h, grid=grid, hvals=d.val, grad0=d.grad, curvature=cf,
                D=D, is_symmetric=h.parity() == "even")


def ball_body(radius, grid):
    return body_from_support(PolynomialSF.constant(grid.n, radius), grid)


def minkowski_combine(K, L, lam):
    """Body of the support combination lam*h_K + (1-lam)*h_L."""
    if not (0.0 <= lam <= 1.0):
        raise ValueError("lambda must lie in [0, 1]")
    if K.grid is not L.grid:
        raise ValueError("bodies must share a grid")
    h = sf_sum([(lam, K.h), (1.0 - lam, L.h)])
    return body_from_support(h, K.grid)


def log_combine(K, L, lam):
    """Body of the geometric support mean h_K^lam h_L^{1-lam}.

    The pointwise mean need not be a support function; validation raises
    NotConvex in that case."""
    if not (0.0 <= lam <= 1.0):
        raise ValueError("lambda must lie in [0, 1]")
    if K.grid is not L.grid:
        raise ValueError("bodies must share a grid")
    h = sf_product_powers([(K.h, lam), (L.h, 1.0 - lam)])
    return body_from_support(h, K.grid)


def measure_of_body(measure, body, grid=None):
    """gamma(K) by outer spherical quadrature and inner radial moments."""
    if grid is not None and grid is not body.grid:
        raise ValueError("grid does not match the body")
    g = body.grid
    A = _measures.radial_profile(measure, body.D, g.n, powers=(0,))[0]
    vals = body.hvals * body.curvature.det * A
    return float(np.sum(g.weights * vals))


def _elementary_symmetric(eigs):
    m, N = eigs.shape
    e = np.zeros((m, N + 1))
    e[:, 0] = 1.0
    for j in range(N):
        for k in range(min(j + 1, N), 0, -1):
            e[:, k] += eigs[:, j] * e[:, k - 1]
    return e


def ball_intrinsic_volume(n, j):
    """Closed-form intrinsic volume V_j of the unit ball in R^n."""
    return math.comb(n, j) * ball_volume(n) / ball_volume(n - j)


def quermassintegrals(body):
    """Intrinsic volumes [V_0, ..., V_n] from curvature eigenvalues.

    V_j for j < n integrates the j-th elementary symmetric function of the
    principal curvature radii; the normalization constants are calibrated so
    a Euclidean ball reproduces its closed-form values exactly."""
    g = body.grid
    n = g.n
    eigs = np.linalg.eigvalsh(body.curvature.Q)
    e = _elementary_symmetric(eigs)
    out = []
    for j in range(n):
        cal = ball_intrinsic_volume(n, j) / (math.comb(n - 1, j) * sphere_area(n))
        out.append(cal * float(np.sum(g.weights * e[:, j])))
    vol = float(np.sum(g.weights * body.hvals * e[:, n - 1])) / n
    out.append(vol)
    return out


def boundary_inverse_height(body):
    """int_{boundary K} 1/<y, nu(y)> dsigma, pushed to the sphere:
    int det Q(h; u) / h(u) du."""
    g = body.grid
    return float(np.sum(g.weights * body.curvature.det / body.hvals))


# ---------------------------------------------------------------------------
# perturbation families
# ---------------------------------------------------------------------------

VALIDITY_EIG_FLOOR = 0.05
_VALIDITY_GRID = 17
_BISECTION_STEPS = 40


@dataclass
class PerturbationFamily:
    """One-parameter family of support candidates.

    additive:        h_s = h + s psi
    multiplicative:  h_s = h * phi^s   (phi strictly positive)

    `a` is the validity radius: every |s| <= a keeps h_s strictly positive
    with curvature eigenvalues at least VALIDITY_EIG_FLOOR times the base
    body's minimum, checked on a 17-point s-grid during the bisection
    search."""

    kind: str
    base: SphericalFunction
    direction: SphericalFunction
    grid: SphereGrid = field(repr=False)
    a: float = 0.0
    delta: float = VALIDITY_EIG_FLOOR
    search_trace: list = field(default_factory=list, repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n(self):
        return self.grid.n

    # -- supports ---------------------------------------------------------

    def support_at(self, s):
        if self.kind == "additive":
            return sf_sum([(1.0, self.base), (float(s), self.direction)])
        return sf_product_powers([(self.base, 1.0), (self.direction, float(s))])

    def body_at(self, s):
        if abs(s) > self.a:
            raise FamilyError(
                f"s={s:g} outside the validity radius {self.a:g}")
        return body_from_support(self.support_at(s), self.grid)

    # -- batched node fields ------------------------------------------------

    def _node_data(self):
        if "base" not in self._cache:
            self._cache["base"] = self.base.d2_ext0(self.grid.nodes)
            self._cache["dir"] = self.direction.d2_ext0(self.grid.nodes)
        return self._cache["base"], self._cache["dir"]

    def support_fields(self, s_values):
        """Values, spherical gradients and ambient 1-homogeneous Hessians of
        h_s at the grid nodes for a batch of parameters, shapes
        (S, m), (S, m, n), (S, m, n, n)."""
        db, dd = self._node_data()
        U = self.grid.nodes
        m, n = U.shape
        s = np.asarray(s_values, dtype=float).reshape(-1, 1)
        if self.kind == "additive":
            vals = db.val[None, :] + s * dd.val[None, :]
            grads = db.grad[None, :, :] + s[:, :, None] * dd.grad[None, :, :]
            hes0 = (db.hess[None, :, :, :]
                    + s[:, :, None, None] * dd.hess[None, :, :, :])
        else:
            wb = db.grad / db.val[:, None]
            wd = dd.grad / dd.val[:, None]
            mb = (db.hess / db.val[:, None, None]
                  - np.einsum("mi,mj->mij", wb, wb))
            md = (dd.hess / dd.val[:, None, None]
                  - np.einsum("mi,mj->mij", wd, wd))
            vals = db.val[None, :] * dd.val[None, :] ** s
            W = wb[None, :, :] + s[:, :, None] * wd[None, :, :]
            grads = vals[:, :, None] * W
            hes0 = vals[:, :, None, None] * (
                np.einsum("smi,smj->smij", W, W)
                + mb[None] + s[:, :, None, None] * md[None])
        eye = np.eye(n)
        proj = eye[None, :, :] - np.einsum("mi,mj->mij", U, U)
        hes1 = (proj[None] * vals[:, :, None, None]
                + np.einsum("mi,smj->smij", U, grads)
                + np.einsum("smi,mj->smij", grads, U)
                + hes0)
        return vals, grads, hes1

    def curvature_batch(self, s_values):
        """Frame-restricted curvature matrices for a batch of parameters,
        along with support values and gradients."""
        vals, grads, hes1 = self.support_fields(s_values)
        E = self.grid.frames
        Q = np.einsum("map,smpq,mbq->smab", E, hes1, E)
        return vals, grads, Q

    def measures_along(self, measure, s_values, chunk=32):
        """gamma(K_{h_s}) for a batch of parameters (no per-s validation;
        callers must stay inside the validity radius)."""
        s_values = np.asarray(s_values, dtype=float)
        out = np.empty(s_values.size)
        w = self.grid.weights
        n = self.grid.n
        for lo in range(0, s_values.size, chunk):
            sl = s_values[lo:lo + chunk]
            vals, grads, Q = self.curvature_batch(sl)
            det = batch_det(Q.reshape(-1, n - 1, n - 1))
            D = np.sqrt(vals ** 2 + np.sum(grads ** 2, axis=2)).ravel()
            A = _measures.radial_profile(measure, D, n, powers=(0,))[0]
            integrand = vals.ravel() * det * A
            out[lo:lo + chunk] = (integrand.reshape(len(sl), -1) * w).sum(axis=1)
        return out

    # -- validity -----------------------------------------------------------

    def _valid_on(self, bound):
        s_grid = np.linspace(-bound, bound, _VALIDITY_GRID)
        vals, _, Q = self.curvature_batch(s_grid)
        if np.any(vals <= 0.0):
            return False
        N = self.grid.n - 1
        min_eig = np.linalg.eigvalsh(Q.reshape(-1, N, N))[:, 0]
        return bool(np.all(min_eig >= self.delta * self._cache["base_min_eig"]))


def make_family(kind, h, direction, grid, delta=VALIDITY_EIG_FLOOR,
                max_radius=8.0):
    """Build a perturbation family and locate its validity radius by
    bisection (40 steps against the 17-point s-grid predicate)."""
    if kind not in ("additive", "multiplicative"):
        raise FamilyError(f"unknown family kind {kind!r}")
    base_body = body_from_support(h, grid)    # validates the base
    if kind == "multiplicative":
        if np.any(direction.values(grid.nodes) <= 0.0):
            raise FamilyError(
                "multiplicative direction must be strictly positive")
    fam = PerturbationFamily(kind=kind, base=h, direction=direction,
                             grid=grid, delta=delta)
    fam._cache["base_min_eig"] = base_body.min_curvature_eig
    trace = []
    if fam._valid_on(max_radius):
        fam.a = max_radius
        trace.append((max_radius, True))
    else:
        lo, hi = 0.0, max_radius
        trace.append((max_radius, False))
        for _ in range(_BISECTION_STEPS):
            mid = 0.5 * (lo + hi)
            ok = fam._valid_on(mid)
            trace.append((mid, ok))
            if ok:
                lo = mid
            else:
                hi = mid
        fam.a = lo
    if fam.a <= 0.0:
        raise FamilyError("family degenerates for arbitrarily small s")
    fam.search_trace = trace
    return fam
