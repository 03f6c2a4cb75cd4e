"""Grids, quadrature and differential operators on the unit sphere S^{n-1}.

Functions on the sphere are represented canonically as polynomials in the
ambient coordinates restricted to the sphere (trigonometric polynomials when
n = 2).  All derivatives are taken analytically through the homogeneous
extensions of the function:

* the 1-homogeneous extension  F(x) = |x| f(x/|x|)  carries the data used by
  support-function geometry (its ambient Hessian restricted to a tangent
  frame is the curvature matrix),
* the 0-homogeneous extension  f(x/|x|)  carries the intrinsic data (its
  ambient gradient at a sphere point is the spherical gradient, the trace of
  its ambient Hessian is the Laplace-Beltrami image).

A black-box representation with central finite differences on the extension
is available as a fallback for functions without a closed form; its accuracy
is correspondingly lower (documented on :class:`CallableSF`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_jacobi


def sphere_area(n):
    """Surface measure of S^{n-1}."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def ball_volume(n):
    """Volume of the unit ball in R^n."""
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


class GridError(ValueError):
    pass


# ---------------------------------------------------------------------------
# second-order derivative bundles (value / gradient / Hessian at node batches)
# ---------------------------------------------------------------------------


@dataclass
class D2:
    """Value, ambient gradient and ambient Hessian of a scalar field at a
    batch of points.  Used for the 0-homogeneous extension of spherical
    functions, so gradients are tangent to the sphere at sphere points."""

    val: np.ndarray    # (m,)
    grad: np.ndarray   # (m, n)
    hess: np.ndarray   # (m, n, n)


def _outer(a, b):
    return np.einsum("mi,mj->mij", a, b)


def d2_combine(parts):
    # linear combination [(coeff, D2), ...]
    val = sum(c * p.val for c, p in parts)
    grad = sum(c * p.grad for c, p in parts)
    hess = sum(c * p.hess for c, p in parts)
    return D2(val, grad, hess)


def d2_mul(a, b):
    val = a.val * b.val
    grad = a.val[:, None] * b.grad + b.val[:, None] * a.grad
    hess = (a.val[:, None, None] * b.hess + b.val[:, None, None] * a.hess
            + _outer(a.grad, b.grad) + _outer(b.grad, a.grad))
    return D2(val, grad, hess)


def d2_power(a, p):
    vp1 = a.val ** (p - 1.0)
    vp2 = a.val ** (p - 2.0)
    val = a.val ** p
    grad = p * vp1[:, None] * a.grad
    hess = (p * vp1[:, None, None] * a.hess
            + p * (p - 1.0) * vp2[:, None, None] * _outer(a.grad, a.grad))
    return D2(val, grad, hess)


def d2_exp(a):
    val = np.exp(a.val)
    grad = val[:, None] * a.grad
    hess = val[:, None, None] * (a.hess + _outer(a.grad, a.grad))
    return D2(val, grad, hess)


def d2_log(a):
    val = np.log(a.val)
    g = a.grad / a.val[:, None]
    hess = a.hess / a.val[:, None, None] - _outer(g, g)
    return D2(val, g, hess)


def d2_const(c, like):
    m, n = like.shape
    return D2(np.full(m, c), np.zeros((m, n)), np.zeros((m, n, n)))


# ---------------------------------------------------------------------------
# radial-polynomial engine:  sums of  c * x^alpha * |x|^m
# ---------------------------------------------------------------------------


class _RadialPoly:
    """Finite sums  sum_k  c_k x^{alpha_k} |x|^{m_k}  on R^n minus the origin.

    Closed under partial differentiation, which is all the homogeneous
    extensions of polynomial restrictions need."""

    __slots__ = ("n", "terms")

    def __init__(self, n, terms):
        self.n = n
        merged = {}
        for key, c in terms.items():
            if c != 0.0:
                merged[key] = merged.get(key, 0.0) + c
        self.terms = {k: v for k, v in merged.items() if v != 0.0}

    def diff(self, i):
        out = {}
        for (alpha, m), c in self.terms.items():
            if alpha[i] > 0:
                a2 = list(alpha)
                a2[i] -= 1
                key = (tuple(a2), m)
                out[key] = out.get(key, 0.0) + c * alpha[i]
            if m != 0:
                a2 = list(alpha)
                a2[i] += 1
                key = (tuple(a2), m - 2)
                out[key] = out.get(key, 0.0) + c * m
        return _RadialPoly(self.n, out)

    def eval(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        r = np.sqrt(np.sum(pts * pts, axis=1))
        out = np.zeros(pts.shape[0])
        for (alpha, m), c in self.terms.items():
            term = np.full(pts.shape[0], c)
            for j, a in enumerate(alpha):
                if a:
                    term = term * pts[:, j] ** a
            if m:
                term = term * r ** m
            out += term
        return out


# ---------------------------------------------------------------------------
# spherical functions
# ---------------------------------------------------------------------------

_PARITY_TOL = 1e-12


class SphericalFunction:
    """Base class: a scalar function on S^{n-1} with analytic access to the
    derivatives of its homogeneous extensions."""

    n: int
    spec: dict | None

    # -- representation hooks -------------------------------------------

    def values(self, U):
        raise NotImplementedError

    def d2_ext0(self, U):
        """Value/gradient/Hessian of the 0-homogeneous extension at unit
        points U (m, n)."""
        raise NotImplementedError

    # -- derived quantities ----------------------------------------------

    def grad1(self, U):
        """Ambient gradient of the 1-homogeneous extension at unit points:
        grad F(u) = f(u) u + spherical gradient."""
        d = self.d2_ext0(U)
        return U * d.val[:, None] + d.grad

    def hess1(self, U):
        """Ambient Hessian of the 1-homogeneous extension at unit points."""
        d = self.d2_ext0(U)
        m, n = U.shape
        eye = np.eye(n)[None, :, :]
        proj = eye - np.einsum("mi,mj->mij", U, U)
        return (proj * d.val[:, None, None]
                + _outer(U, d.grad) + _outer(d.grad, U) + d.hess)

    def spherical_grad(self, U):
        """Spherical gradient (tangent vector field) at unit points."""
        return self.d2_ext0(U).grad

    def third1(self, U):
        raise NotImplementedError(
            "third derivatives are only available for polynomial "
            "representations")

    # -- parity ------------------------------------------------------------

    def parity(self):
        """'even', 'odd' or 'neither', decided by sampling antipodal pairs."""
        if not hasattr(self, "_parity"):
            U = _parity_sample(self.n)
            a = self.values(U)
            b = self.values(-U)
            scale = max(1.0, float(np.max(np.abs(a))))
            if np.max(np.abs(a - b)) <= _PARITY_TOL * scale:
                self._parity = "even"
            elif np.max(np.abs(a + b)) <= _PARITY_TOL * scale:
                self._parity = "odd"
            else:
                self._parity = "neither"
        return self._parity


def _parity_sample(n):
    rng = np.random.Generator(np.random.Philox(key=20240801))
    U = rng.standard_normal((48, n))
    return U / np.linalg.norm(U, axis=1, keepdims=True)


class PolynomialSF(SphericalFunction):
    """Restriction of an ambient polynomial to the sphere.

    Coefficients map a degree multi-index (tuple of length n) to a float.
    Supports exact derivatives of both homogeneous extensions, including the
    third derivatives needed by the cofactor divergence identities."""

    def __init__(self, n, coeffs, spec=None):
        self.n = int(n)
        clean = {}
        for alpha, c in coeffs.items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != self.n:
                raise ValueError("multi-index length does not match dimension")
            c = float(c)
            if c != 0.0:
                clean[alpha] = clean.get(alpha, 0.0) + c
        self.coeffs = {a: c for a, c in clean.items() if c != 0.0}
        self.spec = spec
        self._cache = {}

    @property
    def degree(self):
        return max((sum(a) for a in self.coeffs), default=0)

    # -- construction helpers -------------------------------------------

    @staticmethod
    def constant(n, c, spec=None):
        return PolynomialSF(n, {(0,) * n: c}, spec=spec)

    @staticmethod
    def linear(n, vector, spec=None):
        coeffs = {}
        for i, v in enumerate(vector):
            alpha = [0] * n
            alpha[i] = 1
            coeffs[tuple(alpha)] = v
        return PolynomialSF(n, coeffs, spec=spec)

    @staticmethod
    def cos_harmonic(k, amplitude=1.0, spec=None):
        """amplitude * cos(k theta) on the circle, as a polynomial in
        (x1, x2): the real part of (x1 + i x2)^k."""
        coeffs = {}
        for j in range(0, k + 1, 2):
            coeffs[(k - j, j)] = amplitude * math.comb(k, j) * (-1.0) ** (j // 2)
        if k == 0:
            coeffs = {(0, 0): amplitude}
        return PolynomialSF(2, coeffs, spec=spec)

    @staticmethod
    def sin_harmonic(k, amplitude=1.0, spec=None):
        coeffs = {}
        for j in range(1, k + 1, 2):
            coeffs[(k - j, j)] = amplitude * math.comb(k, j) * (-1.0) ** ((j - 1) // 2)
        return PolynomialSF(2, coeffs, spec=spec)

    # -- algebra ------------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = PolynomialSF.constant(self.n, other)
        if not isinstance(other, PolynomialSF):
            return NotImplemented
        out = dict(self.coeffs)
        for a, c in other.coeffs.items():
            out[a] = out.get(a, 0.0) + c
        return PolynomialSF(self.n, out)

    __radd__ = __add__

    def __neg__(self):
        return PolynomialSF(self.n, {a: -c for a, c in self.coeffs.items()})

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            other = PolynomialSF.constant(self.n, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return PolynomialSF(self.n,
                                {a: c * other for a, c in self.coeffs.items()})
        if not isinstance(other, PolynomialSF):
            return NotImplemented
        out = {}
        for a1, c1 in self.coeffs.items():
            for a2, c2 in other.coeffs.items():
                key = tuple(x + y for x, y in zip(a1, a2))
                out[key] = out.get(key, 0.0) + c1 * c2
        return PolynomialSF(self.n, out)

    __rmul__ = __mul__

    # -- evaluation ---------------------------------------------------------

    def values(self, U):
        U = np.atleast_2d(np.asarray(U, dtype=float))
        out = np.zeros(U.shape[0])
        for alpha, c in self.coeffs.items():
            term = np.full(U.shape[0], c)
            for j, a in enumerate(alpha):
                if a:
                    term = term * U[:, j] ** a
            out += term
        return out

    def _ext(self, shift):
        # radial-poly extension with homogeneity degree `shift`
        key = ("ext", shift)
        if key not in self._cache:
            terms = {(a, shift - sum(a)): c for a, c in self.coeffs.items()}
            self._cache[key] = _RadialPoly(self.n, terms)
        return self._cache[key]

    def _derivs(self, shift, order):
        key = ("derivs", shift, order)
        if key not in self._cache:
            base = {(): self._ext(shift)}
            for level in range(1, order + 1):
                prev = {k: v for k, v in base.items() if len(k) == level - 1}
                for idx, rp in prev.items():
                    start = idx[-1] if idx else 0
                    for i in range(start, self.n):
                        base[idx + (i,)] = rp.diff(i)
            self._cache[key] = base
        return self._cache[key]

    def d2_ext0(self, U):
        U = np.atleast_2d(np.asarray(U, dtype=float))
        m, n = U.shape
        derivs = self._derivs(0, 2)
        val = derivs[()].eval(U)
        grad = np.empty((m, n))
        for i in range(n):
            grad[:, i] = derivs[(i,)].eval(U)
        hess = np.empty((m, n, n))
        for i in range(n):
            for j in range(i, n):
                hij = derivs[(i, j)].eval(U)
                hess[:, i, j] = hij
                hess[:, j, i] = hij
        return D2(val, grad, hess)

    def third1(self, U):
        """Third ambient derivatives of the 1-homogeneous extension,
        (m, n, n, n), symmetric in all three indices."""
        U = np.atleast_2d(np.asarray(U, dtype=float))
        m, n = U.shape
        derivs = self._derivs(1, 3)
        out = np.empty((m, n, n, n))
        for i in range(n):
            for j in range(i, n):
                for k in range(j, n):
                    t = derivs[(i, j, k)].eval(U)
                    for perm in {(i, j, k), (i, k, j), (j, i, k),
                                 (j, k, i), (k, i, j), (k, j, i)}:
                        out[:, perm[0], perm[1], perm[2]] = t
        return out

    def laplace_poly(self):
        """Laplace-Beltrami image as a polynomial restriction (exact)."""
        ext0 = self._ext(0)
        acc = {}
        for i in range(self.n):
            dd = ext0.diff(i).diff(i)
            for (alpha, _m), c in dd.terms.items():
                # restriction to the sphere drops the |x|^m factor
                acc[alpha] = acc.get(alpha, 0.0) + c
        return PolynomialSF(self.n, acc)


class ExprSF(SphericalFunction):
    """Composite function defined by closures over other representations
    (products, powers, exp/log, quotients).  Derivatives are exact chain
    rules on the underlying polynomial data."""

    def __init__(self, n, val_fn, d2_fn, spec=None):
        self.n = n
        self._val_fn = val_fn
        self._d2_fn = d2_fn
        self.spec = spec

    def values(self, U):
        U = np.atleast_2d(np.asarray(U, dtype=float))
        return self._val_fn(U)

    def d2_ext0(self, U):
        U = np.atleast_2d(np.asarray(U, dtype=float))
        return self._d2_fn(U)


def sf_sum(parts, spec=None):
    """Linear combination of spherical functions: parts = [(coeff, sf), ...]."""
    parts = [(float(c), sf) for c, sf in parts]
    n = parts[0][1].n
    if all(isinstance(sf, PolynomialSF) for _, sf in parts):
        out = PolynomialSF(n, {})
        for c, sf in parts:
            out = out + c * sf
        out.spec = spec
        return out

    def val_fn(U):
        return sum(c * sf.values(U) for c, sf in parts)

    def d2_fn(U):
        return d2_combine([(c, sf.d2_ext0(U)) for c, sf in parts])

    return ExprSF(n, val_fn, d2_fn, spec=spec)


def sf_shift(sf, offset, spec=None):
    """sf + constant offset."""
    if isinstance(sf, PolynomialSF):
        out = sf + float(offset)
        out.spec = spec
        return out

    def val_fn(U):
        return sf.values(U) + offset

    def d2_fn(U):
        d = sf.d2_ext0(U)
        return D2(d.val + offset, d.grad, d.hess)

    return ExprSF(sf.n, val_fn, d2_fn, spec=spec)


def sf_product_powers(factors, exp_part=None, scale=1.0, spec=None):
    """scale * exp(g) * prod f_k^{a_k} with polynomial g and f_k.

    The f_k must be strictly positive on the sphere wherever this is
    evaluated (power/quotient representation for geometric means and
    multiplicative perturbation families)."""
    factors = [(sf, float(a)) for sf, a in factors]
    n = factors[0][0].n if factors else exp_part.n

    def val_fn(U):
        out = np.full(U.shape[0], scale)
        if exp_part is not None:
            out = out * np.exp(exp_part.values(U))
        for sf, a in factors:
            out = out * sf.values(U) ** a
        return out

    def d2_fn(U):
        # W = log(value/scale); value = scale * exp(W)
        m, nn = U.shape
        Wg = np.zeros((m, nn))
        Wh = np.zeros((m, nn, nn))
        logv = np.zeros(m)
        if exp_part is not None:
            d = exp_part.d2_ext0(U)
            logv += d.val
            Wg += d.grad
            Wh += d.hess
        for sf, a in factors:
            d = sf.d2_ext0(U)
            logv += a * np.log(d.val)
            g = d.grad / d.val[:, None]
            Wg += a * g
            Wh += a * (d.hess / d.val[:, None, None] - _outer(g, g))
        val = scale * np.exp(logv)
        grad = val[:, None] * Wg
        hess = val[:, None, None] * (_outer(Wg, Wg) + Wh)
        return D2(val, grad, hess)

    return ExprSF(n, val_fn, d2_fn, spec=spec)


def sf_ratio(numer, denom, spec=None):
    """numer / denom with polynomial numer and strictly positive polynomial
    denom.  Unlike the power representation the numerator may vanish."""

    def val_fn(U):
        return numer.values(U) / denom.values(U)

    def d2_fn(U):
        a = numer.d2_ext0(U)
        b = denom.d2_ext0(U)
        return d2_mul(a, d2_power(b, -1.0))

    return ExprSF(numer.n, val_fn, d2_fn, spec=spec)


def sf_exp(inner, spec=None):
    """exp(inner) for polynomial inner (strictly positive result)."""
    return sf_product_powers([], exp_part=inner, spec=spec)


def sf_mul(f, g, spec=None):
    """Pointwise product; either factor may vanish or change sign."""
    if isinstance(f, PolynomialSF) and isinstance(g, PolynomialSF):
        out = f * g
        out.spec = spec
        return out

    def val_fn(U):
        return f.values(U) * g.values(U)

    def d2_fn(U):
        return d2_mul(f.d2_ext0(U), g.d2_ext0(U))

    return ExprSF(f.n, val_fn, d2_fn, spec=spec)


def sf_log(f, spec=None):
    """log(f) for strictly positive f."""

    def val_fn(U):
        return np.log(f.values(U))

    def d2_fn(U):
        return d2_log(f.d2_ext0(U))

    return ExprSF(f.n, val_fn, d2_fn, spec=spec)


class CallableSF(SphericalFunction):
    """Black-box function on the sphere.

    Derivatives come from central finite differences on the homogeneous
    extension with step 1e-5 * max(1, |x|); expect roughly 1e-10 accuracy on
    gradients and 1e-6 on Hessian entries."""

    FD_STEP = 1e-5

    def __init__(self, n, fn, spec=None):
        self.n = n
        self._fn = fn
        self.spec = spec

    def _ext0(self, X):
        r = np.linalg.norm(X, axis=1, keepdims=True)
        return self._fn(X / r)

    def values(self, U):
        U = np.atleast_2d(np.asarray(U, dtype=float))
        return np.asarray(self._fn(U), dtype=float)

    def d2_ext0(self, U):
        U = np.atleast_2d(np.asarray(U, dtype=float))
        m, n = U.shape
        h = self.FD_STEP
        val = self.values(U)
        grad = np.empty((m, n))
        hess = np.empty((m, n, n))
        eye = np.eye(n)
        for i in range(n):
            fp = self._ext0(U + h * eye[i])
            fm = self._ext0(U - h * eye[i])
            grad[:, i] = (fp - fm) / (2.0 * h)
            hess[:, i, i] = (fp - 2.0 * val + fm) / h ** 2
        for i in range(n):
            for j in range(i + 1, n):
                fpp = self._ext0(U + h * (eye[i] + eye[j]))
                fmm = self._ext0(U - h * (eye[i] + eye[j]))
                fpm = self._ext0(U + h * (eye[i] - eye[j]))
                fmp = self._ext0(U - h * (eye[i] - eye[j]))
                hij = (fpp + fmm - fpm - fmp) / (4.0 * h ** 2)
                hess[:, i, j] = hij
                hess[:, j, i] = hij
        return D2(val, grad, hess)


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SphereGrid:
    n: int
    resolution: int
    nodes: np.ndarray        # (m, n) unit vectors
    weights: np.ndarray      # (m,) positive, summing to |S^{n-1}|
    frames: np.ndarray       # (m, n-1, n) orthonormal tangent frames
    exactness_degree: int

    @property
    def count(self):
        return self.nodes.shape[0]


def _circle_nodes(count):
    theta = 2.0 * math.pi * np.arange(count) / count
    nodes = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    weights = np.full(count, 2.0 * math.pi / count)
    return nodes, weights


def _sphere_nodes(n, resolution):
    if n == 2:
        return _circle_nodes(2 * resolution)
    t, wt = roots_jacobi(resolution, (n - 3) / 2.0, (n - 3) / 2.0)
    sub_nodes, sub_w = _sphere_nodes(n - 1, resolution)
    s = np.sqrt(1.0 - t ** 2)
    nodes = np.concatenate(
        [np.column_stack([sub_nodes * si, np.full(sub_nodes.shape[0], ti)])
         for ti, si in zip(t, s)], axis=0)
    weights = np.concatenate([wi * sub_w for wi in wt])
    return nodes, weights


def _tangent_frame(u):
    n = u.size
    order = np.argsort(np.abs(u), kind="stable")
    frame = np.empty((n - 1, n))
    basis = [u]
    k = 0
    for idx in order:
        if k == n - 1:
            break
        v = np.zeros(n)
        v[idx] = 1.0
        for b in basis:
            v = v - np.dot(v, b) * b
        norm = np.linalg.norm(v)
        if norm < 1e-12:
            continue
        v = v / norm
        frame[k] = v
        basis.append(v)
        k += 1
    if k != n - 1:
        raise GridError("frame construction failed")
    return frame


def build_grid(n, resolution):
    """Quadrature grid on S^{n-1}.

    n = 2 uses the periodic trapezoid rule (`resolution` nodes), n = 3 a
    Gauss-Legendre x uniform-azimuth product, n >= 4 the recursive
    Gauss-Jacobi product rule.  Polynomials up to ``exactness_degree`` are
    integrated exactly."""
    if n < 2:
        raise GridError("dimension must be at least 2")
    if resolution < 4:
        raise GridError("resolution below the minimum of 4")
    if n == 2:
        nodes, weights = _circle_nodes(resolution)
        exactness = resolution - 1
    else:
        nodes, weights = _sphere_nodes(n, resolution)
        exactness = 2 * resolution - 1
    frames = np.stack([_tangent_frame(u) for u in nodes], axis=0)
    return SphereGrid(n=n, resolution=resolution, nodes=nodes,
                      weights=weights, frames=frames,
                      exactness_degree=exactness)


def integrate(f, grid):
    """Quadrature of a spherical function (or a node-value array)."""
    if isinstance(f, SphericalFunction):
        if f.n != grid.n:
            raise ValueError("function dimension does not match the grid")
        vals = f.values(grid.nodes)
    else:
        vals = np.asarray(f, dtype=float)
        if vals.shape != (grid.count,):
            raise ValueError("value array does not match the grid size")
    return float(np.sum(grid.weights * vals))


# ---------------------------------------------------------------------------
# differential operators
# ---------------------------------------------------------------------------


def spherical_gradient(psi, u):
    """Spherical gradient at a single unit vector (or batch)."""
    U = np.atleast_2d(np.asarray(u, dtype=float))
    g = psi.spherical_grad(U)
    if np.asarray(u).ndim == 1:
        return g[0]
    return g


@dataclass
class CurvatureField:
    """Per-node curvature matrices Q(h; u) = (h_ij + h delta_ij) in the
    grid's tangent frames, with determinants and smallest eigenvalues."""
    Q: np.ndarray           # (m, n-1, n-1)
    det: np.ndarray         # (m,)
    min_eig: np.ndarray     # (m,)
    grid: SphereGrid = field(repr=False)


def batch_det(Q):
    N = Q.shape[-1]
    if N == 1:
        return Q[:, 0, 0].copy()
    if N == 2:
        return Q[:, 0, 0] * Q[:, 1, 1] - Q[:, 0, 1] * Q[:, 1, 0]
    if N == 3:
        return (Q[:, 0, 0] * (Q[:, 1, 1] * Q[:, 2, 2] - Q[:, 1, 2] * Q[:, 2, 1])
                - Q[:, 0, 1] * (Q[:, 1, 0] * Q[:, 2, 2] - Q[:, 1, 2] * Q[:, 2, 0])
                + Q[:, 0, 2] * (Q[:, 1, 0] * Q[:, 2, 1] - Q[:, 1, 1] * Q[:, 2, 0]))
    return np.linalg.det(Q)


def frame_hessian(hess1_vals, grid):
    """Restrict ambient Hessians (m, n, n) to the tangent frames, giving
    (m, n-1, n-1) matrices."""
    return np.einsum("map,mpq,mbq->mab", grid.frames, hess1_vals, grid.frames)


def curvature_matrix(h, grid):
    """Curvature matrix field of a support-function candidate h."""
    if h.n != grid.n:
        raise ValueError("function dimension does not match the grid")
    Q = frame_hessian(h.hess1(grid.nodes), grid)
    det = batch_det(Q)
    min_eig = np.linalg.eigvalsh(Q)[:, 0]
    return CurvatureField(Q=Q, det=det, min_eig=min_eig, grid=grid)


def laplace_beltrami(psi, grid_or_n=None):
    """Laplace-Beltrami image of psi as a spherical function.

    Exact (polynomial) for polynomial representations; a pointwise evaluator
    backed by the 0-homogeneous Hessian trace otherwise."""
    if isinstance(psi, PolynomialSF):
        return psi.laplace_poly()

    def val_fn(U):
        return np.einsum("mii->m", psi.d2_ext0(U).hess)

    return CallableSF(psi.n, lambda U: val_fn(np.atleast_2d(U)))


def split_mean(psi, grid):
    """Split psi into (mean over the sphere, zero-mean part)."""
    mean = integrate(psi, grid) / sphere_area(grid.n)
    return mean, sf_shift(psi, -mean)


def poincare_ratio(psi, grid):
    """Rayleigh quotient  int |grad psi|^2 / int psi^2  for zero-mean psi."""
    vals = psi.values(grid.nodes)
    total = float(np.sum(grid.weights * vals))
    if abs(total) > 1e-10:
        raise ValueError("poincare_ratio requires a zero-mean function "
                         f"(mean integral {total:.3e})")
    den = float(np.sum(grid.weights * vals * vals))
    if den <= 1e-24:
        raise ValueError("poincare_ratio of an identically zero function")
    g = psi.spherical_grad(grid.nodes)
    num = float(np.sum(grid.weights * np.sum(g * g, axis=1)))
    return num / den


# ---------------------------------------------------------------------------
# harmonic diagnostics (n = 2, 3)
# ---------------------------------------------------------------------------


def harmonic_energies(psi, grid, lmax):
    """L2 energy of psi per spherical-harmonic degree, for n = 2 or 3.

    Returns a dict degree -> squared L2 norm of the projection."""
    n = grid.n
    vals = psi.values(grid.nodes) if isinstance(psi, SphericalFunction) else np.asarray(psi)
    w = grid.weights
    out = {}
    if n == 2:
        theta = np.arctan2(grid.nodes[:, 1], grid.nodes[:, 0])
        c0 = np.sum(w * vals) / (2.0 * math.pi)
        out[0] = 2.0 * math.pi * c0 ** 2
        for k in range(1, lmax + 1):
            a = np.sum(w * vals * np.cos(k * theta)) / math.pi
            b = np.sum(w * vals * np.sin(k * theta)) / math.pi
            out[k] = math.pi * (a ** 2 + b ** 2)
        return out
    if n == 3:
        theta = np.arccos(np.clip(grid.nodes[:, 2], -1.0, 1.0))
        phi = np.arctan2(grid.nodes[:, 1], grid.nodes[:, 0])
        from scipy.special import sph_harm_y
        for l in range(lmax + 1):
            energy = 0.0
            for mm in range(-l, l + 1):
                Y = sph_harm_y(l, abs(mm), theta, phi)
                if mm == 0:
                    basis = Y.real
                elif mm > 0:
                    basis = math.sqrt(2.0) * Y.real
                else:
                    basis = math.sqrt(2.0) * Y.imag
                coeff = np.sum(w * vals * basis)
                energy += coeff ** 2
            out[l] = float(energy)
        return out
    raise ValueError("harmonic energies are implemented for n = 2, 3 only")
