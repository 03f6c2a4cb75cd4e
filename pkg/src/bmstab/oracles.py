"""Independent cross-checks: Monte Carlo measure estimates, finite
differences, and polygonal approximations.

Nothing here reuses the spherical quadrature, curvature, or radial-moment
machinery: the Monte Carlo route samples the ball uniformly and classifies
points against the support function directly, the polygon route intersects
half-planes exactly, and the finite-difference helpers only evaluate the
callables they are given.  Agreement between these estimates and the main
formulas is what the verification suite leans on."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sphere import _tangent_frame

MC_BATCH = 1 << 16


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------

def central_derivative(fn, x0=0.0, order=1, step=1e-3, vectorized=True):
    """Richardson-refined central difference of a scalar function.

    Combines the classical stencils at widths `step` and `step/2`, removing
    the O(step^2) error term; `fn` may accept an array of evaluation points
    when vectorized."""
    h = float(step)
    if order == 1:
        pts = np.array([x0 - h, x0 - h / 2, x0 + h / 2, x0 + h])
    elif order == 2:
        pts = np.array([x0 - h, x0 - h / 2, x0, x0 + h / 2, x0 + h])
    else:
        raise ValueError("order must be 1 or 2")
    if vectorized:
        vals = np.asarray(fn(pts), dtype=float)
    else:
        vals = np.array([float(fn(p)) for p in pts])
    if order == 1:
        coarse = (vals[3] - vals[0]) / (2 * h)
        fine = (vals[2] - vals[1]) / h
    else:
        coarse = (vals[4] - 2 * vals[2] + vals[0]) / h ** 2
        fine = (vals[3] - 2 * vals[2] + vals[1]) / (h / 2) ** 2
    return (4.0 * fine - coarse) / 3.0


# ---------------------------------------------------------------------------
# Monte Carlo measure of a body
# ---------------------------------------------------------------------------

@dataclass
class McEstimate:
    value: float
    stderr: float
    samples: int
    batches: int
    refined: int
    seed: int

    def agrees_with(self, reference, n_sigma=4.0):
        # the absolute floor covers the deterministic rounding bias of the
        # sampling envelope, which matters only when the indicator is
        # constant across batches and stderr collapses to zero
        floor = 1e-9 * max(1.0, abs(reference))
        return abs(self.value - reference) <= n_sigma * self.stderr + floor


def _coarse_directions(n, seed=1234):
    if n == 2:
        t = np.linspace(0.0, 2 * math.pi, 1024, endpoint=False)
        return np.column_stack([np.cos(t), np.sin(t)])
    if n == 3:
        # Fibonacci spiral: near-uniform covering of S^2
        m = 4096
        i = np.arange(m) + 0.5
        z = 1.0 - 2.0 * i / m
        r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        phi = math.pi * (1.0 + math.sqrt(5.0)) * i
        return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    u = rng.standard_normal((8192, n))
    return u / np.linalg.norm(u, axis=1, keepdims=True)


def _polish_support_max(h, X, u0, g0):
    """Sharpen max_u <x,u> - h(u) for points whose coarse maximum is too
    close to zero to classify.  Projected ascent with Newton steps on the
    sphere, started from the best coarse direction."""
    k, n = u0.shape
    u = u0.copy()
    for _ in range(60):
        d = h.d2_ext0(u)
        xu = np.sum(X * u, axis=1)
        grad_amb = X - xu[:, None] * u - d.grad
        E = np.stack([_tangent_frame(ui) for ui in u])      # (k, n-1, n)
        gf = np.einsum("kap,kp->ka", E, grad_amb)
        Hf = (np.einsum("kap,kpq,kbq->kab", E, d.hess, E)
              + xu[:, None, None] * np.eye(n - 1))
        step = np.empty_like(gf)
        for i in range(k):
            try:
                s = np.linalg.solve(Hf[i], gf[i])
            except np.linalg.LinAlgError:
                s = gf[i]
            if not np.all(np.isfinite(s)) or np.linalg.norm(s) > 0.5:
                s = gf[i] / max(1.0, np.linalg.norm(gf[i]))
            step[i] = s
        u_new = u + np.einsum("kap,ka->kp", E, step)
        u_new /= np.linalg.norm(u_new, axis=1, keepdims=True)
        if np.max(np.linalg.norm(u_new - u, axis=1)) < 1e-14:
            u = u_new
            break
        u = u_new
    g = np.sum(X * u, axis=1) - h.values(u)
    return np.maximum(g, g0)


def mc_measure(measure, body, n_samples=1 << 20, seed=2024):
    """Monte Carlo estimate of gamma(K) with a standard-error bar.

    Uniform samples in the bounding ball of K are classified through the
    support criterion max_u <x,u> - h(u) <= 0 (coarse direction net plus a
    Newton polish for points inside the coarse uncertainty band), then
    weighted by the density at |x|.  Counter-based streams keyed by
    (seed, batch) make the result independent of scheduling."""
    h = body.h
    g = body.grid
    n = g.n
    R_b = float(np.max(body.D)) * (1.0 + 1e-12)
    dirs = _coarse_directions(n)
    hdirs = h.values(dirs)

    # uncertainty of a max over the coarse net: second-order in the net gap
    if n == 2:
        net_gap = 2 * math.pi / len(dirs)
    else:
        net_gap = 2.0 * (len(dirs)) ** (-1.0 / (n - 1))
    curv_scale = float(np.max(np.abs(body.curvature.Q))) + R_b
    band = curv_scale * net_gap ** 2

    vol_ball = math.pi ** (n / 2) / math.gamma(n / 2 + 1) * R_b ** n
    batches = (n_samples + MC_BATCH - 1) // MC_BATCH
    total = 0.0
    total_sq = 0.0
    refined = 0
    for b in range(batches):
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence([seed, b])))
        Z = rng.standard_normal((MC_BATCH, n))
        Z /= np.linalg.norm(Z, axis=1, keepdims=True)
        radii = R_b * rng.random(MC_BATCH) ** (1.0 / n)
        X = Z * radii[:, None]

        gmax = np.max(X @ dirs.T - hdirs[None, :], axis=1)
        unsure = np.abs(gmax) <= band
        if np.any(unsure):
            refined += int(np.sum(unsure))
            i0 = np.argmax(X[unsure] @ dirs.T - hdirs[None, :], axis=1)
            gmax[unsure] = _polish_support_max(
                h, X[unsure], dirs[i0], gmax[unsure])
        inside = gmax <= 0.0
        fv = np.zeros(MC_BATCH)
        fv[inside] = measure.f(radii[inside])
        total += float(np.sum(fv))
        total_sq += float(np.sum(fv ** 2))

    N = batches * MC_BATCH
    mean = total / N
    var = max(total_sq / N - mean ** 2, 0.0)
    value = vol_ball * mean
    stderr = vol_ball * math.sqrt(var / N)
    return McEstimate(value=value, stderr=stderr, samples=N,
                      batches=batches, refined=refined, seed=seed)


# ---------------------------------------------------------------------------
# polygonal bodies from support values (planar)
# ---------------------------------------------------------------------------

@dataclass
class PlanarPolygon:
    vertices: np.ndarray          # (k, 2), counterclockwise
    area: float
    perimeter: float

    def contains(self, pts, tol=0.0):
        pts = np.atleast_2d(pts)
        v = self.vertices
        nxt = np.roll(v, -1, axis=0)
        edge = nxt - v
        rel = pts[:, None, :] - v[None, :, :]
        cross = edge[None, :, 0] * rel[:, :, 1] - edge[None, :, 1] * rel[:, :, 0]
        return np.all(cross >= -tol, axis=1)


_HULL_SCALE = float(1 << 40)


def _convex_hull_ccw(pts):
    """Monotone chain on integer-scaled coordinates for exact orientation."""
    P = np.unique(np.round(pts * _HULL_SCALE).astype(np.int64), axis=0)
    if len(P) < 3:
        raise ValueError("degenerate direction set")
    order = np.lexsort((P[:, 1], P[:, 0]))
    P = P[order]

    def cross(o, a, b):
        # python ints: the scaled products overflow int64
        return ((int(a[0]) - int(o[0])) * (int(b[1]) - int(o[1]))
                - (int(a[1]) - int(o[1])) * (int(b[0]) - int(o[0])))

    lower: list = []
    for p in P:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in P[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = np.array(lower[:-1] + upper[:-1], dtype=np.int64)
    return hull.astype(float) / _HULL_SCALE


def wulff_polygon(directions, support_values):
    """Intersection of the half-planes <x, u_k> <= h_k (planar).

    Uses polar duality: the polygon's vertices correspond to edges of the
    convex hull of the points u_k / h_k, and each vertex solves the two
    adjacent touching-line equations exactly.  Requires all h_k > 0 and the
    origin interior."""
    directions = np.asarray(directions, dtype=float)
    support_values = np.asarray(support_values, dtype=float)
    if np.any(support_values <= 0):
        raise ValueError("support values must be positive")
    dual = directions / support_values[:, None]
    hull = _convex_hull_ccw(dual)
    k = len(hull)
    verts = np.empty((k, 2))
    for i in range(k):
        p = hull[i]
        q = hull[(i + 1) % k]
        Amat = np.array([p, q])
        verts[i] = np.linalg.solve(Amat, np.ones(2))
    nxt = np.roll(verts, -1, axis=0)
    area = 0.5 * float(np.sum(verts[:, 0] * nxt[:, 1] - verts[:, 1] * nxt[:, 0]))
    perim = float(np.sum(np.linalg.norm(nxt - verts, axis=1)))
    return PlanarPolygon(vertices=verts, area=area, perimeter=perim)
