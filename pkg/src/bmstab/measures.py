"""Rotation-invariant log-concave measures and their radial moments.

A measure is described by the radial profile f of its density F(x) = f(|x|),
together with analytic first and second derivatives.  Densities are kept
unnormalized: the Gaussian profile is exp(-r^2/2) without the usual constant.

The moment triple at a scale D collects

    A = int_0^1 t^{n-1} f(tD) dt
    B = int_0^1 t^n     f'(tD) dt
    C = int_0^1 t^{n+1} f''(tD) dt

computed by an adaptive Gauss-Kronrod rule with interval bisection to a fixed
absolute tolerance.  The integrals obey two closed identities used as
self-checks throughout,

    f(D)  = n A + D B        and        f'(D) = (n+1) B + D C,

both consequences of integrating d/dt [t^n f(tD)] and d/dt [t^{n+1} f'(tD)].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .sphere import sphere_area

QUAD_TOL = 1e-13
_MAX_PANELS = 2048

# (G7, K15) Gauss-Kronrod pair on [-1, 1]
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

_KRONROD_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])        # 15 ascending
_KRONROD_W = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GAUSS_MASK = np.zeros(15, dtype=bool)
_GAUSS_MASK[1::2] = True                                         # embedded G7
_GAUSS_W = np.concatenate([_WG[:-1], _WG[::-1]])


class QuadratureError(RuntimeError):
    pass


class MeasureValidationError(ValueError):
    pass


def adaptive_gk(fvec, a, b, tol=QUAD_TOL):
    """Adaptive (G7, K15) quadrature of a batch of integrands over [a, b].

    fvec maps an array of abscissae (T,) to values (T, B); the same panel
    subdivision is shared by the whole batch and refined until every batch
    member's accumulated error estimate falls below the absolute tolerance.
    Returns an array of shape (B,)."""

    def panel(lo, hi):
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        vals = fvec(mid + half * _KRONROD_NODES)            # (15, B)
        k = half * np.einsum("t,tb->b", _KRONROD_W, vals)
        g = half * np.einsum("t,tb->b", _GAUSS_W, vals[_GAUSS_MASK])
        return [lo, hi, k, np.abs(k - g)]

    panels = [panel(a, b)]
    while True:
        total_err = np.sum([p[3] for p in panels], axis=0)
        if np.all(total_err <= tol):
            break
        if len(panels) >= _MAX_PANELS:
            raise QuadratureError(
                f"adaptive quadrature failed to reach tol={tol:g} "
                f"with {len(panels)} panels")
        worst = max(range(len(panels)), key=lambda i: float(np.max(panels[i][3])))
        lo, hi = panels[worst][0], panels[worst][1]
        mid = 0.5 * (lo + hi)
        panels[worst] = panel(lo, mid)
        panels.insert(worst + 1, panel(mid, hi))
    return np.sum([p[2] for p in panels], axis=0)


# ---------------------------------------------------------------------------
# measures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RadialMeasure:
    kind: str
    f: Callable = field(repr=False)
    fprime: Callable = field(repr=False)
    fsecond: Callable = field(repr=False)
    params: dict = field(default_factory=dict)

    def describe(self):
        out = {"kind": self.kind}
        out.update(self.params)
        return out


def _validate_profile(kind, f, fprime, fsecond):
    r = np.concatenate(([0.0], np.geomspace(1e-4, 100.0, 160)))
    fv = np.asarray(f(r), dtype=float)
    if np.any(fv < -1e-12):
        bad = r[np.argmin(fv)]
        raise MeasureValidationError(
            f"{kind}: density negative at r={bad:.6g}")
    fp = np.asarray(fprime(r), dtype=float)
    if np.any(fp > 1e-12):
        bad = r[int(np.argmax(fp))]
        raise MeasureValidationError(
            f"{kind}: density increasing at r={bad:.6g} (f'={fp.max():.3e})")
    # log-concavity (log f)'' = (f'' f - f'^2)/f^2 <= 0 wherever f > 0;
    # the second derivative may blow up at r = 0, so check r > 0 only, and
    # skip radii where f^2 underflows.
    pos = (fv > 1e-150) & (r > 0)
    fs = np.asarray(fsecond(r[pos]), dtype=float)
    logconc = (fs * fv[pos] - fp[pos] ** 2) / fv[pos] ** 2
    if np.any(logconc > 1e-10):
        bad = r[pos][int(np.argmax(logconc))]
        raise MeasureValidationError(
            f"{kind}: density not log-concave at r={bad:.6g} "
            f"((log f)''={logconc.max():.3e})")


def make_measure(kind, p=None, f=None, fprime=None, fsecond=None, name=None):
    """Construct a rotation-invariant log-concave measure.

    kind is one of 'lebesgue', 'gaussian', 'exp_power' (with exponent p >= 1)
    or 'custom' (with analytic f, fprime, fsecond).  Every profile is
    validated for nonnegativity, monotonicity and log-concavity on a
    log-spaced radius sample."""
    if kind == "lebesgue":
        meas = RadialMeasure(
            kind="lebesgue",
            f=lambda r: np.ones_like(np.asarray(r, dtype=float)),
            fprime=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
            fsecond=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
        )
    elif kind == "gaussian":
        meas = RadialMeasure(
            kind="gaussian",
            f=lambda r: np.exp(-0.5 * np.asarray(r, dtype=float) ** 2),
            fprime=lambda r: -np.asarray(r, dtype=float)
            * np.exp(-0.5 * np.asarray(r, dtype=float) ** 2),
            fsecond=lambda r: (np.asarray(r, dtype=float) ** 2 - 1.0)
            * np.exp(-0.5 * np.asarray(r, dtype=float) ** 2),
        )
    elif kind == "exp_power":
        if p is None or p < 1:
            raise MeasureValidationError("exp_power requires exponent p >= 1")
        p = float(p)

        def f_(r, p=p):
            r = np.asarray(r, dtype=float)
            return np.exp(-r ** p)

        def fp_(r, p=p):
            r = np.asarray(r, dtype=float)
            with np.errstate(divide="ignore", invalid="ignore"):
                out = -p * r ** (p - 1.0) * np.exp(-r ** p)
            if p == 1.0:
                out = -np.exp(-r)
            return out

        def fs_(r, p=p):
            r = np.asarray(r, dtype=float)
            with np.errstate(divide="ignore", invalid="ignore"):
                out = (p * p * r ** (2.0 * p - 2.0)
                       - p * (p - 1.0) * r ** (p - 2.0)) * np.exp(-r ** p)
            if p == 1.0:
                out = np.exp(-r)
            return out

        meas = RadialMeasure(kind="exp_power", f=f_, fprime=fp_, fsecond=fs_,
                             params={"p": p})
    elif kind == "custom":
        if f is None or fprime is None or fsecond is None:
            raise MeasureValidationError(
                "custom measures must supply f, fprime and fsecond")
        meas = RadialMeasure(kind=name or "custom", f=f, fprime=fprime,
                             fsecond=fsecond)
    else:
        raise MeasureValidationError(f"unknown measure kind {kind!r}")
    _validate_profile(meas.kind, meas.f, meas.fprime, meas.fsecond)
    return meas


def measure_from_spec(spec):
    spec = dict(spec)
    kind = spec.pop("kind")
    return make_measure(kind, **spec)


# ---------------------------------------------------------------------------
# moments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MomentTriple:
    A: float
    B: float
    C: float
    D: float
    n: int


def moments(measure, D, n, tol=QUAD_TOL):
    """Radial moment triple (A, B, C) of the measure at scale D."""
    D = float(D)

    def fvec(t):
        td = t * D
        return np.column_stack([
            t ** (n - 1) * measure.f(td),
            t ** n * measure.fprime(td),
            t ** (n + 1) * measure.fsecond(td),
        ])

    a, b, c = adaptive_gk(fvec, 0.0, 1.0, tol=tol)
    return MomentTriple(A=float(a), B=float(b), C=float(c), D=D, n=n)


def moment_identities(measure, R, n):
    """Residuals of the two moment identities at D = R.

    Returns (|f(R) - (nA + RB)|, |f'(R) - ((n+1)B + RC)|)."""
    t = moments(measure, R, n)
    res1 = abs(float(measure.f(R)) - (n * t.A + R * t.B))
    res2 = abs(float(measure.fprime(R)) - ((n + 1) * t.B + R * t.C))
    return res1, res2


def radial_profile(measure, D, n, powers=(0,), tol=QUAD_TOL):
    """Vectorized moments over an array of scales D.

    powers selects which of (A, B, C) to compute: 0 -> A, 1 -> B, 2 -> C.
    Returns an array of shape (len(powers), len(D)).  Repeated scales are
    deduplicated before integrating."""
    D = np.asarray(D, dtype=float).ravel()
    uniq, inverse = np.unique(D, return_inverse=True)
    fns = {0: measure.f, 1: measure.fprime, 2: measure.fsecond}

    def fvec(t):
        td = np.outer(t, uniq)                    # (T, U)
        cols = []
        for p in powers:
            cols.append(t[:, None] ** (n - 1 + p) * fns[p](td))
        return np.concatenate(cols, axis=1)       # (T, len(powers)*U)

    flat = adaptive_gk(fvec, 0.0, 1.0, tol=tol)
    out = flat.reshape(len(powers), uniq.size)
    return out[:, inverse]


def ball_measure(measure, radius, n, tol=QUAD_TOL):
    """Total measure of a centered ball: |S^{n-1}| * r^n * A(r)."""
    if radius == 0:
        return 0.0
    t = moments(measure, radius, n, tol=tol)
    return sphere_area(n) * radius ** n * t.A


def ball_growth_derivatives(measure, R, n):
    """(G, G', G'') for G(r) = measure of the centered r-ball, at r = R."""
    s = sphere_area(n)
    G = ball_measure(measure, R, n)
    fR = float(measure.f(R))
    fpR = float(measure.fprime(R))
    Gp = s * R ** (n - 1) * fR
    Gpp = s * ((n - 1) * R ** (n - 2) * fR + R ** (n - 1) * fpR)
    return G, Gp, Gpp
