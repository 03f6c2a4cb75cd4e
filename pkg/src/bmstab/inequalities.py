"""Inequality margins near the ball, with independent cross-checks.

Every check consumes a JSON-safe parameter dictionary and produces a
CheckResult carrying the computed margin, the pass decision at an explicit
tolerance, and the disagreement against whichever independent route is
available (finite differences, closed forms, Monte Carlo, polygons).  The
registry at the bottom lets any result be re-run from its stored
parameters; reruns are deterministic."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import measures as _measures
from . import oracles as _oracles
from . import variation as _variation
from .bodies import (ball_body, body_from_support, boundary_inverse_height,
                     log_combine, make_family, measure_of_body,
                     quermassintegrals)
from .funcspecs import sf_from_spec
from .sphere import build_grid, sphere_area
from .variation import variation_at_ball

DEFAULT_MARGIN_TOL = 1e-9

_GRIDS: dict = {}


def _grid(n, resolution):
    key = (int(n), int(resolution))
    if key not in _GRIDS:
        _GRIDS[key] = build_grid(*key)
    return _GRIDS[key]


def _measure(spec):
    return _measures.measure_from_spec(spec)


def _measure_name(mu):
    d = mu.describe()
    kind = d.pop("kind")
    if not d:
        return kind
    inner = ",".join(f"{k}={v!r}" for k, v in sorted(d.items()))
    return f"{kind}({inner})"


@dataclass
class CheckResult:
    check_id: str
    kind: str
    n: int
    measure: str
    margin: float
    tol: float
    passed: bool
    params: dict = field(default_factory=dict)
    R: float | None = None
    expected_failure: bool = False
    oracle_diff: float | None = None
    details: dict = field(default_factory=dict)

    def to_row(self):
        """Flat record for tabular reports."""
        p = self.params
        return {
            "check_id": self.check_id,
            "kind": self.kind,
            "n": self.n,
            "R": "" if self.R is None else repr(float(self.R)),
            "measure": self.measure,
            "eps1": repr(p["eps1"]) if "eps1" in p else "",
            "eps2": repr(p["eps2"]) if "eps2" in p else "",
            "lambda": repr(p["lambda"]) if "lambda" in p else "",
            "margin": repr(float(self.margin)),
            "tol": repr(float(self.tol)),
            "passed": str(bool(self.passed)),
            "expected_failure": str(bool(self.expected_failure)),
            "oracle_diff": ("" if self.oracle_diff is None
                            else repr(float(self.oracle_diff))),
            "seed": str(p.get("seed", "")),
        }


def _mk_id(kind, params):
    bits = [kind]
    for key in ("n", "R", "measure", "psi_name", "family", "t", "seed",
                "resolution"):
        if key in params and params[key] is not None:
            v = params[key]
            if isinstance(v, dict):
                v = v.get("kind", "?")
            bits.append(f"{key}={v}")
    return "|".join(bits)


def _psi(params, n):
    return sf_from_spec(params["psi"], n)


def _fd_scale(a):
    return 1e-2 * min(1.0, a / 4.0)


# ---------------------------------------------------------------------------
# infinitesimal checks at a centered ball
# ---------------------------------------------------------------------------

def check_dim_bm_infinitesimal(params):
    """(1 - 1/n) g'(0)^2 - g''(0) g(0) >= 0 along h_s = R + s psi."""
    n = params["n"]
    R = float(params["R"])
    g = _grid(n, params["resolution"])
    mu = _measure(params["measure"])
    psi = _psi(params, n)
    tol = params.get("tol", DEFAULT_MARGIN_TOL)
    var = variation_at_ball(mu, R, psi, g)
    margin = (n - 1) / n * var.g1 ** 2 - var.g2 * var.g0
    scale = max(var.g1 ** 2, abs(var.g2 * var.g0), 1e-30)

    fam = make_family("additive", sf_from_spec(
        {"type": "constant", "value": R}, n), psi, g)
    h = _fd_scale(fam.a)
    fd2 = _oracles.central_derivative(
        lambda s: fam.measures_along(mu, s), 0.0, order=2, step=h)
    # relative gaps with a floor: a zero second derivative leaves only
    # finite-difference cancellation noise to compare against
    floor = 1e-2 * max(1.0, abs(var.g0))
    route = var.route_gap / max(abs(var.g2), floor)
    fd_rel = abs(var.g2 - fd2) / max(abs(var.g2), abs(fd2), floor)
    res = CheckResult(
        check_id=_mk_id("dim_bm_infinitesimal", params),
        kind="dim_bm_infinitesimal", n=n, R=R, measure=_measure_name(mu),
        margin=margin / scale, tol=tol,
        passed=bool(margin / scale >= -tol), params=params,
        oracle_diff=max(route, fd_rel),
        details={"g0": var.g0, "g1": var.g1, "g2": var.g2,
                 "g2_profile": var.g2_profile, "g2_fd": fd2,
                 "raw_margin": margin, "psi_parity": psi.parity(),
                 "validity_radius": fam.a, "sense": "ge"})
    return res


def check_log_bm_infinitesimal(params):
    """g'(0)^2 - g''_mult(0) g(0) >= 0 (concavity of log gamma along the
    geometric family through the ball); stated for even directions."""
    n = params["n"]
    R = float(params["R"])
    g = _grid(n, params["resolution"])
    mu = _measure(params["measure"])
    psi = _psi(params, n)
    tol = params.get("tol", DEFAULT_MARGIN_TOL)
    parity = psi.parity()
    expected_failure = bool(params.get("expect_failure", False))
    if parity != "even" and not expected_failure:
        raise ValueError(
            "log concavity at the ball is asserted for even directions; "
            "pass expect_failure for odd ones")
    var = variation_at_ball(mu, R, psi, g)
    margin = (var.g1 ** 2 - var.g2_mult * var.g0) / var.g0 ** 2

    ball_sf = sf_from_spec({"type": "constant", "value": R}, n)
    fam = _variation.mult_family_through(ball_sf, psi, g)
    h = _fd_scale(fam.a)
    fd2 = _oracles.central_derivative(
        lambda s: fam.measures_along(mu, s), 0.0, order=2, step=h)
    floor = 1e-2 * max(1.0, abs(var.g0))
    fd_rel = abs(var.g2_mult - fd2) / max(abs(var.g2_mult), abs(fd2), floor)
    ok = margin <= -tol if expected_failure else margin >= -tol
    return CheckResult(
        check_id=_mk_id("log_bm_infinitesimal", params),
        kind="log_bm_infinitesimal", n=n, R=R, measure=_measure_name(mu),
        margin=margin, tol=tol, passed=bool(ok), params=params,
        expected_failure=expected_failure, oracle_diff=fd_rel,
        details={"g0": var.g0, "g1": var.g1, "g2_mult": var.g2_mult,
                 "g2_mult_fd": fd2, "log_corr": var.log_corr,
                 "psi_parity": parity, "sense": "ge"})


def check_dim_bm_decomposition(params):
    """Split of the dimensional margin into the two named quadratic forms:

        B1 = (A f / |S|) ((n-1) I2 - J2) + (A R f' / |S|) I2,
        B2 = ((n-1)/n) f^2 (I0 / |S|)^2,

    margin = B2 - B1; cross-checked against the variation route, which it
    must reproduce up to rounding after normalizing by |S|^2 R^{2n-2}."""
    n = params["n"]
    R = float(params["R"])
    g = _grid(n, params["resolution"])
    mu = _measure(params["measure"])
    psi = _psi(params, n)
    tol = params.get("tol", DEFAULT_MARGIN_TOL)
    d = psi.d2_ext0(g.nodes)
    w = g.weights
    S = sphere_area(n)
    I0 = float(np.sum(w * d.val))
    I2 = float(np.sum(w * d.val ** 2))
    J2 = float(np.sum(w * np.sum(d.grad ** 2, axis=1)))
    mom = _measures.moments(mu, R, n)
    fR = float(np.asarray(mu.f(np.array([R])))[0])
    fpR = float(np.asarray(mu.fprime(np.array([R])))[0])
    B1 = (mom.A * fR / S) * ((n - 1) * I2 - J2) + (mom.A * R * fpR / S) * I2
    B2 = (n - 1) / n * fR ** 2 * (I0 / S) ** 2
    margin = B2 - B1

    var = variation_at_ball(mu, R, psi, g)
    raw = (n - 1) / n * var.g1 ** 2 - var.g2 * var.g0
    normalized = raw / (S ** 2 * R ** (2 * n - 2))
    identity_gap = abs(margin - normalized) / max(abs(B1), abs(B2), 1.0)
    return CheckResult(
        check_id=_mk_id("dim_bm_decomposition", params),
        kind="dim_bm_decomposition", n=n, R=R, measure=_measure_name(mu),
        margin=margin, tol=tol, passed=bool(margin >= -tol), params=params,
        oracle_diff=identity_gap,
        details={"B1": B1, "B2": B2, "variation_margin_normalized": normalized,
                 "sense": "ge"})


def check_ball_dilation(params):
    """Dimensional concavity along pure dilations: with G(r) = gamma(r B),
    G''(R) G(R) <= (1 - 1/n) G'(R)^2, via closed-form growth derivatives."""
    n = params["n"]
    R = float(params["R"])
    mu = _measure(params["measure"])
    tol = params.get("tol", DEFAULT_MARGIN_TOL)
    G, G1, G2 = _measures.ball_growth_derivatives(mu, R, n)
    margin = (n - 1) / n * G1 ** 2 - G2 * G
    scale = max(G1 ** 2, abs(G2 * G), 1e-30)

    fd1 = _oracles.central_derivative(
        lambda r: np.array([_measures.ball_measure(mu, ri, n) for ri in
                            np.atleast_1d(r)]),
        R, order=1, step=1e-3 * R)
    fd2 = _oracles.central_derivative(
        lambda r: np.array([_measures.ball_measure(mu, ri, n) for ri in
                            np.atleast_1d(r)]),
        R, order=2, step=1e-2 * R)
    floor = 1e-2 * max(1.0, abs(G))
    odiff = max(abs(G1 - fd1) / max(abs(G1), floor),
                abs(G2 - fd2) / max(abs(G2), abs(fd2), floor))
    return CheckResult(
        check_id=_mk_id("ball_dilation", params),
        kind="ball_dilation", n=n, R=R, measure=_measure_name(mu),
        margin=margin / scale, tol=tol,
        passed=bool(margin / scale >= -tol), params=params,
        oracle_diff=odiff,
        details={"G": G, "G1": G1, "G2": G2, "G1_fd": fd1, "G2_fd": fd2,
                 "raw_margin": margin, "sense": "ge"})


def check_logbm_ball_form(params):
    """Quadratic-form shape of the log concavity margin at the ball:

        A (n f + R f') I2/|S| - A f J2/|S|  <=  f^2 (I0/|S|)^2

    for even directions, split into mean and oscillation contributions."""
    n = params["n"]
    R = float(params["R"])
    g = _grid(n, params["resolution"])
    mu = _measure(params["measure"])
    psi = _psi(params, n)
    tol = params.get("tol", DEFAULT_MARGIN_TOL)
    expected_failure = bool(params.get("expect_failure", False))
    parity = psi.parity()
    if parity != "even" and not expected_failure:
        raise ValueError(
            "the ball-form bound is asserted for even directions; "
            "pass expect_failure for odd ones")
    d = psi.d2_ext0(g.nodes)
    w = g.weights
    S = sphere_area(n)
    I0 = float(np.sum(w * d.val))
    I2 = float(np.sum(w * d.val ** 2))
    J2 = float(np.sum(w * np.sum(d.grad ** 2, axis=1)))
    mom = _measures.moments(mu, R, n)
    fR = float(np.asarray(mu.f(np.array([R])))[0])
    fpR = float(np.asarray(mu.fprime(np.array([R])))[0])
    lhs = mom.A * (n * fR + R * fpR) * I2 / S - mom.A * fR * J2 / S
    rhs = fR ** 2 * (I0 / S) ** 2
    margin = rhs - lhs

    var = variation_at_ball(mu, R, psi, g)
    normalized = (var.g1 ** 2 - var.g2_mult * var.g0) / (
        S ** 2 * R ** (2 * n - 2))
    identity_gap = abs(margin - normalized) / max(abs(lhs), abs(rhs), 1.0)
    # mean / oscillation split of the direction
    mean = I0 / S
    I2_osc = I2 - mean ** 2 * S
    J2_osc = J2
    contrib_mean = (fR ** 2 - mom.A * (n * fR + R * fpR)) * mean ** 2
    contrib_osc = (mom.A * fR * J2_osc
                   - mom.A * (n * fR + R * fpR) * I2_osc) / S
    # sufficient-condition chain for the oscillation part: spectral gap of
    # the zero-mean component at least 2n, and the profile ratio at least 1/n
    rayleigh_osc = J2_osc / I2_osc if I2_osc > 1e-300 else float("inf")
    profile_ratio = (fR / (n * fR + R * fpR)
                     if abs(n * fR + R * fpR) > 1e-300 else float("inf"))
    case1 = bool(rayleigh_osc >= 2 * n - 1e-8
                 and profile_ratio >= 1.0 / n - 1e-12)
    ok = margin <= -tol if expected_failure else margin >= -tol
    return CheckResult(
        check_id=_mk_id("logbm_ball_form", params),
        kind="logbm_ball_form", n=n, R=R, measure=_measure_name(mu),
        margin=margin, tol=tol, passed=bool(ok), params=params,
        expected_failure=expected_failure, oracle_diff=identity_gap,
        details={"lhs": lhs, "rhs": rhs, "contrib_mean": contrib_mean,
                 "contrib_osc": contrib_osc, "psi_parity": parity,
                 "rayleigh_osc": rayleigh_osc,
                 "profile_ratio": profile_ratio,
                 "sufficient_condition": case1, "sense": "ge"})


# ---------------------------------------------------------------------------
# scans along perturbation families
# ---------------------------------------------------------------------------

_DEFAULT_EPS_FRACS = (-0.75, -0.5, -0.25, 0.25, 0.5, 0.75)
_DEFAULT_LAMBDAS = (0.0, 0.25, 0.5, 0.75, 1.0)


def _base_sf(params, n):
    if "base" in params:
        return sf_from_spec(params["base"], n)
    return sf_from_spec({"type": "constant", "value": float(params["R"])}, n)


def _scan_margins(params, combine):
    n = params["n"]
    g = _grid(n, params["resolution"])
    mu = _measure(params["measure"])
    psi = _psi(params, n)
    base = _base_sf(params, n)
    kind = params.get("family", "additive")
    if kind == "multiplicative":
        from .sphere import sf_exp, sf_ratio
        direction = sf_exp(sf_ratio(psi, base))
    else:
        direction = psi
    fam = make_family(kind, base, direction, g)
    lambdas = params.get("lambdas", _DEFAULT_LAMBDAS)
    if "eps_abs" in params:
        eps = [float(e) for e in params["eps_abs"]]
        worst = max(abs(e) for e in eps)
        if worst > fam.a:
            raise ValueError(
                f"requested perturbation amplitude {worst:g} exceeds the "
                f"family's validity radius {fam.a:g}; shrink eps_abs or "
                "use eps_fracs")
    else:
        fracs = params.get("eps_fracs", _DEFAULT_EPS_FRACS)
        eps = [float(f) * fam.a for f in fracs]
    combos = []
    svals = set(eps)
    for i, e1 in enumerate(eps):
        for e2 in eps[i:]:
            for lam in lambdas:
                sbar = lam * e1 + (1.0 - lam) * e2
                svals.add(sbar)
                combos.append((e1, e2, lam, sbar))
    s_arr = np.array(sorted(svals))
    gam = fam.measures_along(mu, s_arr)
    if np.any(gam <= 0.0):
        raise ValueError("measure vanished along the family")
    lut = dict(zip(s_arr.tolist(), gam.tolist()))
    rows = []
    for e1, e2, lam, sbar in combos:
        m = combine(lut[sbar], lut[e1], lut[e2], lam)
        rows.append((e1, e2, lam, m))
    return fam, rows, lut


def check_scan_dim_bm(params):
    """Dimensional concavity along a family: for support combinations of two
    members, gamma^{1/n} is at least the chord value.  lambda in {0, 1}
    must give a bitwise-zero margin (same table entry on both sides)."""
    n = params["n"]
    mu = _measure(params["measure"])
    tol = params.get("tol", DEFAULT_MARGIN_TOL)
    if params.get("family", "additive") != "additive":
        raise ValueError("dimensional scans combine additively")

    def combine(g_bar, g1, g2, lam):
        return (g_bar ** (1.0 / n)
                - lam * g1 ** (1.0 / n) - (1.0 - lam) * g2 ** (1.0 / n))

    fam, rows, lut = _scan_margins(params, combine)
    g0 = lut[min(lut, key=lambda s: abs(s))]
    margins = np.array([r[3] for r in rows])
    norm = margins / g0 ** (1.0 / n)
    worst = int(np.argmin(norm))
    endpoint = [r[3] for r in rows if r[2] in (0.0, 1.0)]
    return CheckResult(
        check_id=_mk_id("scan_dim_bm", params),
        kind="scan_dim_bm", n=n, R=params.get("R"), measure=_measure_name(mu),
        margin=float(norm[worst]), tol=tol,
        passed=bool(np.all(norm >= -tol)), params=params,
        oracle_diff=max(abs(v) for v in endpoint) if endpoint else None,
        details={"validity_radius": fam.a, "combos": len(rows),
                 "worst": {"eps1": rows[worst][0], "eps2": rows[worst][1],
                           "lambda": rows[worst][2]},
                 "psi_parity": _psi(params, n).parity(), "sense": "ge"})


def check_scan_log_bm(params):
    """Log concavity along a multiplicative family: log gamma at the
    geometric combination dominates the chord, for even directions on a
    symmetric base."""
    n = params["n"]
    mu = _measure(params["measure"])
    tol = params.get("tol", DEFAULT_MARGIN_TOL)
    params = dict(params)
    params.setdefault("family", "multiplicative")
    if params["family"] != "multiplicative":
        raise ValueError("log scans combine geometrically")
    psi = _psi(params, n)
    expected_failure = bool(params.get("expect_failure", False))
    if psi.parity() != "even" and not expected_failure:
        raise ValueError("log scans are asserted for even directions; "
                         "pass expect_failure otherwise")

    def combine(g_bar, g1, g2, lam):
        return (math.log(g_bar)
                - lam * math.log(g1) - (1.0 - lam) * math.log(g2))

    fam, rows, lut = _scan_margins(params, combine)
    margins = np.array([r[3] for r in rows])
    worst = int(np.argmin(margins))
    endpoint = [r[3] for r in rows if r[2] in (0.0, 1.0)]
    if expected_failure:
        ok = margins.min() <= -tol
    else:
        ok = bool(np.all(margins >= -tol))
    return CheckResult(
        check_id=_mk_id("scan_log_bm", params),
        kind="scan_log_bm", n=n, R=params.get("R"), measure=_measure_name(mu),
        margin=float(margins[worst]), tol=tol, passed=bool(ok),
        params=params, expected_failure=expected_failure,
        oracle_diff=max(abs(v) for v in endpoint) if endpoint else None,
        details={"validity_radius": fam.a, "combos": len(rows),
                 "worst": {"eps1": rows[worst][0], "eps2": rows[worst][1],
                           "lambda": rows[worst][2]},
                 "psi_parity": psi.parity(), "sense": "ge"})


# ---------------------------------------------------------------------------
# shifted-ball counterexample (planar, lebesgue)
# ---------------------------------------------------------------------------

def check_shift_counterexample(params):
    """Geometric mean of a shifted disk and the unit disk loses area:

        area = pi - (pi/4) (1 - sqrt(1 - t^2)) < pi,

    so the log-concavity margin is genuinely negative once the center
    moves: symmetry matters.  The closed form, the quadrature area, the
    polygonal area, and (optionally) Monte Carlo must all agree."""
    t = float(params["t"])
    if not 0.0 < t < 1.0:
        raise ValueError("shift parameter must lie in (0, 1)")
    n = 2
    g = _grid(n, params["resolution"])
    mu = _measure(params.get("measure", {"kind": "lebesgue"}))
    if mu.kind != "lebesgue":
        raise ValueError("the closed form is for unweighted area")
    tol = params.get("tol", 1e-6)
    h1 = sf_from_spec({"type": "sum", "parts": [
        [1.0, {"type": "constant", "value": 1.0}],
        [t, {"type": "first_harmonic"}]]}, n)
    h2 = sf_from_spec({"type": "constant", "value": 1.0}, n)
    K1 = body_from_support(h1, g)
    K2 = body_from_support(h2, g)
    Kg = log_combine(K1, K2, 0.5)
    a1 = measure_of_body(mu, K1)
    a2 = measure_of_body(mu, K2)
    ag = measure_of_body(mu, Kg)
    margin = math.log(ag) - 0.5 * (math.log(a1) + math.log(a2))
    closed = math.pi - (math.pi / 4.0) * (1.0 - math.sqrt(1.0 - t * t))
    closed_gap = abs(ag - closed) / closed

    m_dirs = int(params.get("polygon_directions", 1440))
    ang = np.linspace(0.0, 2.0 * math.pi, m_dirs, endpoint=False)
    dirs = np.column_stack([np.cos(ang), np.sin(ang)])
    poly = _oracles.wulff_polygon(dirs, Kg.h.values(dirs))
    poly_gap = abs(poly.area - closed) / closed

    details = {"area_geometric_mean": ag, "area_closed_form": closed,
               "area_polygon": poly.area, "deficit": math.pi - ag,
               "sense": "le"}
    odiff = max(closed_gap, poly_gap)
    if params.get("mc_samples"):
        est = _oracles.mc_measure(mu, Kg, n_samples=int(params["mc_samples"]),
                                  seed=int(params.get("seed", 2024)))
        details["area_mc"] = est.value
        details["area_mc_stderr"] = est.stderr
        details["mc_z"] = (est.value - closed) / est.stderr
        if not est.agrees_with(closed):
            odiff = max(odiff, abs(est.value - closed))
    passed = margin <= -tol and closed_gap < 1e-8 and poly_gap < 1e-4
    return CheckResult(
        check_id=_mk_id("shift_counterexample", params),
        kind="shift_counterexample", n=n, R=1.0, measure=_measure_name(mu),
        margin=margin, tol=tol, passed=bool(passed), params=params,
        expected_failure=True, oracle_diff=odiff, details=details)


# ---------------------------------------------------------------------------
# cone-measure form and boundary functionals
# ---------------------------------------------------------------------------

def check_cone_inequality(params):
    """Normalized cone weight dVbar = h det Q du / (n V_n(K)).  For even
    directions on a symmetric body:

      int psi^2 (1 + h tr Q^{-1}) / h^2 dVbar - n (int psi/h dVbar)^2
          <=  int <Q^{-1} grad psi, grad psi> / h dVbar.

    details carry the always-true Cauchy-Schwarz margin and the weaker
    margin with the square of the mean replaced by the mean square."""
    n = params["n"]
    g = _grid(n, params["resolution"])
    mu_name = "cone"
    psi = _psi(params, n)
    tol = params.get("tol", DEFAULT_MARGIN_TOL)
    expected_failure = bool(params.get("expect_failure", False))
    parity = psi.parity()
    base = _base_sf(params, n)
    body = body_from_support(base, g)
    if parity != "even" and not expected_failure:
        raise ValueError("the cone-measure bound is asserted for even "
                         "directions; pass expect_failure for odd ones")
    w = g.weights
    h = body.hvals
    Q = body.curvature.Q
    det = body.curvature.det
    vol = quermassintegrals(body)[n]
    cone_w = w * h * det / (n * vol)
    weight_total = float(np.sum(cone_w))

    d = psi.d2_ext0(g.nodes)
    Qinv = np.linalg.inv(Q)
    trQinv = np.trace(Qinv, axis1=1, axis2=2)
    # tangential gradient in frame coordinates
    E = g.frames
    gf = np.einsum("map,mp->ma", E, d.grad)
    quad = np.einsum("mab,ma,mb->m", Qinv, gf, gf)

    lhs_density = d.val ** 2 * (1.0 + h * trQinv) / h ** 2
    mean_ratio = float(np.sum(cone_w * d.val / h))
    mean_sq_ratio = float(np.sum(cone_w * (d.val / h) ** 2))
    lhs = float(np.sum(cone_w * lhs_density)) - n * mean_ratio ** 2
    rhs = float(np.sum(cone_w * quad / h))
    margin = rhs - lhs
    cs_margin = n * (mean_sq_ratio - mean_ratio ** 2)
    weak_margin = rhs - (float(np.sum(cone_w * lhs_density))
                         - n * mean_sq_ratio)
    ok = margin <= -tol if expected_failure else margin >= -tol
    return CheckResult(
        check_id=_mk_id("cone_inequality", params),
        kind="cone_inequality", n=n, R=params.get("R"), measure=mu_name,
        margin=margin, tol=tol, passed=bool(ok), params=params,
        expected_failure=expected_failure,
        oracle_diff=abs(weight_total - 1.0),
        details={"lhs": lhs, "rhs": rhs, "cs_margin": cs_margin,
                 "weak_margin": weak_margin, "weight_total": weight_total,
                 "psi_parity": parity, "sense": "ge"})


def check_strengthened_minkowski(params):
    """Quermassintegral chain with the boundary inverse-height functional:

        V_n (2 pi V_{n-2} + Ibd) <= 4 V_{n-1}^2,   Ibd = int det Q / h du,

    with equality for centered balls (any radius, any n); the unscaled
    combination V_n (V_{n-2} + Ibd) - V_{n-1}^2 is reported alongside, and
    Minkowski's second inequality V_n V_{n-2} <= (1-1/n) V_{n-1}^2 rides
    along in the details."""
    n = params["n"]
    g = _grid(n, params["resolution"])
    tol = params.get("tol", DEFAULT_MARGIN_TOL)
    base = _base_sf(params, n)
    body = body_from_support(base, g)
    V = quermassintegrals(body)
    ibd = boundary_inverse_height(body)
    cal = 4.0 * V[n - 1] ** 2 - V[n] * (2.0 * math.pi * V[n - 2] + ibd)
    literal = V[n - 1] ** 2 - V[n] * (V[n - 2] + ibd)
    mink2 = (n - 1) / n * V[n - 1] ** 2 - V[n] * V[n - 2]
    scale = max(V[n - 1] ** 2, 1e-30)
    return CheckResult(
        check_id=_mk_id("strengthened_minkowski", params),
        kind="strengthened_minkowski", n=n, R=params.get("R"),
        measure="lebesgue", margin=cal / scale, tol=tol,
        passed=bool(cal / scale >= -tol), params=params,
        oracle_diff=None,
        details={"V": V, "boundary_inverse_height": ibd,
                 "margin_calibrated": cal, "margin_literal": literal,
                 "minkowski_second_margin": mink2, "sense": "ge"})


# ---------------------------------------------------------------------------
# oracle agreement checks
# ---------------------------------------------------------------------------

def check_mc_agreement(params):
    """Quadrature measure of a body against the Monte Carlo estimate;
    margin is the z-score gap 4 - |z|."""
    n = params["n"]
    g = _grid(n, params["resolution"])
    mu = _measure(params["measure"])
    base = _base_sf(params, n)
    body = body_from_support(base, g)
    value = measure_of_body(mu, body)
    est = _oracles.mc_measure(mu, body,
                              n_samples=int(params.get("mc_samples", 1 << 18)),
                              seed=int(params.get("seed", 2024)))
    z = (est.value - value) / est.stderr if est.stderr > 0 else 0.0
    margin = 4.0 - abs(z)
    return CheckResult(
        check_id=_mk_id("mc_agreement", params),
        kind="mc_agreement", n=n, R=params.get("R"), measure=_measure_name(mu),
        margin=margin, tol=0.0, passed=bool(margin >= 0.0), params=params,
        oracle_diff=abs(est.value - value),
        details={"quadrature": value, "mc": est.value,
                 "mc_stderr": est.stderr, "z": z, "samples": est.samples,
                 "refined": est.refined, "sense": "ge"})


def check_polygon_agreement(params):
    """Planar area from the curvature route against the exact circumscribed
    polygon at m directions; the polygon is larger by O(1/m^2)."""
    n = 2
    g = _grid(n, params["resolution"])
    base = _base_sf(params, n)
    body = body_from_support(base, g)
    area = quermassintegrals(body)[2]
    m = int(params.get("polygon_directions", 720))
    tol = params.get("tol", 1e-4)
    ang = np.linspace(0.0, 2.0 * math.pi, m, endpoint=False)
    dirs = np.column_stack([np.cos(ang), np.sin(ang)])
    poly = _oracles.wulff_polygon(dirs, body.h.values(dirs))
    gap = poly.area - area
    passed = 0.0 <= gap <= tol
    return CheckResult(
        check_id=_mk_id("polygon_agreement", params),
        kind="polygon_agreement", n=n, R=params.get("R"),
        measure="lebesgue", margin=gap, tol=tol, passed=bool(passed),
        params=params, oracle_diff=abs(gap),
        details={"area_quadrature": area, "area_polygon": poly.area,
                 "directions": m, "vertices": len(poly.vertices),
                 "sense": "le"})


# ---------------------------------------------------------------------------
# identity residual checks
# ---------------------------------------------------------------------------

def check_moment_identities(params):
    """Residuals of f(D) = n A + D B and f'(D) = (n+1) B + D C."""
    n = params["n"]
    R = float(params["R"])
    mu = _measure(params["measure"])
    tol = params.get("tol", 1e-10)
    r1, r2 = _measures.moment_identities(mu, R, n)
    resid = max(abs(r1), abs(r2))
    return CheckResult(
        check_id=_mk_id("moment_identities", params),
        kind="moment_identities", n=n, R=R, measure=_measure_name(mu),
        margin=resid, tol=tol, passed=bool(resid <= tol), params=params,
        oracle_diff=None,
        details={"residual_value": r1, "residual_slope": r2, "sense": "le"})


def check_divergence_identities(params):
    """Pointwise divergence-free residual of the cofactor rows plus the two
    integration-by-parts symmetries, for a polynomial support function."""
    n = params["n"]
    g = _grid(n, params["resolution"])
    tol = params.get("tol", 1e-11)
    base = _base_sf(params, n)
    psi = _psi(params, n)
    omega = sf_from_spec(params["omega"], n)
    cy = _variation.cheng_yau_residual(base, g)
    r1, r2 = _variation.ibp_residuals(base, psi, omega, g)
    resid = max(cy, r1, r2)
    return CheckResult(
        check_id=_mk_id("divergence_identities", params),
        kind="divergence_identities", n=n, R=params.get("R"),
        measure="none", margin=resid, tol=tol,
        passed=bool(resid <= tol), params=params, oracle_diff=None,
        details={"cofactor_divergence": cy, "ibp_linear": r1,
                 "ibp_trilinear": r2, "sense": "le"})


def check_second_variation_routes(params):
    """Agreement of the moment-route and profile-route second variations at
    the ball (these use disjoint measure data)."""
    n = params["n"]
    R = float(params["R"])
    g = _grid(n, params["resolution"])
    mu = _measure(params["measure"])
    psi = _psi(params, n)
    tol = params.get("tol", 1e-10)
    var = variation_at_ball(mu, R, psi, g)
    rel = var.route_gap / max(abs(var.g2_moment), abs(var.g2_profile), 1e-30)
    return CheckResult(
        check_id=_mk_id("second_variation_routes", params),
        kind="second_variation_routes", n=n, R=R, measure=_measure_name(mu),
        margin=rel, tol=tol, passed=bool(rel <= tol), params=params,
        oracle_diff=None,
        details={"g2_moment": var.g2_moment, "g2_profile": var.g2_profile,
                 "sense": "le"})


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

CHECKS = {
    "dim_bm_infinitesimal": check_dim_bm_infinitesimal,
    "log_bm_infinitesimal": check_log_bm_infinitesimal,
    "dim_bm_decomposition": check_dim_bm_decomposition,
    "ball_dilation": check_ball_dilation,
    "logbm_ball_form": check_logbm_ball_form,
    "scan_dim_bm": check_scan_dim_bm,
    "scan_log_bm": check_scan_log_bm,
    "shift_counterexample": check_shift_counterexample,
    "cone_inequality": check_cone_inequality,
    "strengthened_minkowski": check_strengthened_minkowski,
    "mc_agreement": check_mc_agreement,
    "polygon_agreement": check_polygon_agreement,
    "moment_identities": check_moment_identities,
    "divergence_identities": check_divergence_identities,
    "second_variation_routes": check_second_variation_routes,
}


def run_check(kind, params):
    if kind not in CHECKS:
        raise KeyError(f"unknown check kind {kind!r}")
    return CHECKS[kind](params)


def rerun(result):
    """Re-execute a check from its stored parameters."""
    if isinstance(result, CheckResult):
        return run_check(result.kind, result.params)
    return run_check(result["kind"], result["params"])
