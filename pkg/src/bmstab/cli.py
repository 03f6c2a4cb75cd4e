"""Command-line entry point.

Subcommands:

  run                execute a battery of checks from a JSON config (or the
                     built-in default battery) and write report.csv /
                     report.json (optionally margins.svg)
  verify-identities  run only the exact-identity residual checks
  demo-shift         the shifted-disk counterexample with all oracles
  list-checks        enumerate registered check kinds

Exit codes: 0 all checks passed (expected failures count as passes when the
failure materializes), 1 configuration error, 2 at least one check failed.

Set BM_STABILITY_THREADS to cap the linear-algebra thread pools before
numpy is loaded (useful for reproducible timings)."""

import os

_threads = os.environ.get("BM_STABILITY_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                 "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import argparse
import csv
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .bodies import FamilyError, NonPositiveSupport, NotConvex
from .inequalities import CHECKS, run_check

SCHEMA_VERSION = 1

CSV_FIELDS = ["check_id", "kind", "n", "R", "measure", "eps1", "eps2",
              "lambda", "margin", "tol", "passed", "expected_failure",
              "oracle_diff", "seed"]


class ConfigError(ValueError):
    pass


def _jsonable(x):
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, int, float, str)) or x is None:
        return x
    return repr(x)


# ---------------------------------------------------------------------------
# default battery
# ---------------------------------------------------------------------------

LEB = {"kind": "lebesgue"}
GAU = {"kind": "gaussian"}
EP1 = {"kind": "exp_power", "p": 1}
EP3 = {"kind": "exp_power", "p": 3}

PSI_SUITE = [
    ("constant", {"type": "constant", "value": 1.0}),
    ("first_harmonic", {"type": "first_harmonic"}),
    ("second_harmonic", {"type": "second_harmonic"}),
    ("random_even", {"type": "random_even", "seed": 20240817,
                     "amplitude": 1.0}),
]

_RES = {2: 160, 3: 16, 4: 10}


def _perturbed_base(n, eps=0.1):
    return {"type": "sum", "parts": [
        [1.0, {"type": "constant", "value": 1.0}],
        [eps, {"type": "second_harmonic"}]]}


def identity_battery():
    checks = []
    for n in (2, 3):
        for R in (0.5, 1.0, 2.0):
            for mu in (LEB, GAU, EP1, EP3):
                checks.append({"kind": "moment_identities",
                               "params": {"n": n, "R": R, "measure": mu}})
    for n in (2, 3):
        for mu in (LEB, GAU, EP3):
            for name, psi in PSI_SUITE[:1] + PSI_SUITE[2:3]:
                checks.append({"kind": "second_variation_routes",
                               "params": {"n": n, "R": 1.1, "measure": mu,
                                          "resolution": _RES[n], "psi": psi,
                                          "psi_name": name}})
    bases = {
        2: {"type": "sum", "parts": [
            [1.0, {"type": "constant", "value": 1.0}],
            [0.05, {"type": "cos_harmonic", "k": 3}]]},
        3: {"type": "poly", "terms": [[[0, 0, 0], 1.0], [[1, 1, 0], 0.15],
                                      [[2, 0, 0], 0.1]]},
        4: {"type": "poly", "terms": [[[0, 0, 0, 0], 1.0],
                                      [[1, 1, 0, 0], 0.1]]},
    }
    for n in (2, 3, 4):
        checks.append({"kind": "divergence_identities",
                       "params": {"n": n, "resolution": _RES[n],
                                  "base": bases[n],
                                  "psi": {"type": "first_harmonic"},
                                  "omega": {"type": "second_harmonic"}}})
    return checks


def default_battery():
    checks = identity_battery()
    for n in (2, 3):
        for mu in (LEB, GAU, EP3):
            for name, psi in PSI_SUITE:
                checks.append({"kind": "dim_bm_infinitesimal",
                               "params": {"n": n, "R": 1.0, "measure": mu,
                                          "resolution": _RES[n], "psi": psi,
                                          "psi_name": name}})
                if name != "first_harmonic":
                    checks.append({"kind": "log_bm_infinitesimal",
                                   "params": {"n": n, "R": 1.0, "measure": mu,
                                              "resolution": _RES[n],
                                              "psi": psi, "psi_name": name}})
            checks.append({"kind": "dim_bm_decomposition",
                           "params": {"n": n, "R": 1.0, "measure": mu,
                                      "resolution": _RES[n],
                                      "psi": PSI_SUITE[3][1],
                                      "psi_name": "random_even"}})
            checks.append({"kind": "logbm_ball_form",
                           "params": {"n": n, "R": 0.8, "measure": mu,
                                      "resolution": _RES[n],
                                      "psi": PSI_SUITE[2][1],
                                      "psi_name": "second_harmonic"}})
    for n in (2, 3, 4):
        for R in (0.7, 1.0, 1.5):
            for mu in (LEB, GAU, EP3):
                checks.append({"kind": "ball_dilation",
                               "params": {"n": n, "R": R, "measure": mu}})
    for n in (2, 3):
        for mu in (LEB, GAU):
            checks.append({"kind": "scan_dim_bm",
                           "params": {"n": n, "R": 1.0, "measure": mu,
                                      "resolution": _RES[n],
                                      "psi": PSI_SUITE[2][1],
                                      "psi_name": "second_harmonic"}})
            checks.append({"kind": "scan_log_bm",
                           "params": {"n": n, "R": 1.0, "measure": mu,
                                      "resolution": _RES[n],
                                      "psi": PSI_SUITE[3][1],
                                      "psi_name": "random_even"}})
    for t in (0.3, 0.6):
        checks.append({"kind": "shift_counterexample",
                       "params": {"t": t, "resolution": 256}})
    ball2 = {"type": "constant", "value": 1.0}
    for psi_name, psi in (("constant", PSI_SUITE[0][1]),
                          ("second_harmonic", PSI_SUITE[2][1]),
                          ("random_even", PSI_SUITE[3][1])):
        checks.append({"kind": "cone_inequality",
                       "params": {"n": 2, "resolution": 160, "base": ball2,
                                  "psi": psi, "psi_name": psi_name}})
    checks.append({"kind": "cone_inequality",
                   "params": {"n": 2, "resolution": 160,
                              "base": _perturbed_base(2, 0.08),
                              "psi": PSI_SUITE[2][1],
                              "psi_name": "second_harmonic"}})
    checks.append({"kind": "cone_inequality",
                   "params": {"n": 3, "resolution": 16,
                              "base": {"type": "constant", "value": 1.0},
                              "psi": PSI_SUITE[2][1],
                              "psi_name": "second_harmonic"}})
    for n in (2, 3):
        for R in (0.7, 1.3):
            checks.append({"kind": "strengthened_minkowski",
                           "params": {"n": n, "R": R,
                                      "resolution": _RES[n],
                                      "base": {"type": "constant",
                                               "value": R}}})
        checks.append({"kind": "strengthened_minkowski",
                       "params": {"n": n, "resolution": _RES[n],
                                  "base": _perturbed_base(n, 0.08)}})
    checks.append({"kind": "polygon_agreement",
                   "params": {"n": 2, "resolution": 160,
                              "base": {"type": "constant", "value": 1.0},
                              "polygon_directions": 720}})
    checks.append({"kind": "polygon_agreement",
                   "params": {"n": 2, "resolution": 160,
                              "base": _perturbed_base(2, 0.1),
                              "polygon_directions": 720}})
    checks.append({"kind": "mc_agreement",
                   "params": {"n": 2, "resolution": 160, "measure": GAU,
                              "base": _perturbed_base(2, 0.1),
                              "mc_samples": 1 << 17, "seed": 2024}})
    checks.append({"kind": "mc_agreement",
                   "params": {"n": 3, "resolution": 16, "measure": GAU,
                              "base": {"type": "poly",
                                       "terms": [[[0, 0, 0], 1.0],
                                                 [[0, 0, 1], 0.3]]},
                              "mc_samples": 1 << 17, "seed": 2025}})
    return checks


def default_config():
    return {"schema_version": SCHEMA_VERSION, "checks": default_battery()}


# ---------------------------------------------------------------------------
# config validation and execution
# ---------------------------------------------------------------------------

def validate_config(cfg):
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    if cfg.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(
            f"schema_version must be {SCHEMA_VERSION}, "
            f"got {cfg.get('schema_version')!r}")
    checks = cfg.get("checks")
    if not isinstance(checks, list) or not checks:
        raise ConfigError("config needs a non-empty 'checks' list")
    for i, item in enumerate(checks):
        if not isinstance(item, dict) or "kind" not in item:
            raise ConfigError(f"checks[{i}] must be an object with a 'kind'")
        if item["kind"] not in CHECKS:
            known = ", ".join(sorted(CHECKS))
            raise ConfigError(
                f"checks[{i}]: unknown kind {item['kind']!r} (known: {known})")
        params = item.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError(f"checks[{i}]: params must be an object")
        for frac_key in ("eps_fracs",):
            if frac_key in params:
                fr = params[frac_key]
                if any(abs(float(f)) > 1.0 for f in fr):
                    raise ConfigError(
                        f"checks[{i}]: {frac_key} entries are fractions of "
                        "the validity radius and must lie in [-1, 1]")
    return cfg


def execute(cfg, log=print):
    results = []
    for item in cfg["checks"]:
        kind = item["kind"]
        params = item.get("params", {})
        try:
            res = run_check(kind, params)
        except (ValueError, KeyError, FamilyError, NonPositiveSupport,
                NotConvex) as exc:
            raise ConfigError(f"check {kind} with params {params!r}: {exc}")
        results.append(res)
        status = "PASS" if res.passed else "FAIL"
        if res.expected_failure and res.passed:
            status = "XFAIL"
        log(f"[{status}] {res.check_id}  margin={res.margin:+.6e}")
    return results


# ---------------------------------------------------------------------------
# report writers
# ---------------------------------------------------------------------------

def write_csv(path, results):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for res in results:
            writer.writerow(res.to_row())


def write_json(path, results, config=None):
    payload = {
        "schema_version": SCHEMA_VERSION,
        "created": datetime.now(timezone.utc).isoformat(),
        "package_version": __version__,
        "summary": {
            "total": len(results),
            "passed": sum(1 for r in results if r.passed),
            "failed": sum(1 for r in results if not r.passed),
            "expected_failures": sum(1 for r in results
                                     if r.expected_failure),
        },
        "checks": [
            _jsonable({
                "check_id": r.check_id, "kind": r.kind, "n": r.n, "R": r.R,
                "measure": r.measure, "margin": r.margin, "tol": r.tol,
                "passed": r.passed, "expected_failure": r.expected_failure,
                "oracle_diff": r.oracle_diff, "params": r.params,
                "details": r.details,
            })
            for r in results
        ],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _symlog(x, tol=1e-12):
    return math.copysign(math.log10(1.0 + abs(x) / tol), x)


def write_svg(path, results):
    """Margins bar chart; pure hand-rolled SVG, no external assets."""
    rows = sorted(results, key=lambda r: r.margin)
    width, rh, left = 900, 16, 430
    height = rh * len(rows) + 40
    span = max((abs(_symlog(r.margin)) for r in rows), default=1.0) or 1.0
    scale = (width - left - 20) / (2.0 * span)
    mid = left + (width - left - 20) / 2.0
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
           f'height="{height}" font-family="monospace" font-size="11">']
    out.append(f'<line x1="{mid:.1f}" y1="20" x2="{mid:.1f}" '
               f'y2="{height - 20}" stroke="#888" stroke-width="1"/>')
    out.append(f'<text x="{mid:.1f}" y="14" text-anchor="middle" '
               f'fill="#444">margin = 0 (symlog scale)</text>')
    for i, r in enumerate(rows):
        y = 24 + i * rh
        v = _symlog(r.margin) * scale
        x0, x1 = (mid + v, mid) if v < 0 else (mid, mid + v)
        if r.passed and r.expected_failure:
            color = "#d69408"
        elif r.passed:
            color = "#2a8f4e"
        else:
            color = "#c03030"
        label = r.check_id if len(r.check_id) <= 62 else r.check_id[:59] + "..."
        out.append(f'<rect x="{x0:.2f}" y="{y:.1f}" '
                   f'width="{max(x1 - x0, 0.75):.2f}" height="{rh - 4}" '
                   f'fill="{color}"/>')
        out.append(f'<text x="4" y="{y + rh - 6:.1f}" fill="#222">'
                   f'{label}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _finish(results, outdir, svg=False):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_csv(outdir / "report.csv", results)
    write_json(outdir / "report.json", results)
    if svg:
        write_svg(outdir / "margins.svg", results)
    n_fail = sum(1 for r in results if not r.passed)
    print(f"\n{len(results)} checks, {len(results) - n_fail} passed, "
          f"{n_fail} failed -> {outdir}/report.csv")
    return 2 if n_fail else 0


def cmd_run(args):
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}")
    else:
        cfg = default_config()
    validate_config(cfg)
    results = execute(cfg)
    return _finish(results, args.out, svg=args.svg)


def cmd_verify_identities(args):
    cfg = {"schema_version": SCHEMA_VERSION, "checks": identity_battery()}
    results = execute(cfg)
    return _finish(results, args.out, svg=args.svg)


def cmd_demo_shift(args):
    checks = [{"kind": "shift_counterexample",
               "params": {"t": t, "resolution": args.resolution}}
              for t in args.t]
    results = execute({"schema_version": SCHEMA_VERSION, "checks": checks})
    print("\nshifted-disk geometric mean: area deficit against the "
          "half-and-half chord")
    print(f"{'t':>5} {'area':>12} {'closed form':>12} {'polygon':>12} "
          f"{'log-margin':>12}")
    for r in results:
        d = r.details
        print(f"{r.params['t']:>5} {d['area_geometric_mean']:>12.8f} "
              f"{d['area_closed_form']:>12.8f} {d['area_polygon']:>12.8f} "
              f"{r.margin:>+12.6f}")
    return _finish(results, args.out, svg=args.svg)


def cmd_list_checks(_args):
    for kind in sorted(CHECKS):
        doc = (CHECKS[kind].__doc__ or "").strip().splitlines()
        first = doc[0] if doc else ""
        print(f"{kind:28s} {first}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(
        prog="bmstab",
        description="Numerical verification of concavity inequalities for "
                    "measures of convex bodies near the ball.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("run", help="run a battery of checks")
    pr.add_argument("--config", help="JSON config (default: built-in battery)")
    pr.add_argument("--out", default="bmstab-report",
                    help="output directory (default: bmstab-report)")
    pr.add_argument("--svg", action="store_true",
                    help="also write margins.svg")
    pr.set_defaults(func=cmd_run)

    pv = sub.add_parser("verify-identities",
                        help="run the exact-identity residual checks")
    pv.add_argument("--out", default="bmstab-report")
    pv.add_argument("--svg", action="store_true")
    pv.set_defaults(func=cmd_verify_identities)

    pd = sub.add_parser("demo-shift",
                        help="shifted-disk counterexample demonstration")
    pd.add_argument("--t", type=float, nargs="+", default=[0.3, 0.6])
    pd.add_argument("--resolution", type=int, default=256)
    pd.add_argument("--out", default="bmstab-report")
    pd.add_argument("--svg", action="store_true")
    pd.set_defaults(func=cmd_demo_shift)

    pl = sub.add_parser("list-checks", help="list registered check kinds")
    pl.set_defaults(func=cmd_list_checks)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
