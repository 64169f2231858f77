"""Batch command line front end for the nullsupport library.

Exit codes: 0 success, 1 acceptance failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import criteria as cr
from . import curvature as cv
from . import families as fm
from . import geodesics as gd
from . import support as sp
from .errors import ConfigError, NullSupportError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


# ------------------------------------------------------------ parsing helpers


def parse_grid(text: str, field: str = "grid") -> np.ndarray:
    """'a:b:N' (linear) or 'a:b:logN' (geometric)."""
    try:
        a, b, n = text.split(":")
        log = n.startswith("log")
        n = int(n[3:] if log else n)
        a, b = float(a), float(b)
    except ValueError as exc:
        raise ConfigError(f"field {field}: cannot parse grid {text!r} (expected a:b:N or a:b:logN)") from exc
    if n < 1:
        raise ConfigError(f"field {field}: grid must be non-empty")
    if log:
        if a <= 0 or b <= 0:
            raise ConfigError(f"field {field}: log grid needs positive endpoints")
        return np.geomspace(a, b, n)
    return np.linspace(a, b, n)


def parse_pair(text: str, field: str) -> tuple[float, float]:
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"field {field}: expected 'a,b', got {text!r}") from exc
    return a, b


def parse_phi(text: str) -> sp.NullSupportFn:
    """constant:c | semitrough | hyperboloid | glide:lam | parabolic:eps | samples:path."""
    name, _, arg = text.partition(":")
    try:
        if name == "constant":
            return sp.NullSupportFn.constant(float(arg or 0.0))
        if name == "semitrough":
            return fm.Semitrough().support()
        if name == "hyperboloid":
            return fm.Hyperboloid().support()
        if name == "glide":
            return fm.Glide(float(arg or 1.0)).support()
        if name == "parabolic":
            return fm.ParabolicInvariant(float(arg or 0.5)).support()
        if name == "samples":
            th, val, inf = read_samples(arg, "theta")
            return sp.NullSupportFn.sampled(th, val, inf)
    except (ValueError, OSError) as exc:
        raise ConfigError(f"field phi: {exc}") from exc
    raise ConfigError(f"field phi: unknown support function {text!r}")


def read_samples(path: str, key: str):
    with open(path) as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
    head, body = rows[0], rows[1:]
    if head[0] != key:
        raise ConfigError(f"field input: first column must be {key!r}, got {head[0]!r}")
    a = np.array([float(r[0]) for r in body])
    v = np.array([float(r[1]) for r in body])
    inf = np.array([r[2].strip() in ("1", "True", "true") for r in body]) if len(head) > 2 else ~np.isfinite(v)
    return a, v, inf


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v) + 0.0)


def write_csv(out, header, rows, meta: dict):
    buf = io.StringIO()
    for k, v in meta.items():
        buf.write(f"# {k}: {v}\n")
    buf.write(",".join(header) + "\n")
    for r in rows:
        buf.write(",".join(fmt(v) for v in r) + "\n")
    text = buf.getvalue()
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def write_json(out, obj):
    text = json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n"
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def threads() -> int:
    try:
        return max(1, int(os.environ.get("LSK_THREADS", "1")))
    except ValueError as exc:
        raise ConfigError("env LSK_THREADS: expected an integer") from exc


def ordered_map(fn, items):
    """Map with up to LSK_THREADS workers; output order follows input order."""
    n = threads()
    if n == 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def family_from_args(args) -> object:
    kind = args.kind
    try:
        if kind == "barrier":
            return fm.HolderBarrier(fm.BarrierParams(args.eps if args.eps is not None else 1.0,
                                                     args.alpha, args.beta, args.gamma, args.M))
        params = {}
        if args.lam is not None:
            params["lam"] = args.lam
        if args.eps is not None:
            params["eps"] = args.eps
        return fm.make_family(kind, **params)
    except NullSupportError as exc:
        raise ConfigError(f"family parameters: {exc}") from exc


def meta_base(args, **extra) -> dict:
    m = {"command": " ".join(args.argv), "seed": args.seed}
    m.update(extra)
    return m


# ----------------------------------------------------------------- commands


SAMPLE_DEFAULTS = {
    "glide": ("t", "s", "0.01:12:log200", "-20:20:200"),
    "semitrough": ("t", "s", "0.01:12:log200", "-20:20:200"),
    "cusp": ("a", "y", "0.01:0.5:100", "-5:5:100"),
    "hyperboloid": ("u1", "u2", "-5:5:101", "-5:5:101"),
    "parabolic": ("u1", "u2", "-5:5:101", "0.05:20:log100"),
    "barrier": ("u1", "u2", "-5:5:101", "0.05:20:log100"),
}


def cmd_family_sample(args):
    fam = family_from_args(args)
    n1, n2, d1, d2 = SAMPLE_DEFAULTS[fam.kind]
    u1 = parse_grid(args.t or args.x or d1, n1)
    u2 = parse_grid(args.s or args.y or d2, n2)
    if fam.kind in ("glide", "semitrough") and np.any(u1 <= 0):
        raise ConfigError("field t: must be positive")
    if fam.kind in ("parabolic", "barrier") and np.any(u2 <= 0):
        raise ConfigError("field y: must be positive for support-defined families")

    def row(a):
        P = np.asarray(fam.eval(np.full(u2.shape, a), u2), float).reshape(len(u2), 3)
        return [(a, b, *p) for b, p in zip(u2, P)]

    rows = [r for chunk in ordered_map(row, list(u1)) for r in chunk]
    write_csv(args.out, [n1, n2, "x", "y", "z"], rows,
              meta_base(args, family=fam.kind, params=json.dumps(fam.params(), sort_keys=True),
                        bias="all columns exact up to floating point"))
    return EXIT_OK


def _chart_arg(args):
    try:
        return sp.chart(args.chart)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"field chart: {exc}") from exc


def cmd_support_convert(args):
    ch = _chart_arg(args)
    if args.input:
        with open(args.input) as fh:
            first = next(line for line in fh if not line.startswith("#"))
        key = first.split(",")[0].strip()
        if key == "theta":
            th, v, inf = read_samples(args.input, "theta")
            x = ch.x_of_theta(th)
            keep = np.isfinite(x)
            psi = np.where(inf, 0.0, (1 + x * x) * v)
            rows = [(a, b, c) for a, b, c in zip(x[keep], psi[keep], inf[keep])]
            write_csv(args.out, ["x", "value", "infinite"], rows,
                      meta_base(args, chart=ch.kind.value, bias="exact (pointwise rescaling)"))
        elif key == "x":
            x, v, inf = read_samples(args.input, "x")
            th = ch.theta_of_x(x)
            phi = np.where(inf, 0.0, v / (1 + x * x))
            rows = [(a, b, c) for a, b, c in zip(th, phi, inf)]
            write_csv(args.out, ["theta", "value", "infinite"], rows,
                      meta_base(args, chart=ch.kind.value, bias="exact (pointwise rescaling)"))
        else:
            raise ConfigError(f"field input: unknown first column {key!r}")
        return EXIT_OK
    if args.source == "parabolic":
        fam = family_from_args(args) if args.kind else fm.Hyperboloid()
        if args.u:
            fam = {"hyperboloid": fm.Hyperboloid()}.get(args.u) or _family_spec(args.u)
        ps = fam.parabolic_support()
        est = sp.value_at_infinity(lambda x, y: ps.u(x, y))
        phi = sp.phi_from_psi(lambda x: ps.u(x, np.zeros_like(x)), est.estimate, ch, tag=fam.kind)
        theta = parse_grid(args.theta or "-3.14159:3.14159:73", "theta")
        theta = np.unique(np.concatenate([theta, [math.pi]]))
        vals, inf = phi.eval_many(theta)
        rows = [(t, v, i) for t, v, i in zip(theta, vals, inf)]
        write_csv(args.out, ["theta", "value", "infinite"], rows,
                  meta_base(args, chart=ch.kind.value, value_at_infinity=est.estimate.to_float(),
                            bias=f"value at infinity: {est.bias}; other rows exact"))
        return EXIT_OK
    phi = parse_phi(args.phi or "constant:0")
    x = parse_grid(args.xgrid or "-5:5:101", "x")
    vals, inf = sp.psi_from_phi(phi, ch)(x)
    write_csv(args.out, ["x", "value", "infinite"], list(zip(x, vals, inf)),
              meta_base(args, chart=ch.kind.value, bias="exact (closed-form support function)"))
    return EXIT_OK


def _family_spec(text: str):
    name, _, arg = text.partition(":")
    if name == "parabolic":
        return fm.ParabolicInvariant(float(arg or 0.5))
    if name == "barrier":
        return fm.HolderBarrier(fm.BarrierParams(float(arg or 1.0), 0.5, 0.5, 0.25, 1.0))
    raise ConfigError(f"field u: unknown parabolic support {text!r}")


def cmd_support_dod(args):
    phi = parse_phi(args.phi or "constant:0")
    g = parse_grid(args.grid or "-5:5:101", "grid")
    X, Y = np.meshgrid(g, g, indexing="ij")
    res = sp.dod_boundary_height(phi, X, Y, args.n_probe)
    rows = [(x, y, h) for x, y, h in zip(X.ravel(), Y.ravel(), res.heights.ravel())]
    write_csv(args.out, ["x", "y", "height"], rows,
              meta_base(args, n_directions=res.n_directions, bias=f"height: {res.bias}"))
    return EXIT_OK


def cmd_support_from_samples(args):
    if not args.input:
        raise ConfigError("field input: a CSV of surface points x,y,z is required")
    data = np.loadtxt(args.input, delimiter=",", comments="#", skiprows=1, ndmin=2)
    theta = parse_grid(args.theta or "-3.14159:3.14159:73", "theta")
    vals = sp.null_support_from_points(data[:, :3], theta)
    write_csv(args.out, ["theta", "value"], list(zip(theta, np.atleast_1d(vals))),
              meta_base(args, n_points=len(data), bias="value: lower bound (finite point sample)"))
    return EXIT_OK


def cmd_curvature_grid(args):
    fam = family_from_args(args)
    if fam.kind in ("glide", "semitrough"):
        u1 = parse_grid(args.u1 or "0.2:3:log50", "u1")
        u2 = parse_grid(args.u2 or "-2:2:50", "u2")
    else:
        u1 = parse_grid(args.u1 or "-2:2:21", "u1")
        u2 = parse_grid(args.u2 or "0.1:10:log21", "u2")
    if fam.kind == "hyperboloid":
        fam = fm.ParabolicInvariant(0.0)
    rows = [r for chunk in ordered_map(lambda a: cv.curvature_grid(fam, [a], u2, not args.fd), list(u1))
            for r in chunk]
    bias = "finite differences" if args.fd else "analytic derivatives"
    write_csv(args.out, ["x", "y", "K", "F", "detA", "gx", "gy", "gz"], rows,
              meta_base(args, family=fam.kind, params=json.dumps(fam.params(), sort_keys=True),
                        bias=f"all columns exact up to {bias}"))
    return EXIT_OK


def cmd_geodesic_trace(args):
    from .suite import glide_length_closed_form, incomplete_ray

    fam = family_from_args(args)
    meta = {}
    if args.preset == "incomplete-ray":
        if fam.kind != "glide":
            raise ConfigError("field preset: incomplete-ray needs --kind glide")
        tr = incomplete_ray(fam.lam)
        ref = glide_length_closed_form(fam.lam, 1.0, 1e300) if fam.lam else math.inf
        meta["reference_curve_tail_length"] = repr(float(ref))
        meta["reference_curve_note"] = "closed-form length of the straight-line parameter path from tau=1; not itself a geodesic"
    else:
        if args.u0 is None or args.w0 is None:
            raise ConfigError("fields u0, w0: required without --preset")
        tr = gd.integrate_geodesic(fam, parse_pair(args.u0, "u0"), parse_pair(args.w0, "w0"),
                                   max_length=args.max_length, step=args.step)
    meta["termination"] = tr.termination.value
    meta["total_length"] = repr(float(tr.total_length))
    meta["length_drift"] = repr(float(tr.length_drift))
    if tr.termination is gd.Termination.LENGTH_CONVERGED:
        rep = gd.asymptotic_direction(tr)
        meta["theta_plus"] = repr(float(rep.theta_plus.theta))
        meta["support_limit"] = repr(float(rep.support_value))
    stride = max(1, args.stride)
    rows = list(tr.rows())
    rows = rows[::stride] + ([rows[-1]] if (len(rows) - 1) % stride else [])
    write_csv(args.out, list(gd.CSV_COLUMNS), rows,
              meta_base(args, family=fam.kind, params=json.dumps(fam.params(), sort_keys=True),
                        bias="len: RK4 quadrature; total_length adds a geometric tail estimate",
                        **meta))
    return EXIT_OK


ATOM_SNAP = 1e-6


def snap_to_atom(phi: sp.NullSupportFn, theta: float) -> tuple[float, bool]:
    """Replace a rounded input angle by a declared jump point of phi within ATOM_SNAP."""
    from .minkowski import angular_distance

    for a in np.atleast_1d(phi.atoms if phi.atoms is not None else []):
        if float(angular_distance(theta, float(a))) <= ATOM_SNAP:
            return float(a), True
    return float(theta), False


CONDITIONS = ("comp", "comp-prime", "inc", "inc-prime", "null-line")


def cmd_criteria_check(args):
    phi = parse_phi(args.phi or "constant:0")
    th, snapped = snap_to_atom(phi, args.theta0)
    probe = cr.Probe(depth=args.depth)
    c = args.condition
    if c == "comp":
        v = cr.check_comp(phi, th, args.M, probe)
    elif c == "comp-prime":
        v = cr.check_comp_prime(phi, th, args.lam if args.lam is not None else 1.0, args.side)
    elif c == "inc":
        v = cr.check_inc(phi, th, args.eps if args.eps is not None else 0.25, args.alpha, probe)
    elif c == "inc-prime":
        v = cr.check_inc_prime(phi, th, args.eps if args.eps is not None else 1.0, probe)
    elif c == "null-line":
        v = cr.null_line_disjoint(phi, th, args.M, args.slope, probe)
    else:
        raise ConfigError(f"field condition: unknown {c!r}")
    d = v.to_dict()
    d["seed"] = args.seed
    d["theta0_input"] = args.theta0
    d["theta0_snapped_to_atom"] = snapped
    write_json(args.out, d)
    return EXIT_OK


def cmd_verify_all(args):
    from . import suite

    if args.barrier:
        b = args.barrier
        try:
            fm.BarrierParams(b.get("eps", 1.0), b.get("alpha", 0.5), b.get("beta", 0.5),
                             b.get("gamma", 0.25), b.get("M", 1.0))
        except NullSupportError as exc:
            raise ConfigError(f"field barrier: {exc}") from exc
    if args.only and args.only not in suite.GROUPS and not any(
            args.only in (n, str(i)) for i, n, *_ in suite.REGISTRY):
        raise ConfigError(f"field only: unknown group or criterion {args.only!r}")
    results = suite.run_suite(args.only)
    for r in results:
        print(r.line(), file=sys.stderr)
    report = {"seed": args.seed, "passed": all(r.passed for r in results),
              "criteria": [r.to_dict() for r in results]}
    write_json(args.out, report)
    return EXIT_OK if report["passed"] else EXIT_FAIL


# ------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nullsupport", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="JSON file of defaults; explicit flags override it")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="output path (default stdout)")
    top = p.add_subparsers(dest="group", required=True)

    def fam_args(q):
        q.add_argument("--kind", choices=fm.FAMILY_KINDS, default=None)
        q.add_argument("--family", dest="kind", choices=fm.FAMILY_KINDS)
        q.add_argument("--lambda", dest="lam", type=float, default=None)
        q.add_argument("--eps", type=float, default=None)
        q.add_argument("--alpha", type=float, default=None)
        q.add_argument("--beta", type=float, default=None)
        q.add_argument("--gamma", type=float, default=None)
        q.add_argument("--M", type=float, default=None)

    fam = top.add_parser("family").add_subparsers(dest="action", required=True)
    q = fam.add_parser("sample")
    fam_args(q)
    for name in ("t", "s", "x", "y"):
        q.add_argument(f"--{name}", default=None)
    q.set_defaults(func=cmd_family_sample)

    sup = top.add_parser("support").add_subparsers(dest="action", required=True)
    q = sup.add_parser("convert")
    fam_args(q)
    q.add_argument("--from", dest="source", choices=("elliptic", "parabolic"), default=None)
    q.add_argument("--u", default=None)
    q.add_argument("--phi", default=None)
    q.add_argument("--chart", default=None)
    q.add_argument("--theta", default=None)
    q.add_argument("--x", dest="xgrid", default=None)
    q.add_argument("--input", default=None)
    q.set_defaults(func=cmd_support_convert)
    q = sup.add_parser("dod")
    q.add_argument("--phi", default=None)
    q.add_argument("--grid", default=None)
    q.add_argument("--n-probe", dest="n_probe", type=int, default=None)
    q.set_defaults(func=cmd_support_dod)
    q = sup.add_parser("from-samples")
    q.add_argument("--input", default=None)
    q.add_argument("--theta", default=None)
    q.set_defaults(func=cmd_support_from_samples)

    cur = top.add_parser("curvature").add_subparsers(dest="action", required=True)
    q = cur.add_parser("grid")
    fam_args(q)
    q.add_argument("--u1", default=None)
    q.add_argument("--u2", default=None)
    q.add_argument("--fd", action="store_true", default=None)
    q.set_defaults(func=cmd_curvature_grid)

    geo = top.add_parser("geodesic").add_subparsers(dest="action", required=True)
    q = geo.add_parser("trace")
    fam_args(q)
    q.add_argument("--preset", choices=("incomplete-ray",), default=None)
    q.add_argument("--u0", default=None)
    q.add_argument("--w0", default=None)
    q.add_argument("--max-length", dest="max_length", type=float, default=None)
    q.add_argument("--step", type=float, default=None)
    q.add_argument("--stride", type=int, default=None)
    q.set_defaults(func=cmd_geodesic_trace)

    crit = top.add_parser("criteria").add_subparsers(dest="action", required=True)
    q = crit.add_parser("check")
    q.add_argument("--condition", choices=CONDITIONS, default=None)
    q.add_argument("--phi", default=None)
    q.add_argument("--theta0", type=float, default=None)
    q.add_argument("--M", type=float, default=None)
    q.add_argument("--lambda", dest="lam", type=float, default=None)
    q.add_argument("--eps", type=float, default=None)
    q.add_argument("--alpha", type=float, default=None)
    q.add_argument("--side", choices=("left", "right", "either"), default=None)
    q.add_argument("--slope", type=float, default=None)
    q.add_argument("--depth", type=int, default=None)
    q.set_defaults(func=cmd_criteria_check)

    ver = top.add_parser("verify").add_subparsers(dest="action", required=True)
    q = ver.add_parser("all")
    q.add_argument("--only", default=None)
    q.set_defaults(func=cmd_verify_all, barrier=None)
    return p


DEFAULTS = {"seed": 0, "alpha": 0.5, "beta": 0.5, "gamma": 0.25, "M": 1.0, "chart": "zeta",
            "source": "elliptic", "fd": False, "max_length": 10.0, "step": 0.02, "stride": 1,
            "theta0": 0.0, "side": "either", "depth": 40, "condition": "comp", "kind": None}


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path}: line {exc.lineno}: {exc.msg}") from exc
    except OSError as exc:
        raise ConfigError(f"config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path}: top level must be an object")
    return data


def resolve(args, argv) -> argparse.Namespace:
    """Merge built-in defaults < config file < explicit flags."""
    cfg = load_config(args.config) if args.config else {}
    known = vars(args)
    for key in cfg:
        if key not in known and key != "lambda":
            raise ConfigError(f"config: unknown field {key!r}")
    merged = dict(DEFAULTS)
    merged.update({("lam" if k == "lambda" else k): v for k, v in cfg.items()})
    merged.update({k: v for k, v in known.items() if v is not None})
    ns = argparse.Namespace(**{**known, **merged})
    ns.argv = list(argv)
    for tol in ("step", "max_length"):
        if getattr(ns, tol, None) is not None and not getattr(ns, tol) > 0:
            raise ConfigError(f"field {tol}: must be strictly positive")
    if getattr(ns, "func", None) in (cmd_family_sample, cmd_curvature_grid, cmd_geodesic_trace) \
            and ns.kind is None:
        raise ConfigError("field kind: a surface family is required")
    return ns


_NEGATIVE = re.compile(r"^-[0-9.]")


def join_negative_values(argv: list[str]) -> list[str]:
    """Rewrite '--opt -1:2:3' as '--opt=-1:2:3' so argparse accepts negative grids."""
    out: list[str] = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok.startswith("--") and "=" not in tok and i + 1 < len(argv) and _NEGATIVE.match(argv[i + 1]):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(join_negative_values(argv))
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        ns = resolve(args, argv)
        if ns.func is cmd_criteria_check and ns.theta0 is None:
            raise ConfigError("field theta0: required")
        return ns.func(ns)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NullSupportError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
