"""Command-line front end.

Exit codes: 0 success, 2 input error, 3 numeric domain error.
"""

import argparse
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import io
from .fields import PRESETS, FieldSpec
from .geometry import PolyCurve, curves_to_current
from .perimeter import boundary_mass_perimeter, fractional_perimeter_mc
from .riesz import DomainError, FracParams, QuadConfig, fractional_mass, regularized_mass_m1
from .smirnov import ApproxParams, approximate
from .spectral import SpectralConfig, fourier_of_current, spectral_mass
from .variation import (FlowError, Perturbation, fd_first_variation, first_variation,
                        gradient_flow_step, richardson)


@dataclass
class RunConfig:
    command: str
    inputs: list
    out: str = None
    s: float = 0.5
    eps: float = None
    delta: float = None
    rho: float = None
    n: int = None
    seed: int = 0
    quad_order: int = 8
    threads: int = None
    extra: dict = field(default_factory=dict)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(2)


def _common(p, s=True):
    if s:
        p.add_argument("--s", type=float, default=0.5, help="fractional exponent in (0, 1)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--quad-order", type=int, default=8, help="Gauss order per panel")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", default=None, help="output file or directory")
    p.add_argument("--json", action="store_true", help="machine-readable result on stdout")


def build_parser():
    ap = _Parser(prog="fracmass", description="Fractional mass of curves and currents.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("mass", help="s-fractional mass of curves")
    p.add_argument("curves")
    p.add_argument("--m1-eps", type=float, default=None, help="use kernel 1/max(r, eps)")
    _common(p)

    p = sub.add_parser("asymptotic", help="(1-s) M_s over a list of s with extrapolated limit")
    p.add_argument("curves")
    p.add_argument("--s-list", default="0.9,0.99,0.999")
    _common(p, s=False)

    p = sub.add_parser("variation-check", help="first variation against finite differences")
    p.add_argument("curve")
    p.add_argument("--n", type=int, default=10, help="number of random perturbations")
    _common(p)

    p = sub.add_parser("approximate", help="closed polygonal approximation of a field")
    p.add_argument("config")
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--n", type=int, default=None, help="Monte Carlo samples for M_s(psi)")
    _common(p)

    p = sub.add_parser("perimeter", help="fractional perimeter of a planar region")
    p.add_argument("region")
    p.add_argument("--n", type=int, default=10**6)
    _common(p)

    p = sub.add_parser("spectral", help="M_s through the Fourier transform")
    p.add_argument("curves")
    p.add_argument("--xi-min", type=float, default=None)
    p.add_argument("--xi-max", type=float, default=None)
    p.add_argument("--n", type=int, default=None, help="radial nodes")
    _common(p)

    p = sub.add_parser("flow", help="demo descent steps of M_s")
    p.add_argument("curve")
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--steps", type=int, default=10)
    _common(p)
    return ap


def _quad(args):
    return QuadConfig(gauss_order=args.quad_order)


def _emit(args, cfg, result, text_lines):
    if args.json:
        print(json.dumps(io.jsonable({"config": asdict(cfg), "result": result})))
    else:
        print("config: " + json.dumps(io.jsonable(asdict(cfg))))
        for line in text_lines:
            print(line)


def _check_s(s):
    if not 0 < s < 1:
        raise DomainError(f"s = {s} is outside (0, 1)")


def cmd_mass(args):
    curves = io.read_curves(args.curves)
    mu = curves_to_current(curves)
    cfg = RunConfig("mass", [args.curves], args.out or "energy.json", args.s, eps=args.m1_eps,
                    seed=args.seed, quad_order=args.quad_order, threads=args.threads)
    if args.m1_eps is not None:
        value = regularized_mass_m1(mu, args.m1_eps, _quad(args), threads=args.threads)
        label = f"M1_eps(eps={args.m1_eps!r})"
    else:
        _check_s(args.s)
        value = fractional_mass(mu, FracParams(args.s, quad=_quad(args)), threads=args.threads)
        label = f"M_s(s={args.s!r})"
    result = {"quantity": label, "value": value, "segments": len(mu)}
    with open(cfg.out, "w") as fh:
        json.dump(io.jsonable({"config": asdict(cfg), "result": result}), fh, indent=1)
        fh.write("\n")
    _emit(args, cfg, result, [f"{label} = {value:.6f}", f"full precision: {value!r}"])


def _parse_s_list(text):
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise io.InputError(f"bad --s-list: {text!r}") from exc
    if not vals:
        raise io.InputError("--s-list is empty")
    for s in vals:
        _check_s(s)
    return vals


def cmd_asymptotic(args):
    s_list = _parse_s_list(args.s_list)
    mu = curves_to_current(io.read_curves(args.curves))
    cfg = RunConfig("asymptotic", [args.curves], args.out, float("nan"), seed=args.seed,
                    quad_order=args.quad_order, threads=args.threads,
                    extra={"s_list": s_list})
    rows = []
    for s in s_list:
        rows.append((s, (1.0 - s) * fractional_mass(mu, FracParams(s, quad=_quad(args)),
                                                    threads=args.threads)))
    limit = richardson([r[0] for r in rows], [r[1] for r in rows]) if len(rows) > 1 else rows[0][1]
    if cfg.out:
        io.write_csv(cfg.out, ["s", "one_minus_s_times_Ms"], rows + [("limit", limit)])
    lines = ["s,one_minus_s_times_Ms"] + [f"{s!r},{v!r}" for s, v in rows] + [f"limit,{limit!r}"]
    _emit(args, cfg, {"rows": rows, "limit": limit}, lines)


def _random_perturbation(c, rng, modes=4):
    a, b = c.edges()
    u = np.concatenate([[0.0], np.cumsum(np.linalg.norm(b - a, axis=1))])
    u /= u[-1]
    h = np.zeros_like(c.vertices)
    for k in range(1, modes + 1):
        h += np.sin(np.pi * k * u)[:, None] * rng.normal(size=c.dim)[None, :] / k
    h[0] = h[-1] = 0.0
    return Perturbation(c, 0.1 * h)


def cmd_variation_check(args):
    curves = io.read_curves(args.curve)
    if len(curves) != 1 or curves[0].closed:
        raise io.InputError("variation-check needs a single open curve")
    _check_s(args.s)
    c = curves[0]
    cfg = RunConfig("variation-check", [args.curve], args.out, args.s, n=args.n, seed=args.seed,
                    quad_order=args.quad_order, threads=args.threads)
    rng = np.random.default_rng(args.seed)
    rows = []
    mass = fractional_mass(curves_to_current([c]), FracParams(args.s, quad=_quad(args)))
    for k in range(args.n):
        h = _random_perturbation(c, rng)
        fv = first_variation(c, h, args.s, _quad(args))
        fd = fd_first_variation(c, h, args.s, quad=_quad(args))
        # below eps^(1/3) of the derivative's natural size M |h| / l a central
        # difference cannot tell a value from zero (straight segments vanish by symmetry)
        floor = np.finfo(float).eps ** (1.0 / 3.0) * mass * np.abs(h.values).max() / c.length()
        rows.append((k, fv, fd, abs(fv - fd) / max(abs(fd), floor)))
    if cfg.out:
        io.write_csv(cfg.out, ["trial", "analytic", "finite_difference", "rel_error"], rows)
    worst = max(r[3] for r in rows) if rows else 0.0
    lines = [f"trial {k}: analytic={fv!r} fd={fd!r} rel_err={e:.3e}" for k, fv, fd, e in rows]
    _emit(args, cfg, {"rows": rows, "max_rel_error": worst}, lines + [f"max rel error {worst:.3e}"])


def field_from_config(conf):
    kind = conf.get("field")
    if kind is None:
        raise io.InputError("config has no 'field' preset")
    if kind not in PRESETS or kind == "custom_analytic":
        raise io.InputError(f"unknown field preset {kind!r}")
    params = {k: conf[k] for k in ("center", "radius", "amplitude", "axis", "dim") if k in conf}
    try:
        return FieldSpec(kind, params)
    except ValueError as exc:
        raise io.InputError(str(exc)) from exc


def _schedule(conf, args):
    def listed(key, override):
        if override is not None:
            return [override]
        v = conf.get(key)
        if v is None:
            return None
        return list(v) if isinstance(v, tuple) else [v]

    eps = listed("eps", args.eps)
    delta = listed("delta", args.delta)
    rho = listed("rho", args.rho) or [0.0]
    if eps is None or delta is None:
        raise io.InputError("config needs eps and delta (or --eps/--delta)")
    m = max(len(eps), len(delta), len(rho))
    for lst in (eps, delta, rho):
        if len(lst) not in (1, m):
            raise io.InputError("eps, delta, rho lists must have equal length")
    pad = [lst * m if len(lst) == 1 else lst for lst in (eps, delta, rho)]
    return list(zip(*pad))


def cmd_approximate(args):
    conf = io.read_config(args.config)
    psi = field_from_config(conf)
    schedule = _schedule(conf, args)
    s = float(conf.get("s", args.s))
    _check_s(s)
    n = args.n if args.n is not None else int(conf.get("ms_samples", 2 * 10**6))
    compute_ms = int(conf.get("compute_ms", 1)) != 0
    quad = QuadConfig(gauss_order=int(conf.get("quad_order", args.quad_order)),
                      near_ratio=float(conf.get("near_ratio", 2.0)),
                      far_tol=float(conf.get("far_tol", 1e-10)))
    rounding = str(conf.get("rounding", "half"))
    out = args.out or "approx_out"
    cfg = RunConfig("approximate", [args.config], out, s, n=n, seed=args.seed,
                    quad_order=quad.gauss_order, threads=args.threads,
                    extra={"field": psi.kind, "schedule": schedule, "rounding": rounding,
                           "near_ratio": quad.near_ratio, "far_tol": quad.far_tol,
                           "compute_ms": compute_ms,
                           "field_params": {k: v for k, v in psi.params.items()}})
    os.makedirs(out, exist_ok=True)
    rows, lines, results = [], [], []
    header = ["eps", "delta", "rho", "mass_mu", "mass_psi", "pairing_err_max", "Ms_mu",
              "Ms_psi"]
    times = []
    for k, (eps, delta, rho) in enumerate(schedule):
        p = ApproxParams(eps, delta, rho, psi.dim, args.seed, rounding=rounding)
        mu, loops, diag = approximate(psi, p, s, compute_ms=compute_ms, ms_samples=n, quad=quad)
        tag = f"_{k}" if len(schedule) > 1 else ""
        io.current_to_json(mu, os.path.join(out, f"current{tag}.json"))
        io.curves_to_json(loops, os.path.join(out, f"loops{tag}.json"))
        row = diag.row()
        rows.append([row[h] for h in header])
        times.append((eps, delta, rho, diag.runtime_s))
        results.append(dict(row, n_segments=len(mu), n_loops=len(loops),
                            mass_error=diag.mass_error, Ms_error=diag.Ms_error,
                            Ms_psi_sigma=diag.Ms_psi_sigma))
        lines.append(f"eps={eps!r} delta={delta!r} rho={rho!r}: segments={len(mu)} "
                     f"loops={len(loops)} mass_err={diag.mass_error:.4g} "
                     f"pairing_err={diag.pairing_err_max:.4g} Ms_err={diag.Ms_error:.4g}")
    # wall-clock times live in their own file so diagnostics.csv is reproducible bytewise
    io.write_csv(os.path.join(out, "diagnostics.csv"), header, rows)
    io.write_csv(os.path.join(out, "runtime.csv"), ["eps", "delta", "rho", "runtime_s"], times)
    _emit(args, cfg, results, lines)


def cmd_perimeter(args):
    E = io.read_region(args.region)
    _check_s(args.s)
    cfg = RunConfig("perimeter", [args.region], args.out, args.s, n=args.n, seed=args.seed,
                    quad_order=args.quad_order, threads=args.threads)
    try:
        E.check()
    except ValueError as exc:
        raise io.InputError(str(exc)) from exc
    est, se = fractional_perimeter_mc(E, args.s, args.n, args.seed)
    direct = boundary_mass_perimeter(E, args.s, FracParams(args.s, quad=_quad(args)))
    result = {"P_s_mc": est, "P_s_mc_se": se, "P_s_boundary": direct}
    if cfg.out:
        with open(cfg.out, "w") as fh:
            json.dump(io.jsonable({"config": asdict(cfg), "result": result}), fh, indent=1)
            fh.write("\n")
    _emit(args, cfg, result, [f"P_s (Monte Carlo) = {est!r} +- {se!r}",
                              f"P_s (boundary mass / s^2) = {direct!r}"])


def cmd_spectral(args):
    _check_s(args.s)
    mu = curves_to_current(io.read_curves(args.curves))
    kw = {}
    if args.xi_min is not None:
        kw["xi_min"] = args.xi_min
    if args.xi_max is not None:
        kw["xi_max"] = args.xi_max
    if args.n is not None:
        kw["radial_nodes"] = args.n
    try:
        scfg = SpectralConfig(**kw)
    except ValueError as exc:
        raise io.InputError(str(exc)) from exc
    cfg = RunConfig("spectral", [args.curves], args.out, args.s, n=args.n, seed=args.seed,
                    quad_order=args.quad_order, threads=args.threads, extra=asdict(scfg))
    res = spectral_mass(mu, args.s, scfg, return_info=True)
    direct = fractional_mass(mu, FracParams(args.s, quad=_quad(args)))
    if cfg.out:
        # angle-averaged |F[mu]|^2 on a log grid of |xi|
        radii = np.geomspace(scfg.xi_min, scfg.xi_max, 200)
        theta = np.pi * (np.arange(64) + 0.5) / 64
        dirs = np.column_stack([np.cos(theta), np.sin(theta)] +
                               [np.zeros_like(theta)] * (mu.dim - 2))
        prof = [float(np.mean(np.abs(fourier_of_current(mu, r * dirs)) ** 2)) for r in radii]
        io.write_csv(cfg.out, ["xi_abs", "F_abs_sq"], zip(radii.tolist(), prof))
    result = {"spectral": res.value, "direct": direct, "nodes": res.n_nodes,
              "rel_diff": abs(res.value - direct) / abs(direct)}
    _emit(args, cfg, result, [f"M_s spectral = {res.value!r}", f"M_s direct   = {direct!r}",
                              f"relative difference {result['rel_diff']:.3e}"])


def cmd_flow(args):
    curves = io.read_curves(args.curve)
    if len(curves) != 1:
        raise io.InputError("flow needs a single closed curve")
    _check_s(args.s)
    c = curves[0]
    if not c.closed:
        raise io.InputError("flow needs a closed curve")
    if not args.dt >= 0 or args.steps < 0:
        raise io.InputError("need dt >= 0 and steps >= 0")
    out = args.out or "flow_out"
    cfg = RunConfig("flow", [args.curve], out, args.s, seed=args.seed, quad_order=args.quad_order,
                    threads=args.threads, extra={"dt": args.dt, "steps": args.steps})
    os.makedirs(out, exist_ok=True)
    p = FracParams(args.s, quad=_quad(args))
    rows = [(0, fractional_mass(curves_to_current([c]), p))]
    io.curves_to_json([c], os.path.join(out, "step_0000.json"))
    status = "ok"
    for k in range(1, args.steps + 1):
        try:
            c = gradient_flow_step(c, args.s, args.dt)
        except FlowError as exc:
            status = f"stopped at step {k}: {exc} [{exc.flag}]"
            break
        io.curves_to_json([c], os.path.join(out, f"step_{k:04d}.json"))
        rows.append((k, fractional_mass(curves_to_current([c]), p)))
    io.write_csv(os.path.join(out, "energy.csv"), ["step", "Ms"], rows)
    _emit(args, cfg, {"rows": rows, "status": status},
          [f"step {k}: M_s = {m!r}" for k, m in rows] + [status])


COMMANDS = {"mass": cmd_mass, "asymptotic": cmd_asymptotic,
            "variation-check": cmd_variation_check, "approximate": cmd_approximate,
            "perimeter": cmd_perimeter, "spectral": cmd_spectral, "flow": cmd_flow}


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", None) is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        COMMANDS[args.command](args)
    except DomainError as exc:
        print(f"numeric domain error: {exc}", file=sys.stderr)
        return 3
    except (io.InputError, ValueError, KeyError, TypeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
