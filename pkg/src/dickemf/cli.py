"""Command-line interface.

Subcommands: scan | qcp | qtp | lp | fit | texture | ed-check.  Every
subcommand accepts ``--config FILE`` plus flag overrides and writes CSV
artifacts relative to the working directory (or the configured output dir).
Exit codes: 0 success, 1 domain error, 2 configuration error.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .config import RunConfig, load_config
from .critical import locate_lp, locate_qcp, locate_qtp
from .ed import ed_sweep
from .errors import ConfigError, DickeError
from .exponents import fit_exponent
from .io import boundary_rows, critical_point_rows, phase_map_rows, write_csv
from .model import DriveParams, ModelParams, ZeemanSet
from .scan import ScanPlane, scan, trace_np_boundary
from .texture import texture_at


def _zeeman_from_args(args, cfg: RunConfig) -> ZeemanSet:
    if getattr(args, "zeeman", None):
        try:
            vals = tuple(float(v) for v in args.zeeman.split(","))
        except ValueError:
            raise ConfigError(f"cannot parse --zeeman {args.zeeman!r}") from None
        return ZeemanSet(vals)
    if getattr(args, "preset", None):
        return ZeemanSet.preset(args.preset)
    return cfg.model.resolve_zeeman()


def _config(args) -> RunConfig:
    if getattr(args, "config", None):
        return load_config(args.config)
    return RunConfig()


def _outdir(args, cfg) -> str:
    out = getattr(args, "out", None) or cfg.output.dir
    os.makedirs(out, exist_ok=True)
    return out


def _plane(cfg: RunConfig, zeeman: ZeemanSet) -> ScanPlane:
    s = cfg.scan
    return ScanPlane(
        axis_x=s.axis_x, x_lo=s.x_lo, x_hi=s.x_hi, n_x=s.n_x,
        nu_lo=s.nu_lo, nu_hi=s.nu_hi, n_y=s.n_y,
        delta=cfg.model.delta, zeeman=zeeman, drive_ratio=cfg.drive.ratio,
        refine=s.refine,
    )


def cmd_scan(args) -> int:
    cfg = _config(args)
    zeeman = _zeeman_from_args(args, cfg)
    pm = scan(_plane(cfg, zeeman), n_probes_per_boundary=cfg.scan.n_probes)
    out = _outdir(args, cfg)
    h, rows = phase_map_rows(pm)
    write_csv(os.path.join(out, "phase_map.csv"), h, rows)
    h, rows = boundary_rows(pm)
    write_csv(os.path.join(out, "boundaries.csv"), h, rows)
    print(f"scan: {pm.labels.shape[0]}x{pm.labels.shape[1]} cells, "
          f"{len(pm.boundaries)} boundaries -> {out}")
    return 0


def cmd_qcp(args) -> int:
    cfg = _config(args)
    zeeman = _zeeman_from_args(args, cfg)
    q = cfg.qcp
    ks = zeeman.k_scale
    box = (q.delta_lo, q.delta_hi, q.xi_lo_scale * ks, q.xi_hi_scale * ks)
    points = locate_qcp(zeeman, box=box, grid_n=q.grid_n)
    out = _outdir(args, cfg)
    h, rows = critical_point_rows(points)
    path = os.path.join(out, "critical_points.csv")
    write_csv(path, h, rows)
    print(f"qcp: {len(points)} point(s) -> {path}")
    return 0


def cmd_qtp(args) -> int:
    cfg = _config(args)
    zeeman = _zeeman_from_args(args, cfg)
    plane = _plane(cfg, zeeman)
    plane = ScanPlane(
        axis_x=plane.axis_x, x_lo=cfg.qtp.x_lo, x_hi=cfg.qtp.x_hi,
        n_x=plane.n_x, nu_lo=plane.nu_lo, nu_hi=plane.nu_hi, n_y=plane.n_y,
        delta=plane.delta, zeeman=zeeman, drive_ratio=plane.drive_ratio,
        refine=False,
    )
    trace = trace_np_boundary(plane, n_probes=cfg.qtp.n_probes)
    points = locate_qtp(trace)
    out = _outdir(args, cfg)
    h, rows = critical_point_rows(points)
    path = os.path.join(out, "critical_points.csv")
    write_csv(path, h, rows)
    print(f"qtp: {len(points)} point(s) -> {path}")
    return 0


def cmd_lp(args) -> int:
    cfg = _config(args)
    zeeman = _zeeman_from_args(args, cfg)
    pm = scan(_plane(cfg, zeeman), n_probes_per_boundary=cfg.scan.n_probes)
    points = locate_lp(pm)
    out = _outdir(args, cfg)
    h, rows = critical_point_rows(points)
    path = os.path.join(out, "critical_points.csv")
    write_csv(path, h, rows)
    print(f"lp: {len(points)} point(s) -> {path}")
    return 0


def cmd_fit(args) -> int:
    cfg = _config(args)
    path = args.input or cfg.fit.input
    if not path:
        raise ConfigError("fit needs --input or [fit] input")
    hint = args.nu_c_hint if args.nu_c_hint is not None else cfg.fit.nu_c_hint
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    bracket = cfg.fit.bracket or None
    fit = fit_exponent(data, hint, bracket=bracket)
    out = _outdir(args, cfg)
    dest = os.path.join(out, "fit.csv")
    write_csv(dest, ["gamma", "gamma_err", "nu_c", "r2"],
              [[fit.gamma, fit.gamma_err, fit.nu_c, fit.r_squared]])
    print(f"fit: gamma={fit.gamma:.6f} +- {fit.gamma_err:.2e}, "
          f"nu_c={fit.nu_c:.9f}, r2={fit.r_squared:.6f} -> {dest}")
    return 0


def cmd_texture(args) -> int:
    cfg = _config(args)
    zeeman = _zeeman_from_args(args, cfg)
    delta = args.delta if args.delta is not None else cfg.model.delta
    nu = args.nu if args.nu is not None else cfg.model.nu
    ratio = args.ratio if args.ratio is not None else cfg.drive.ratio
    rep = texture_at(ModelParams(delta, nu, zeeman), DriveParams(ratio),
                     seed=cfg.solver.seed, n_starts=cfg.solver.n_starts)
    out = _outdir(args, cfg)
    dest = os.path.join(out, "texture.csv")
    header = ["delta", "nu", "ratio"] + [f"m_{j+1}" for j in range(len(rep.m))] + ["order"]
    write_csv(dest, header, [[delta, nu, ratio, *rep.m, rep.order]])
    print(f"texture: {rep.order} m={tuple(round(v, 6) for v in rep.m)} -> {dest}")
    return 0


def cmd_ed_check(args) -> int:
    cfg = _config(args)
    zeeman = _zeeman_from_args(args, cfg)
    e = cfg.ed
    n_atoms = args.n_atoms if args.n_atoms is not None else e.n_atoms
    cutoff = args.cutoff if args.cutoff is not None else e.photon_cutoff
    delta = args.delta if args.delta is not None else cfg.model.delta
    nus = np.linspace(e.nu_lo, e.nu_hi, e.n_nu)
    rows = []
    for nu, res in ed_sweep(n_atoms, cutoff, delta, zeeman, nus):
        rows.append([nu, res.energy, res.photon_order,
                     np.sqrt(max(res.n_photons, 0.0) / n_atoms), res.a_plus_adag])
    out = _outdir(args, cfg)
    dest = os.path.join(out, "ed_sweep.csv")
    write_csv(dest, ["nu", "energy", "photon_order", "sqrt_n_over_sqrt_N", "a_plus_adag"], rows)
    print(f"ed-check: {len(rows)} points -> {dest}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="dickemf",
        description="Mean-field phase diagrams and critical points of "
                    "driven multi-cavity Dicke models.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, zeeman=True):
        p.add_argument("--config", help="run configuration file")
        p.add_argument("--out", help="output directory (default: [output] dir)")
        if zeeman:
            p.add_argument("--zeeman", help="comma-separated couplings, e.g. -1,0,1")
            p.add_argument("--preset", help="named coupling set: K2 K3 K4 K5")

    p = sub.add_parser("scan", help="phase diagram over a 2-D parameter plane")
    common(p)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("qcp", help="locate quantum critical points (undriven)")
    common(p)
    p.set_defaults(func=cmd_qcp)

    p = sub.add_parser("qtp", help="locate tricritical points on the NP-SP boundary")
    common(p)
    p.set_defaults(func=cmd_qtp)

    p = sub.add_parser("lp", help="locate Lifshitz points in a scanned plane")
    common(p)
    p.set_defaults(func=cmd_lp)

    p = sub.add_parser("fit", help="power-law exponent fit of an order-parameter curve")
    common(p, zeeman=False)
    p.add_argument("--input", help="two-column CSV (nu, xi) with header")
    p.add_argument("--nu-c-hint", type=float, default=None)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("texture", help="pseudo-spin texture at one parameter point")
    common(p)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--nu", type=float, default=None)
    p.add_argument("--ratio", type=float, default=None)
    p.set_defaults(func=cmd_texture)

    p = sub.add_parser("ed-check", help="finite-N exact-diagonalization sweep")
    common(p)
    p.add_argument("--n-atoms", type=int, default=None)
    p.add_argument("--cutoff", type=int, default=None)
    p.add_argument("--delta", type=float, default=None)
    p.set_defaults(func=cmd_ed_check)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DickeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
