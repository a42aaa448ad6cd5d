"""Batch command line front end.

Subcommands: precompute-weights, run, converge-n, converge-k,
validate-ic, oracle-check.  Every subcommand takes --config plus
repeatable --set section.key=value overrides; outputs are plain text on
stdout and CSV files in the output directory.  All output except
timings.csv is byte-identical across repeated identical invocations.

Exit codes: 0 success, 1 validation error, 2 runtime failure, 3
threshold breach from oracle-check.
"""
from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import replace

import numpy as np
from numpy.polynomial.legendre import leggauss

from . import diagnostics as diag
from .collision import (
    CollisionWorkspace,
    eval_galerkin_rhs,
    oracle_direct_qr,
    oracle_project,
)
from .config import parse_config
from .gpc import build_basis, triple_product_tensor
from .ic import make_family
from .solver import (
    BlowUpError,
    RunConfig,
    deterministic_residual,
    project_initial,
    resolve_weight_table,
    run,
    validate_initial,
)
from .spectral import SnapshotError, SpectralField, VelocityGrid
from .weights import QuadSpec, WeightCacheError, cache_filename
from .diagnostics import fmt17

ORACLE_N_MAX = 6
ORACLE_QUAD = QuadSpec(24, 32, 32)
ORACLE_RHS_TOL = 1e-6
RESIDUAL_N = 16
RESIDUAL_TOL = 1e-3
ZRULE_ORDER = 24


def _say(msg: str) -> None:
    print(msg)


def _report_derived(config: RunConfig) -> None:
    _say(f"grid: S={config.S:g} N={config.N} K={config.K} "
         f"-> R={config.R:g} L={float(config.L)!r}")


def _parse_int_list(text: str | None, what: str) -> list:
    if text is None or not text.strip():
        raise ValueError(f"{what}: empty value list (use --values a,b,c)")
    try:
        return [int(tok) for tok in text.split(",")]
    except ValueError as exc:
        raise ValueError(f"{what}: bad --values {text!r} ({exc})") from exc


def _require_out(config: RunConfig, what: str) -> str:
    if config.out_dir is None:
        raise ValueError(f"{what}: no output directory configured "
                         f"(set [output] dir or pass --out)")
    os.makedirs(config.out_dir, exist_ok=True)
    return config.out_dir


def _write_csv(path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(row))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
    _say(f"wrote {path}")


def _fmt_cell(value) -> str:
    if value is None:
        return ""
    return fmt17(value)


# ---------------------------------------------------------------- subcommands

def cmd_precompute_weights(args) -> int:
    config = parse_config(args.config, args.set, out_dir=args.out,
                          threads=args.threads)
    _report_derived(config)
    wdir = config.weights_dir or config.out_dir
    if wdir is None:
        raise ValueError("precompute-weights: no weights directory "
                         "configured (set [output] weights_dir or --out)")
    config = replace(config, weights_dir=wdir)
    grid = VelocityGrid(config.N, config.L)
    table = resolve_weight_table(config, grid, config.kernel)
    quad = config.quad if config.quad is not None else QuadSpec()
    path = os.path.join(wdir, cache_filename(
        config.N, config.L, config.R, config.kernel.gamma,
        config.kernel.angular_constant, quad))
    _say(f"weight table: {path}")
    _say(f"raw defects: antidiag={table.antidiag_defect:.3e} "
         f"hermitian={table.hermitian_defect:.3e}")
    return 0


def cmd_run(args) -> int:
    config = parse_config(args.config, args.set, out_dir=args.out,
                          threads=args.threads)
    _report_derived(config)
    state, proj, val = run(config)
    _say(f"projection: residual_max={proj.residual_max:.6e} "
         f"residual_l2={proj.residual_l2:.6e} "
         f"support_leak={proj.support_leak:.3e}")
    _say(f"ic checks: mass_error={val.mass_error:.6e} "
         f"contraction_ok={val.contraction_ok} "
         f"l1_ratio={val.l1_ratio:.6f} neg_norm={val.neg_norm:.6e}")
    final = state.records[-1]
    masses = " ".join(fmt17(m) for m in final.per_mode_mass)
    _say(f"final: t={final.t:g} steps={final.step} mass=[{masses}]")
    _say(f"final: l2h1={fmt17(final.norm_l2v_h1z)} "
         f"neg={fmt17(final.neg_norm)}"
         + (f" err_l2h1={fmt17(final.err_l2h1)}"
            if final.err_l2h1 is not None else ""))
    if config.out_dir is not None:
        _say(f"wrote {os.path.join(config.out_dir, 'diagnostics.csv')}")
    return 0


def cmd_validate_ic(args) -> int:
    config = parse_config(args.config, args.set, out_dir=args.out,
                          threads=args.threads)
    _report_derived(config)
    grid = VelocityGrid(config.N, config.L)
    basis = build_basis(config.K, config.quad_order_z)
    family = make_family(config.ic_family, config.ic_params, config.kernel)
    field, proj = project_initial(family, grid, basis, config.S,
                                  config.support_tol)
    val = validate_initial(field, family, basis)
    _say(f"projection: residual_max={proj.residual_max:.6e} "
         f"residual_l2={proj.residual_l2:.6e} "
         f"support_leak={proj.support_leak:.3e}")
    _say("per-mode mass: "
         + " ".join(fmt17(m) for m in val.mass_per_mode))
    _say(f"mass_error: {val.mass_error:.6e}")
    _say(f"l2h1: projected={fmt17(val.l2h1_proj)} raw={fmt17(val.l2h1_raw)}")
    _say(f"h1h1: projected={fmt17(val.h1h1_proj)} raw={fmt17(val.h1h1_raw)}")
    _say(f"contraction: defect={val.contraction_defect:.3e} "
         f"ok={val.contraction_ok}")
    _say(f"l1_ratio: {val.l1_ratio:.6f}")
    _say(f"negative part: {fmt17(val.neg_norm)}")
    ok = val.contraction_ok and (
        np.isnan(val.mass_error) or val.mass_error <= 1e-6)
    _say("ic validation: " + ("PASS" if ok else "FAIL"))
    return 0 if ok else 1


def _sweep_run(config: RunConfig):
    """One sweep leg: returns (state or None, status, seconds)."""
    t0 = time.monotonic()
    try:
        state, _, _ = run(config)
        return state, "ok", time.monotonic() - t0
    except (ValueError, BlowUpError) as exc:
        return None, f"failed: {exc}", time.monotonic() - t0


def cmd_converge_n(args) -> int:
    config = parse_config(args.config, args.set, out_dir=args.out,
                          threads=args.threads)
    ns = _parse_int_list(args.values, "converge-n")
    out = _require_out(config, "converge-n")
    _report_derived(config)
    family = make_family(config.ic_family, config.ic_params, config.kernel)
    if not args.self_reference and not getattr(family, "has_reference", False):
        raise ValueError(
            f"converge-n: ic family {config.ic_family!r} has no exact "
            f"reference; pass --self-reference")
    legs = []
    for n in ns:
        cfg = replace(config, N=n, out_dir=None, snapshot_times=())
        legs.append((n,) + _sweep_run(cfg))
    rows = []
    timing_rows = []
    if args.self_reference:
        n_max = max(ns)
        ref_state = next((st for n, st, _, _ in legs
                          if n == n_max and st is not None), None)
        basis = build_basis(config.K, config.quad_order_z)
        for n, state, status, secs in legs:
            err = neg = None
            if state is not None:
                neg = state.records[-1].neg_norm
                if ref_state is not None:
                    off = ref_state.field.grid.N - n
                    M = 2 * n + 1
                    crop = ref_state.field.coeffs[:, off:off + M,
                                                  off:off + M]
                    d = SpectralField(state.field.grid, config.K,
                                      crop - state.field.coeffs,
                                      state.field.t)
                    err = diag.mixed_sobolev_norm(d, basis, 0, 1)
                else:
                    status = "failed: reference run unavailable"
            rows.append([str(n), _fmt_cell(err), _fmt_cell(neg), status])
            timing_rows.append([str(n), f"{secs:.3f}"])
    else:
        for n, state, status, secs in legs:
            err = neg = None
            if state is not None:
                final = state.records[-1]
                err, neg = final.err_l2h1, final.neg_norm
            rows.append([str(n), _fmt_cell(err), _fmt_cell(neg), status])
            timing_rows.append([str(n), f"{secs:.3f}"])
    for row in rows:
        _say("  ".join(c or "-" for c in row))
    _write_csv(os.path.join(out, "converge_n.csv"),
               ["N", "err_l2h1", "neg_norm", "status"], rows)
    _write_csv(os.path.join(out, "timings.csv"), ["N", "seconds"],
               timing_rows)
    return 0


def cmd_converge_k(args) -> int:
    config = parse_config(args.config, args.set, out_dir=args.out,
                          threads=args.threads)
    ks = _parse_int_list(args.values, "converge-k")
    out = _require_out(config, "converge-k")
    _report_derived(config)
    family = make_family(config.ic_family, config.ic_params, config.kernel)
    has_ref = getattr(family, "has_reference", False)
    if not args.self_reference and not has_ref:
        raise ValueError(
            f"converge-k: ic family {config.ic_family!r} has no exact "
            f"reference; pass --self-reference")
    znodes, zw = leggauss(ZRULE_ORDER)
    zweights = zw / 2.0
    legs = []
    for k in ks:
        cfg = replace(config, K=k, out_dir=None, snapshot_times=())
        legs.append((k,) + _sweep_run(cfg))
    rows = []
    timing_rows = []
    if args.self_reference:
        k_max = max(ks)
        ref_state = next((st for k, st, _, _ in legs
                          if k == k_max and st is not None), None)
        basis = build_basis(k_max, config.quad_order_z)
        for k, state, status, secs in legs:
            err = None
            if state is not None and ref_state is not None:
                pad = np.zeros_like(ref_state.field.coeffs)
                pad[:k + 1] = state.field.coeffs
                d = SpectralField(state.field.grid, k_max,
                                  ref_state.field.coeffs - pad,
                                  state.field.t)
                err = diag.mixed_sobolev_norm(d, basis, 0, 1)
            elif state is not None:
                status = "failed: reference run unavailable"
            rows.append([str(k), _fmt_cell(err), status])
            timing_rows.append([str(k), f"{secs:.3f}"])
    else:
        def ref_xy(t, vx, vy, z):
            return family.reference(t, vx * vx + vy * vy, z)

        def ref_dz_xy(t, vx, vy, z):
            return family.reference_dz(t, vx * vx + vy * vy, z)
        for k, state, status, secs in legs:
            err = None
            if state is not None:
                err = diag.error_vs_reference_znodes(
                    state.field, ref_xy, ref_dz_xy, znodes, zweights)
            rows.append([str(k), _fmt_cell(err), status])
            timing_rows.append([str(k), f"{secs:.3f}"])
    for row in rows:
        _say("  ".join(c or "-" for c in row))
    _write_csv(os.path.join(out, "converge_k.csv"),
               ["K", "err_l2h1", "status"], rows)
    _write_csv(os.path.join(out, "timings.csv"), ["K", "seconds"],
               timing_rows)
    return 0


def cmd_oracle_check(args) -> int:
    config = parse_config(args.config, args.set, out_dir=args.out,
                          threads=args.threads)
    if config.N > ORACLE_N_MAX:
        raise ValueError(
            f"oracle-check: N={config.N} exceeds the N <= {ORACLE_N_MAX} "
            f"oracle cost guard")
    _report_derived(config)
    grid = VelocityGrid(config.N, config.L)
    basis = build_basis(config.K, config.quad_order_z)
    family = make_family(config.ic_family, config.ic_params, config.kernel)
    field, _ = project_initial(family, grid, basis, config.S,
                               config.support_tol)
    table = resolve_weight_table(config, grid, config.kernel)
    S_tensor = triple_product_tensor(basis, config.kernel.b_coeffs)
    ws = CollisionWorkspace(grid, config.K)
    rhs = eval_galerkin_rhs(field, table, S_tensor, ws)
    eval_grid = grid.refined()
    ovals = oracle_direct_qr(field, basis, config.kernel, config.R,
                             ORACLE_QUAD, eval_grid=eval_grid)
    oref = oracle_project(eval_grid, basis, ovals, grid)
    scale = float(np.sqrt(np.sum(np.abs(oref) ** 2)))
    rel = float(np.sqrt(np.sum(np.abs(rhs - oref) ** 2))) / scale
    ok_rhs = rel <= ORACLE_RHS_TOL
    _say(f"rhs vs oracle: rel_err={rel:.6e} (tol {ORACLE_RHS_TOL:g}) "
         + ("PASS" if ok_rhs else "FAIL"))
    res_grid = VelocityGrid(RESIDUAL_N, config.L)
    res = deterministic_residual(config.kernel, config.R, res_grid,
                                 ORACLE_QUAD)
    ok_res = res <= RESIDUAL_TOL
    _say(f"relaxation residual: l2={res:.6e} at R={config.R:g} "
         f"(tol {RESIDUAL_TOL:g}) " + ("PASS" if ok_res else "FAIL"))
    if ok_rhs and ok_res:
        _say("oracle-check: PASS")
        return 0
    _say("oracle-check: FAIL")
    return 3


# -------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sgboltz",
        description="Spectral / polynomial-chaos solver for the space-"
                    "homogeneous collisional kinetic system.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help="run configuration file (INI sections "
                             "[grid] [kernel] [ic] [time] [output])")
    common.add_argument("--set", metavar="KEY=VALUE", action="append",
                        default=[],
                        help="override a config key, e.g. --set grid.N=32")
    common.add_argument("--out", metavar="DIR",
                        help="output directory (overrides [output] dir)")
    common.add_argument("--threads", type=int, default=1, metavar="N",
                        help="worker cap for weight-table builds")
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")

    p = sub.add_parser("precompute-weights", parents=[common],
                       help="build and cache the convolution weight table")
    p.set_defaults(func=cmd_precompute_weights)

    p = sub.add_parser("run", parents=[common],
                       help="integrate to t_end, writing diagnostics "
                            "and snapshots")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("converge-n", parents=[common],
                       help="error and negative-part sweep over velocity "
                            "resolutions")
    p.add_argument("--values", metavar="N1,N2,...",
                   help="velocity resolutions to sweep")
    p.add_argument("--self-reference", action="store_true",
                   help="compare against the largest-N run instead of an "
                        "exact solution")
    p.set_defaults(func=cmd_converge_n)

    p = sub.add_parser("converge-k", parents=[common],
                       help="error sweep over chaos degrees at fixed N")
    p.add_argument("--values", metavar="K1,K2,...",
                   help="chaos degrees to sweep")
    p.add_argument("--self-reference", action="store_true",
                   help="compare against the largest-K run instead of an "
                        "exact solution")
    p.set_defaults(func=cmd_converge_k)

    p = sub.add_parser("validate-ic", parents=[common],
                       help="project the initial condition and check "
                            "mass, norm contraction, and negative part")
    p.set_defaults(func=cmd_validate_ic)

    p = sub.add_parser("oracle-check", parents=[common],
                       help="compare the spectral right-hand side with "
                            "direct quadrature (small N only)")
    p.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "func", None) is None:
        parser.print_help()
        return 1
    if args.config is None:
        print("error: --config is required", file=sys.stderr)
        return 1
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except (WeightCacheError, SnapshotError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BlowUpError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2
