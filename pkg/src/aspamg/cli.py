"""Command-line driver.

Subcommands: ``solve``, ``generate``, ``sweep`` and ``lowrank-experiment``.
Exit codes: 0 success, 1 configuration error, 2 I/O error, 3 no
convergence, 4 numerical failure.
"""
import argparse
import json
import logging
import sys
import time

import numpy as np

from aspamg.diagnostics import damping_experiment
from aspamg.fem import Material, assemble_hex_cube, two_material_field
from aspamg.fileio import (
    ConfigError,
    CoordinateFileError,
    MatrixMarketError,
    SolverConfig,
    dump_json,
    format_table,
    load_config,
    read_coordinates,
    read_matrix_market,
    set_option,
    write_coordinates,
    write_csv,
    write_matrix_market,
)
from aspamg.hierarchy import amg_setup, complexities, vcycle_apply
from aspamg.krylov import pcg

__all__ = ["main", "run_solve", "solve_system", "generate_problem"]

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NOCONV, EXIT_NUMERIC = 0, 1, 2, 3, 4

log = logging.getLogger("aspamg")


def generate_problem(kind, nx, ny=None, nz=None, spacing=1.0):
    """``cube``: one material; ``beam``: two materials split along x (E ratio 100)."""
    ny = nx if ny is None else ny
    nz = nx if nz is None else nz
    if kind == "cube":
        return assemble_hex_cube(nx, ny, nz, spacing)
    if kind == "beam":
        mats = two_material_field(nx, ny, nz, Material(1.0, 0.3), Material(100.0, 0.3))
        return assemble_hex_cube(nx, ny, nz, spacing, mats)
    raise ConfigError(f"unknown problem kind {kind!r}")


def solve_system(A, coordinates, cfg, name="matrix", b=None, threads=1):
    """Build the preconditioner, run PCG, and return ``(x, report_dict)``."""
    t_start = time.perf_counter()
    h = amg_setup(A, coordinates, cfg.hierarchy_config())
    t_p = time.perf_counter() - t_start
    b = np.ones(A.shape[0]) if b is None else b
    x, rep = pcg(A, b, lambda r: vcycle_apply(h, r), cfg.rel_tol, cfg.max_it)
    t_t = time.perf_counter() - t_start
    c_gd, c_op, c_fs = complexities(h)
    timings = dict(h.timings)
    timings.update(T_p=t_p, T_s=rep.timings["T_s"], T_t=t_t)
    report = {
        "problem": name,
        "n": int(A.shape[0]),
        "nnz": int(A.nnz),
        "config": cfg.as_dict(),
        "seed": int(cfg.seed),
        "threads": int(threads),
        "levels": h.n_levels,
        "level_sizes": [lev.n for lev in h.levels],
        "C_gd": c_gd,
        "C_op": c_op,
        "C_fs": c_fs,
        "n_it": rep.iterations,
        "converged": rep.converged,
        "residual_history": [float(v) for v in rep.residual_history],
        "true_residual": rep.true_residual,
        "timings": timings,
    }
    return x, report


def _add_problem_args(p):
    g = p.add_argument_group("problem")
    g.add_argument("--matrix", help="Matrix Market file")
    g.add_argument("--coords", help="node coordinate file (x y z per line)")
    g.add_argument("--generate", choices=("cube", "beam"), help="generate a problem instead")
    g.add_argument("--nx", type=int, default=8)
    g.add_argument("--ny", type=int)
    g.add_argument("--nz", type=int)
    g.add_argument("--spacing", type=float, default=1.0)


def _add_config_args(p):
    p.add_argument("--config", help="key = value configuration file")
    g = p.add_argument_group("solver parameters (override the config file)")
    for key in SolverConfig().as_dict():
        g.add_argument(f"--{key.replace('_', '-')}", dest=f"opt_{key}", metavar="V")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--json-out", help="write the JSON report here")
    p.add_argument("-v", "--verbose", action="store_true")


def _config_from(args):
    cfg = load_config(args.config) if args.config else SolverConfig()
    for key in SolverConfig().as_dict():
        v = getattr(args, f"opt_{key}", None)
        if v is not None:
            cfg = set_option(cfg, key, v)
    cfg.hierarchy_config()
    return cfg


def _load_problem(args):
    if args.generate:
        p = generate_problem(args.generate, args.nx, args.ny, args.nz, args.spacing)
        ny = args.nx if args.ny is None else args.ny
        nz = args.nx if args.nz is None else args.nz
        return p.stiffness, p.free_coordinates, f"{args.generate}{args.nx}x{ny}x{nz}", p
    if not args.matrix:
        raise ConfigError("either --matrix or --generate is required")
    A = read_matrix_market(args.matrix)
    coords = None
    if args.coords:
        if A.shape[0] % 3:
            raise ConfigError("coordinates given but the matrix size is not a multiple of 3")
        coords = read_coordinates(args.coords, A.shape[0] // 3)
    return A, coords, args.matrix, None


def _cmd_solve(args):
    cfg = _config_from(args)
    A, coords, name, _ = _load_problem(args)
    x, report = solve_system(A, coords, cfg, name, threads=args.threads)
    print(format_table([report]))
    print(f"levels: {report['level_sizes']}  converged: {report['converged']}")
    if args.json_out:
        dump_json(args.json_out, report)
    if args.solution_out:
        np.savetxt(args.solution_out, x)
    return EXIT_OK if report["converged"] else EXIT_NOCONV


def _cmd_generate(args):
    p = generate_problem(args.problem, args.nx, args.ny, args.nz, args.spacing)
    write_matrix_market(f"{args.out}.mtx", p.stiffness)
    write_coordinates(f"{args.out}.xyz", p.free_coordinates)
    print(f"wrote {args.out}.mtx ({p.stiffness.shape[0]} rows, {p.stiffness.nnz} nnz) "
          f"and {args.out}.xyz ({p.free_coordinates.shape[0]} nodes)")
    return EXIT_OK


def _cmd_sweep(args):
    base = _config_from(args)
    if args.param not in base.as_dict():
        raise ConfigError(f"unknown parameter {args.param!r}")
    A, coords, name, _ = _load_problem(args)
    reports = []
    status = EXIT_OK
    for value in args.values.split(","):
        cfg = set_option(base, args.param, value.strip())
        _, rep = solve_system(A, coords, cfg, name, threads=args.threads)
        reports.append(rep)
        if not rep["converged"]:
            status = EXIT_NOCONV
    print(format_table(reports, (args.param,)))
    if args.csv_out:
        write_csv(args.csv_out, reports, (args.param,))
    if args.json_out:
        dump_json(args.json_out, reports)
    return status


def _cmd_lowrank(args):
    cfg = _config_from(args)
    if args.matrix:
        raise ConfigError("the low-rank experiment runs on generated problems only")
    problem = generate_problem(args.generate or "cube", args.nx, args.ny, args.nz, args.spacing)
    out = damping_experiment(problem, cfg.hierarchy_config(), args.k, args.alpha,
                             cfg.rel_tol, args.maxit, seed=cfg.seed)
    print(json.dumps(out, indent=2))
    if args.json_out:
        dump_json(args.json_out, out)
    return EXIT_OK if out["baseline"]["converged"] and out["updated"]["converged"] else EXIT_NOCONV


def build_parser():
    parser = argparse.ArgumentParser(prog="aspamg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="build the preconditioner and run PCG")
    _add_problem_args(p)
    _add_config_args(p)
    p.add_argument("--solution-out", help="write the solution vector (text)")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("generate", help="write a generated problem to disk")
    p.add_argument("--problem", choices=("cube", "beam"), default="cube")
    p.add_argument("--nx", type=int, default=8)
    p.add_argument("--ny", type=int)
    p.add_argument("--nz", type=int)
    p.add_argument("--spacing", type=float, default=1.0)
    p.add_argument("--out", required=True, help="output prefix for .mtx and .xyz")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("sweep", help="vary one parameter, one report row per value")
    _add_problem_args(p)
    _add_config_args(p)
    p.add_argument("--param", required=True)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--csv-out")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("lowrank-experiment", help="smoother damping study")
    _add_problem_args(p)
    _add_config_args(p)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--alpha", type=float, default=5.0)
    p.add_argument("--maxit", type=int, default=5000)
    p.set_defaults(func=_cmd_lowrank)
    return parser


def run_solve(argv=None):
    """Parse ``argv`` and run a subcommand; returns the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, MatrixMarketError, CoordinateFileError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (np.linalg.LinAlgError, ArithmeticError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def main():
    sys.exit(run_solve())


if __name__ == "__main__":
    main()
