"""Command-line entry point: ``swimprom {simulate,compare,optimize,check}``."""
from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from .config import ConfigError, load_config
from .integrator import SolverError, write_trajectory_csv
from .mesh import MeshError, write_mesh
from .optimizer import optimize, write_log_csv
from .pipeline import (dominant_frequency, fish_problem, make_case, optimization_config, run_fom, run_rom)
from .shapes import morph

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_VERIFY = 0, 1, 2, 3

log = logging.getLogger("swimprom")


def _parse_xi(text, case):
    n = case.basis.n_params
    if text is None:
        return np.zeros(n)
    try:
        xi = np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError as exc:
        raise ConfigError(f"--xi must be a comma-separated list of numbers ({exc})") from exc
    if xi.size != n:
        raise ConfigError(f"--xi has {xi.size} values, the shape basis has {n} parameters")
    morph(case.mesh, case.basis, xi)  # bounds and element inversion
    return xi


def _write_text(path, text):
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _summary(config, **values):
    c = config
    lines = [f"dt = {c.integrator.dt}", f"horizon = {c.integrator.horizon}", f"fluid_density = {c.fluid.density}"]
    for k, v in values.items():
        lines.append(f"{k} = {v:.17g}" if isinstance(v, float) else f"{k} = {v}")
    return "\n".join(lines) + "\n"


def cmd_simulate(config, xi_text, use_fom, out):
    case = make_case(config)
    xi = _parse_xi(xi_text, case)
    if use_fom:
        traj, t_build, t_solve = run_fom(case, xi)
        traj.q = traj.q[:, :0]
        model_name = "fom"
    else:
        _, _, traj, t_build, t_solve = run_rom(case, xi)
        model_name = "rom"
    write_trajectory_csv(traj, os.path.join(out, "trajectory.csv"))
    half = len(traj.t) // 2
    text = _summary(config, model=model_name, swim_distance=float(traj.head_x[-1]),
                    tail_amplitude=float(np.abs(traj.tail_y[half:]).max()),
                    build_time=float(t_build), solve_time=float(t_solve))
    _write_text(os.path.join(out, "summary.txt"), text)
    print(text, end="")
    return EXIT_OK


def cmd_compare(config, xi_text, out):
    case = make_case(config)
    xi = _parse_xi(xi_text, case)
    _, _, rom, rb, rs = run_rom(case, xi)
    try:
        fom, fb, fs = run_fom(case, xi)
    except SolverError as exc:
        print(f"FOM diverged at step {exc.step}: {exc}")
        return EXIT_SOLVER
    data = np.column_stack([rom.t, rom.head_x, fom.head_x, rom.tail_y, fom.tail_y])
    path = os.path.join(out, "compare.csv")
    np.savetxt(path + ".tmp", data, delimiter=",", fmt="%.17g", comments="",
               header="t,head_x_rom,head_x_fom,tail_y_rom,tail_y_fom")
    os.replace(path + ".tmp", path)
    d_fom = float(fom.head_x[-1])
    rel = (float(rom.head_x[-1]) - d_fom) / d_fom if d_fom else float("nan")
    text = _summary(config, swim_distance_rom=float(rom.head_x[-1]), swim_distance_fom=d_fom,
                    relative_error=rel, tail_frequency_rom=dominant_frequency(rom.t, rom.tail_y),
                    tail_frequency_fom=dominant_frequency(fom.t, fom.tail_y),
                    rom_build_time=rb, rom_solve_time=rs, fom_build_time=fb, fom_solve_time=fs,
                    speedup=fs / rs)
    _write_text(os.path.join(out, "compare.txt"), text)
    print(text, end="")
    return EXIT_OK


def cmd_optimize(config, out):
    case = make_case(config)
    result = optimize(fish_problem(case), case.basis.bounds, optimization_config(config))
    write_log_csv(result, case.basis.names, os.path.join(out, "optimization_log.csv"))
    nodes, _ = morph(case.mesh, case.basis, result.xi)
    write_mesh(case.mesh.with_nodes(nodes), os.path.join(out, "optimal_mesh.txt"))
    print(f"xi* = {','.join(f'{v:.6g}' for v in result.xi)}")
    print(f"rebuilds = {result.rebuilds}  converged = {result.converged}")
    print(f"improvement factor = {result.improvement:.6g}")
    return EXIT_OK


def cmd_check(config, out, L1=None):
    from .checks import run_checks
    results = run_checks(make_case(config), L1=L1)
    text = "\n".join(r.line() for r in results) + "\n"
    _write_text(os.path.join(out, "check_report.txt"), text)
    print(text, end="")
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


def build_parser():
    p = argparse.ArgumentParser(prog="swimprom", description="Parametric reduced models of soft swimmers.")
    p.add_argument("--log-level", default="WARNING", help="logging level (default WARNING)")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("simulate", "compare", "optimize", "check"):
        s = sub.add_parser(name)
        s.add_argument("--config", help="TOML run configuration")
        s.add_argument("--out", default=".", help="output directory")
        s.add_argument("--log-level", default=None)
        if name in ("simulate", "compare"):
            s.add_argument("--xi", help="comma-separated shape parameters")
        if name == "simulate":
            s.add_argument("--fom", action="store_true", help="run the full-order model")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    level = args.log_level or "WARNING"
    logging.basicConfig(level=getattr(logging, str(level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config)
        os.makedirs(args.out, exist_ok=True)
        if args.command == "simulate":
            return cmd_simulate(config, args.xi, args.fom, args.out)
        if args.command == "compare":
            return cmd_compare(config, args.xi, args.out)
        if args.command == "optimize":
            return cmd_optimize(config, args.out)
        return cmd_check(config, args.out)
    except (ConfigError, MeshError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
