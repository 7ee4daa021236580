"""Command-line entry point: ``psafe {solve,guidance,sdf,simulate,check} ...``.

Fields are written as CSV files; stats and reports go to stdout as JSON.
Exit codes: 0 success, 1 on a library error, 2 on a usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .errors import PsafeError
from .forcing import BoundaryFluxSpec, ForcingConfig, make_forcing, solve_guidance_field
from .grid import buffer_obstacles, decompose_domain, distance_field, load_occupancy, read_field_csv, write_field_csv
from .safety import (assemble_frame, check_dirichlet_energy, check_divergence, check_positivity_and_hopf,
                     frame_from_field)
from .sim import Scenario, run_scenario


def _flux_override(text: str) -> tuple[int, float]:
    try:
        key, value = text.split("=", 1)
        return int(key), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected i=v, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="psafe", description="Poisson safety functions on occupancy maps")
    sub = p.add_subparsers(dest="command", required=True)

    def map_args(sp):
        sp.add_argument("--map", required=True, help="occupancy map (PGM)")
        sp.add_argument("--res", type=float, default=None, help="cell size in m (else from the JSON sidecar)")
        sp.add_argument("--buffer", type=float, default=0.0, help="obstacle buffer radius in m")

    def solver_args(sp):
        sp.add_argument("--tol", type=float, default=1e-4)
        sp.add_argument("--max-iter", type=int, default=None)
        sp.add_argument("--omega", type=float, default=None)

    def forcing_args(sp):
        sp.add_argument("--forcing", choices=("holder", "avgflux", "guidance"), default="guidance")
        sp.add_argument("--alpha", type=float, default=0.1)
        sp.add_argument("--beta", type=float, default=1.0)
        sp.add_argument("--bflux", type=float, default=-1.0)
        sp.add_argument("--bflux-obs", type=_flux_override, action="append", default=[], metavar="I=V")

    sp = sub.add_parser("solve", help="map -> safety function CSV")
    map_args(sp), solver_args(sp), forcing_args(sp)
    sp.add_argument("--warm", default=None, help="previous h CSV used as initial guess")
    sp.add_argument("--out", default="h.csv")

    sp = sub.add_parser("guidance", help="map -> guidance field CSVs")
    map_args(sp), solver_args(sp)
    sp.add_argument("--bflux", type=float, default=-1.0)
    sp.add_argument("--bflux-obs", type=_flux_override, action="append", default=[], metavar="I=V")
    sp.add_argument("--out", default=".", help="output directory for vx.csv and vy.csv")

    sp = sub.add_parser("sdf", help="map -> signed distance CSV")
    map_args(sp)
    sp.add_argument("--out", default="sdf.csv")

    sp = sub.add_parser("simulate", help="scenario JSON -> trajectory CSVs")
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--baseline", choices=("poisson", "sdf"), default=None)
    sp.add_argument("--out", default=".", help="output directory for traj_<k>.csv")

    sp = sub.add_parser("check", help="map + forcing -> invariant report")
    map_args(sp), solver_args(sp), forcing_args(sp)
    return p


def _decomp(args):
    grid = buffer_obstacles(load_occupancy(args.map, args.res), args.buffer)
    return decompose_domain(grid)


def _forcing_config(args) -> ForcingConfig:
    return ForcingConfig(args.forcing, args.alpha, args.beta, args.bflux, dict(args.bflux_obs))


def _solve(args, decomp):
    f, _ = make_forcing(decomp, _forcing_config(args), args.tol, args.max_iter)
    prev = None
    if args.warm is not None:
        prev = frame_from_field(read_field_csv(args.warm), t=-1.0)
        if prev.h.shape != decomp.grid.shape:
            raise PsafeError(f"warm-start field {prev.h.shape} does not match the map {decomp.grid.shape}")
    frame = assemble_frame(decomp, f, tol=args.tol, max_iter=args.max_iter, omega=args.omega, prev=prev, t=0.0)
    return frame, f


def cmd_solve(args) -> dict:
    decomp = _decomp(args)
    frame, _ = _solve(args, decomp)
    write_field_csv(args.out, frame.h)
    s_free, s_obs = frame.stats
    out = asdict(s_free)
    out["obstacle_iterations"] = s_obs.iterations
    out["obstacle_residual"] = s_obs.residual
    out["output"] = str(args.out)
    return out


def cmd_guidance(args) -> dict:
    decomp = _decomp(args)
    spec = BoundaryFluxSpec(args.bflux, dict(args.bflux_obs))
    v = solve_guidance_field(decomp, spec, args.tol, args.max_iter, args.omega)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_field_csv(out / "vx.csv", v.x)
    write_field_csv(out / "vy.csv", v.y)
    return {"vx": asdict(v.x.stats), "vy": asdict(v.y.stats), "output": str(out)}


def cmd_sdf(args) -> dict:
    d = distance_field(_decomp(args), "signed")
    write_field_csv(args.out, d)
    return {"min": float(d.values.min()), "max": float(d.values.max()), "output": str(args.out)}


def cmd_simulate(args) -> dict:
    sc = Scenario.from_json(args.scenario)
    if args.baseline is not None:
        sc.baseline = args.baseline
    logs = run_scenario(sc)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    runs = []
    for k, log in enumerate(logs):
        path = out / f"traj_{k}.csv"
        log.write_csv(path)
        runs.append({
            "output": str(path),
            "min_h": float(log.h.min()),
            "min_h_B": float(log.h_b.min()),
            "final_goal_distance": float(np.linalg.norm(log.position[-1] - np.asarray(sc.goal))),
        })
    return {"baseline": sc.baseline, "runs": runs}


def cmd_check(args) -> dict:
    decomp = _decomp(args)
    args.warm = None
    frame, f = _solve(args, decomp)
    hopf = check_positivity_and_hopf(frame, decomp)
    s_free = frame.stats[0]
    return {
        "min_free_h": hopf.min_free_h,
        "max_obstacle_h": hopf.max_obstacle_h,
        "max_boundary_outward_derivative": hopf.max_boundary_outward_derivative,
        "divergence_rel_error": check_divergence(frame, decomp, f),
        "dirichlet_energy_worst_gap": check_dirichlet_energy(frame, decomp, f),
        "iterations": s_free.iterations,
        "residual": s_free.residual,
    }


COMMANDS = {"solve": cmd_solve, "guidance": cmd_guidance, "sdf": cmd_sdf,
            "simulate": cmd_simulate, "check": cmd_check}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 for --help
        return int(exc.code or 0)
    try:
        report = COMMANDS[args.command](args)
    except (PsafeError, ValueError, OSError) as exc:
        print(f"psafe {args.command}: {exc}", file=sys.stderr)
        return 1
    json.dump(report, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
