"""Moving-obstacle scenario with and without the dh/dt term in the filter."""

import argparse
import time
from dataclasses import replace
from pathlib import Path

from psafe.sim import FrameSchedule, Scenario, run_scenario

HERE = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--scenario", default=HERE / "scenarios" / "dynamic.json")
    ap.add_argument("--out", default=HERE / "out" / "dynamic")
    args = ap.parse_args()

    base = Scenario.from_json(args.scenario)
    for use_dhdt in (True, False):
        sc = replace(base, filter=replace(base.filter, use_dhdt=use_dhdt))
        t0 = time.perf_counter()
        sched = FrameSchedule(sc)
        logs = run_scenario(sc, sched)
        out = Path(args.out) / ("dhdt" if use_dhdt else "no_dhdt")
        out.mkdir(parents=True, exist_ok=True)
        for k, log in enumerate(logs):
            log.write_csv(out / f"traj_{k}.csv")
        iters = sched.total_iterations / len(sched.frames)
        print(f"dh/dt={'on ' if use_dhdt else 'off'}  min h per start: "
              + ", ".join(f"{log.h.min():+.4f}" for log in logs)
              + f"  ({len(sched.frames)} frames, {iters:.0f} SOR iterations/frame, {time.perf_counter() - t0:.1f} s)")


if __name__ == "__main__":
    main()
