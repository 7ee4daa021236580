"""Poisson vs signed-distance safety function on the double-integrator scenario.

Prints safety margins, time to reach the goal and control total variation
for each start, and writes the trajectories to ``out/double_integrator/<baseline>/``.
"""

import argparse
from dataclasses import replace
from pathlib import Path

import numpy as np

from psafe.sim import Scenario, control_total_variation, run_scenario

HERE = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--scenario", default=HERE / "scenarios" / "double_integrator.json")
    ap.add_argument("--out", default=HERE / "out" / "double_integrator")
    args = ap.parse_args()

    sc = Scenario.from_json(args.scenario)
    goal = np.asarray(sc.goal)
    print(f"{'baseline':8s} {'ic':>2s} {'min h':>10s} {'min h_B':>10s} {'reach [s]':>9s} {'TV':>8s}")
    for baseline in ("poisson", "sdf"):
        out = Path(args.out) / baseline
        out.mkdir(parents=True, exist_ok=True)
        for k, log in enumerate(run_scenario(replace(sc, baseline=baseline))):
            log.write_csv(out / f"traj_{k}.csv")
            near = np.linalg.norm(log.position - goal, axis=1) <= 0.05
            reach = log.t[np.argmax(near)] if near.any() else float("nan")
            print(f"{baseline:8s} {k:2d} {log.h.min():10.3e} {log.h_b.min():10.3e} {reach:9.2f} "
                  f"{control_total_variation(log):8.2f}")


if __name__ == "__main__":
    main()
