"""Write the synthetic maps and the shipped scenario JSONs into ``scenarios/``."""

import json
from pathlib import Path

from psafe import maps
from psafe.grid import save_occupancy

ROOT = Path(__file__).resolve().parents[1] / "scenarios"

MAPS = {
    "empty": maps.empty_room(),
    "block": maps.block_room(),
    "multi": maps.multi_obstacle(),
    "navigation": maps.navigation_map(),
    "dynamic": maps.dynamic_map(),
}

SCENARIOS = {
    # double integrator with the backstepping filter, three starts around the central disk
    "double_integrator": {
        "map": "maps/navigation.pgm",
        "buffer": 0.1,
        "model": "r2",
        "initial_states": [[0.3, 1.5, 0, 0], [1.5, 0.3, 0, 0], [0.45, 0.7, 0, 0]],
        "goal": [2.5, 2.5],
        "kp": 1.0,
        "kd": 2.0,
        "filter": {"gamma": 0.5, "sigma": 1.0, "mu1": 3.0},
        "forcing": {"method": "guidance", "bflux": -1.0},
        "dt": 0.01,
        "duration": 30.0,
    },
    "static_r1": {
        "map": "maps/navigation.pgm",
        "buffer": 0.1,
        "model": "r1",
        "initial_states": [[0.3, 1.5], [1.5, 0.3], [0.45, 0.7]],
        "goal": [2.5, 2.5],
        "kp": 1.0,
        "filter": {"gamma": 1.0},
        "forcing": {"method": "guidance", "bflux": -1.0},
        "dt": 0.01,
        "duration": 12.0,
    },
    # box sweeps left to right at 0.25 m/s past a robot holding station just above its path
    "dynamic": {
        "map": "maps/dynamic.pgm",
        "buffer": 0.1,
        "model": "r1",
        "initial_states": [[1.5, 1.75], [1.2, 1.9]],
        "goal": [1.5, 1.75],
        "kp": 1.0,
        "filter": {"gamma": 1.0, "use_dhdt": True},
        "forcing": {"method": "avgflux", "bflux": -1.0},
        "dt": 0.01,
        "duration": 10.0,
        "resolve_period": 0.1,
        "obstacle_motion": [{"obstacle": 3, "waypoints": [[0.0, 0.0, 0.0], [0.5, 0.0, 0.0], [8.1, 1.9, 0.0]]}],
    },
}


def main():
    for name, grid in MAPS.items():
        save_occupancy(ROOT / "maps" / f"{name}.pgm", grid)
    for name, sc in SCENARIOS.items():
        (ROOT / f"{name}.json").write_text(json.dumps(sc, indent=2) + "\n")
        print("wrote", ROOT / f"{name}.json")


if __name__ == "__main__":
    main()
