import json

import numpy as np
import pytest

from psafe import maps
from psafe.errors import UnsafeInitialStateError
from psafe.filters import FilterParams
from psafe.forcing import ForcingConfig
from psafe.grid import save_occupancy
from psafe.sim import (COLUMNS, FrameSchedule, ObstacleMotion, Scenario, TrajectoryLog, control_total_variation,
                       discrete_cbf_violation, nominal_pd, run_scenario, shift_cells)

SMALL = dict(grid=maps.block_room(40, 0.075, size=6), forcing=ForcingConfig("avgflux"))


def test_nominal_pd():
    assert np.array_equal(nominal_pd([1, 2], [1, 2], 1.0, 2.0, "r1"), [0, 0])
    assert np.array_equal(nominal_pd([2, 0], [1, 0], 2.0, 0.0, "r1"), [-2, 0])
    assert np.array_equal(nominal_pd([0, 1, 0, 1], [0, 0], 1.0, 2.0, "r2"), [0, -3])
    assert np.array_equal(nominal_pd([3, 3, 0, 0], [3, 3], 1.0, 2.0, "r2"), [0, 0])


@pytest.mark.parametrize("kw", [{"dt": 0.0}, {"duration": -1.0}, {"resolve_period": 0.005},
                                {"model": "r3"}, {"baseline": "edt"}, {"kp": -1.0}])
def test_scenario_validation(kw):
    with pytest.raises(ValueError):
        Scenario(initial_states=[[1, 1]], goal=(1, 1), **{**SMALL, **kw})


def test_scenario_needs_map():
    with pytest.raises(ValueError):
        Scenario(initial_states=[[1, 1]], goal=(1, 1))


def test_empty_room_stabilizes():
    sc = Scenario(initial_states=[[0.3, 0.4]], goal=(1.5, 1.5), grid=maps.empty_room(40, 0.075),
                  forcing=ForcingConfig("avgflux"), duration=8.0)
    (log,) = run_scenario(sc)
    assert log.rows.shape == (sc.steps + 1, len(COLUMNS))
    assert np.all(np.diff(log.t) > 0)
    assert np.linalg.norm(log.position[-1] - sc.goal) <= 0.05
    d_wall = np.minimum.reduce([log.position[:, 0], log.position[:, 1]])
    active = log.column("active") > 0
    assert not np.any(active & (d_wall > 0.6))
    # h grows while the robot moves away from the corner
    assert log.h[-1] > log.h[0]


def test_r1_forward_invariance_toward_obstacle():
    # goal inside the block: the filter must stop at the boundary
    sc = Scenario(initial_states=[[0.6, 0.6], [2.3, 1.5]], goal=(1.5, 1.5), kp=2.0, duration=6.0, **SMALL)
    for log in run_scenario(sc):
        assert log.h.min() >= -1e-6
        assert log.column("active").any()
        assert np.allclose(log.column("h_B"), log.h)


def test_r2_forward_invariance():
    sc = Scenario(initial_states=[[0.6, 0.6, 0.3, 0.0]], goal=(1.5, 1.5), model="r2", kp=1.0, kd=2.0,
                  filter=FilterParams(gamma=0.5, mu1=3.0), duration=8.0, **SMALL)
    (log,) = run_scenario(sc)
    assert log.h_b.min() >= -1e-6 and log.h.min() >= -1e-6
    assert np.all(log.h_b <= log.h + 1e-15)


def test_unsafe_initial_state():
    sc = Scenario(initial_states=[[1.5, 1.5]], goal=(1.0, 1.0), **SMALL)
    with pytest.raises(UnsafeInitialStateError):
        run_scenario(sc)
    fast = Scenario(initial_states=[[0.3, 0.3, 40.0, 0.0]], goal=(1.0, 1.0), model="r2", **SMALL)
    with pytest.raises(UnsafeInitialStateError):
        run_scenario(fast)


def test_metrics_on_synthetic_log():
    t = np.arange(5) * 0.5
    rows = np.zeros((5, len(COLUMNS)))
    rows[:, 0] = t
    rows[:, COLUMNS.index("h")] = [1.0, 0.5, 0.0, 0.2, 0.2]
    rows[:, COLUMNS.index("u_x")] = [0, 1, 1, -1, -1]
    log = TrajectoryLog(rows)
    # worst step is 0.5 -> 0.0: -1 + 0.5 = -0.5
    assert discrete_cbf_violation(log, 1.0) == pytest.approx(0.5)
    assert control_total_variation(log) == pytest.approx(3.0)


def test_shift_cells():
    m = np.zeros((5, 6), bool)
    m[1, 1] = True
    assert shift_cells(m, 2, 3)[3, 4]
    assert shift_cells(m, 2, 3).sum() == 1
    assert not shift_cells(m, 0, 9).any()


def test_obstacle_motion_offset():
    m = ObstacleMotion(2, ((0, 0, 0), (1, 0.5, 0), (2, 0.5, 1.0)))
    assert np.allclose(m.offset(-1), [0, 0])
    assert np.allclose(m.offset(0.5), [0.25, 0])
    assert np.allclose(m.offset(1.5), [0.5, 0.5])
    assert np.allclose(m.offset(9), [0.5, 1.0])


def test_schedule_moves_obstacle_and_warm_starts():
    sc = Scenario(initial_states=[[0.5, 0.5]], goal=(0.5, 0.5), resolve_period=0.1, duration=0.3,
                  obstacle_motion=[ObstacleMotion(2, ((0, 0, 0), (0.3, 0.225, 0)))], **SMALL)
    sched = FrameSchedule(sc)
    base = sched.base.cells
    assert np.array_equal(sched.grid_at(0.0).cells, base)
    moved = sched.grid_at(0.1).cells
    assert moved.sum() == base.sum()
    assert np.array_equal(shift_cells(sched.ids == 2, 0, 1) | (base & (sched.ids != 2)), moved)
    sched.index_at(0.0)
    k = sched.index_at(0.1)
    cold, warm = sched.frames[0], sched.frames[k]
    assert warm.stats[0].warm_started and warm.stats[0].iterations < cold.stats[0].iterations
    assert warm.dh_dt is not None and np.abs(warm.dh_dt.values).max() > 0


def test_scenario_json_and_csv(tmp_path):
    save_occupancy(tmp_path / "room.pgm", maps.empty_room(30, 0.1))
    spec = {"map": "room.pgm", "model": "r1", "initial_states": [[0.5, 0.5]], "goal": [1.5, 1.5],
            "filter": {"gamma": 2.0}, "forcing": {"method": "avgflux", "bflux_obs": {"2": -3.0}},
            "dt": 0.02, "duration": 1.0,
            "obstacle_motion": [{"obstacle": 1, "waypoints": [[0, 0, 0]]}]}
    (tmp_path / "sc.json").write_text(json.dumps(spec))
    sc = Scenario.from_json(tmp_path / "sc.json")
    assert sc.filter.gamma == 2.0 and sc.forcing.bflux_obs == {2: -3.0}
    assert sc.goal == (1.5, 1.5) and sc.obstacle_motion[0].obstacle == 1
    sc.obstacle_motion = []
    (log,) = run_scenario(sc)
    log.write_csv(tmp_path / "traj.csv")
    back = np.loadtxt(tmp_path / "traj.csv", delimiter=",", skiprows=1)
    assert np.array_equal(back, log.rows)
    assert (tmp_path / "traj.csv").read_text().splitlines()[0] == ",".join(COLUMNS)


def test_sdf_baseline_runs():
    sc = Scenario(initial_states=[[0.6, 0.6]], goal=(2.4, 2.4), baseline="sdf", duration=2.0, **SMALL)
    (log,) = run_scenario(sc)
    assert log.h.min() > 0
