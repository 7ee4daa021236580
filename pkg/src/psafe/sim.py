"""Scenario runner: integrator models, PD nominal control and per-step safety filtering."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import UnsafeInitialStateError
from .filters import FilterParams, backstep_eval, filter_r1, filter_r2
from .forcing import ForcingConfig, make_forcing
from .grid import OccupancyGrid, buffer_obstacles, decompose_domain, distance_field, load_occupancy
from .safety import SafetyFrame, assemble_frame, frame_from_field, sample

log = logging.getLogger(__name__)

COLUMNS = ("t", "x", "y", "xdot", "ydot", "u_x", "u_y", "h", "h_B", "active", "min_dist")


@dataclass(frozen=True)
class ObstacleMotion:
    """Rigid translation of one obstacle; offsets are linearly interpolated and held at the ends."""

    obstacle: int
    waypoints: tuple[tuple[float, float, float], ...]  # (t, dx, dy)

    def offset(self, t: float) -> np.ndarray:
        w = np.asarray(self.waypoints, dtype=np.float64)
        return np.array([np.interp(t, w[:, 0], w[:, 1]), np.interp(t, w[:, 0], w[:, 2])])


@dataclass
class Scenario:
    initial_states: list
    goal: tuple[float, float]
    map: str | None = None
    resolution: float | None = None
    buffer: float = 0.0
    model: str = "r1"
    kp: float = 1.0
    kd: float = 2.0
    filter: FilterParams = field(default_factory=FilterParams)
    forcing: ForcingConfig = field(default_factory=ForcingConfig)
    dt: float = 0.01
    duration: float = 10.0
    resolve_period: float = 0.0
    obstacle_motion: list[ObstacleMotion] = field(default_factory=list)
    baseline: str = "poisson"
    tol: float = 1e-4
    interp: str = "cubic"
    grid: OccupancyGrid | None = None

    def __post_init__(self):
        if self.model not in ("r1", "r2"):
            raise ValueError(f"model must be 'r1' or 'r2', got {self.model!r}")
        if self.baseline not in ("poisson", "sdf"):
            raise ValueError(f"baseline must be 'poisson' or 'sdf', got {self.baseline!r}")
        if not self.dt > 0 or not self.duration > 0:
            raise ValueError("dt and duration must be positive")
        if self.resolve_period != 0 and self.resolve_period < self.dt:
            raise ValueError("resolve_period must be 0 or at least dt")
        if self.kp < 0 or self.kd < 0:
            raise ValueError("PD gains must be non-negative")
        if self.grid is None and self.map is None:
            raise ValueError("scenario needs a map path or a grid")

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> "Scenario":
        d = dict(d)
        if "filter" in d:
            d["filter"] = FilterParams(**d["filter"])
        if "forcing" in d:
            fc = dict(d["forcing"])
            fc["bflux_obs"] = {int(k): float(v) for k, v in fc.get("bflux_obs", {}).items()}
            d["forcing"] = ForcingConfig(**fc)
        d["obstacle_motion"] = [
            ObstacleMotion(int(m["obstacle"]), tuple(tuple(w) for w in m["waypoints"]))
            for m in d.get("obstacle_motion", [])
        ]
        if d.get("map") is not None and base_dir is not None:
            d["map"] = str((base_dir / d["map"]).resolve())
        d["goal"] = tuple(d["goal"])
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "Scenario":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), path.parent)

    def base_grid(self) -> OccupancyGrid:
        grid = self.grid if self.grid is not None else load_occupancy(self.map, self.resolution)
        return buffer_obstacles(grid, self.buffer)

    @property
    def steps(self) -> int:
        return int(round(self.duration / self.dt))


@dataclass
class TrajectoryLog:
    rows: np.ndarray

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, COLUMNS.index(name)]

    @property
    def t(self) -> np.ndarray:
        return self.column("t")

    @property
    def position(self) -> np.ndarray:
        return self.rows[:, 1:3]

    @property
    def command(self) -> np.ndarray:
        return self.rows[:, 5:7]

    @property
    def h(self) -> np.ndarray:
        return self.column("h")

    @property
    def h_b(self) -> np.ndarray:
        return self.column("h_B")

    def write_csv(self, path) -> None:
        np.savetxt(path, self.rows, delimiter=",", header=",".join(COLUMNS), comments="", fmt="%.17g")


def nominal_pd(state, goal, kp: float, kd: float, model: str) -> np.ndarray:
    """``-kp (y - goal)`` for r1; ``-kp (y - goal) - kd ydot`` for r2."""
    state = np.asarray(state, dtype=np.float64)
    err = state[:2] - np.asarray(goal, dtype=np.float64)
    if model == "r1":
        return -kp * err
    return -kp * err - kd * state[2:4]


def control_total_variation(traj: TrajectoryLog) -> float:
    return float(np.sum(np.linalg.norm(np.diff(traj.command, axis=0), axis=1)))


def discrete_cbf_violation(traj: TrajectoryLog, gamma: float, barrier: str = "h") -> float:
    """Largest shortfall of ``(b[k+1] - b[k]) / dt + gamma b[k] >= 0`` along a log (0 if none)."""
    b = traj.column(barrier)
    dt = np.diff(traj.t)
    lhs = np.diff(b) / dt + gamma * b[:-1]
    return float(max(0.0, -lhs.min()))


def shift_cells(mask: np.ndarray, diy: int, dix: int) -> np.ndarray:
    out = np.zeros_like(mask)
    ny, nx = mask.shape
    if abs(diy) >= ny or abs(dix) >= nx:
        return out
    src_y = slice(max(-diy, 0), ny - max(diy, 0))
    src_x = slice(max(-dix, 0), nx - max(dix, 0))
    dst_y = slice(max(diy, 0), ny - max(-diy, 0))
    dst_x = slice(max(dix, 0), nx - max(-dix, 0))
    out[dst_y, dst_x] = mask[src_y, src_x]
    return out


class FrameSchedule:
    """Safety frames for a scenario, rebuilt every ``resolve_period`` with warm starts."""

    def __init__(self, sc: Scenario):
        self.sc = sc
        self.base = sc.base_grid()
        self.ids = decompose_domain(self.base).obstacle_ids
        self.frames: list[SafetyFrame] = []
        self.grids: list[OccupancyGrid] = []
        self.trees: list[cKDTree] = []
        self._guidance = None
        self.total_iterations = 0

    def grid_at(self, t: float) -> OccupancyGrid:
        if not self.sc.obstacle_motion:
            return self.base
        cells = np.array(self.base.cells)
        moving = [m for m in self.sc.obstacle_motion]
        for m in moving:
            cells &= ~(self.ids == m.obstacle)
        for m in moving:
            diy_dix = np.rint(m.offset(t)[::-1] / self.base.resolution).astype(int)
            cells |= shift_cells(self.ids == m.obstacle, *diy_dix)
        return self.base.with_cells(cells)

    def _build(self, t: float) -> SafetyFrame:
        sc = self.sc
        grid = self.grid_at(t)
        decomp = decompose_domain(grid)
        prev = self.frames[-1] if self.frames else None
        if sc.baseline == "sdf":
            frame = frame_from_field(distance_field(decomp, "signed"), t, prev)
        else:
            f, self._guidance = make_forcing(decomp, sc.forcing, sc.tol, guidance_guess=self._guidance)
            frame = assemble_frame(decomp, f, tol=sc.tol, prev=prev, t=t)
            self.total_iterations += frame.stats[0].iterations
        self.grids.append(grid)
        ys, xs = np.nonzero(grid.cells)
        self.trees.append(cKDTree(np.column_stack([xs, ys]) * grid.resolution + np.asarray(grid.origin)))
        return frame

    def index_at(self, t: float) -> int:
        period = self.sc.resolve_period
        k = 0 if period == 0 else int(np.floor(t / period + 1e-9))
        while len(self.frames) <= k:
            self.frames.append(self._build(len(self.frames) * period))
        return k


def run_scenario(sc: Scenario, schedule: FrameSchedule | None = None) -> list[TrajectoryLog]:
    """Simulate every initial state; returns one log per state."""
    schedule = schedule or FrameSchedule(sc)
    logs = []
    for state0 in sc.initial_states:
        logs.append(_run_one(sc, schedule, np.asarray(state0, dtype=np.float64)))
    return logs


def _run_one(sc: Scenario, schedule: FrameSchedule, state0: np.ndarray) -> TrajectoryLog:
    r2 = sc.model == "r2"
    y = state0[:2].copy()
    v = state0[2:4].copy() if r2 and len(state0) >= 4 else np.zeros(2)
    params = sc.filter

    k0 = schedule.index_at(0.0)
    probe = sample(schedule.frames[k0], y, sc.interp)
    if not probe.h > 0:
        raise UnsafeInitialStateError(f"initial position {tuple(y)} has h = {probe.h:.3e} <= 0")
    if r2:
        hb = backstep_eval(probe, v, params).h_b
        if not hb > 0:
            raise UnsafeInitialStateError(f"initial state {tuple(state0)} has h_B = {hb:.3e} <= 0")

    rows = np.empty((sc.steps + 1, len(COLUMNS)))
    for k in range(sc.steps + 1):
        t = k * sc.dt
        idx = schedule.index_at(t)
        probe = sample(schedule.frames[idx], y, sc.interp)
        min_dist = schedule.trees[idx].query(y)[0]
        if r2:
            w_nom = nominal_pd(np.concatenate([y, v]), sc.goal, sc.kp, sc.kd, "r2")
            res = filter_r2(probe, v, w_nom, params)
            rows[k] = (t, *y, *v, *res.command, res.h, res.h_b, res.active, min_dist)
            v = v + sc.dt * res.command
            y = y + sc.dt * v
        else:
            u_nom = nominal_pd(y, sc.goal, sc.kp, sc.kd, "r1")
            res = filter_r1(probe, u_nom, params)
            rows[k] = (t, *y, *res.command, *res.command, res.h, res.h, res.active, min_dist)
            y = y + sc.dt * res.command
    return TrajectoryLog(rows)
