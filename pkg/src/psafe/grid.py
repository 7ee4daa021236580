"""Occupancy grids, domain decomposition and distance fields.

Arrays are indexed ``[iy, ix]``. Cell ``(iy, ix)`` has its center at
``origin + (ix, iy) * resolution`` in the world frame, so row 0 is the
bottom of the map. PGM rows run top to bottom and are flipped on load.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import EmptyDomainError, MapFormatError, MapSizeError, ShapeMismatchError

FREE = 0
BOUNDARY = -1

# 4-neighbourhood offsets (diy, dix)
NEIGHBORS4 = ((1, 0), (-1, 0), (0, 1), (0, -1))
_CROSS = ndimage.generate_binary_structure(2, 1)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class OccupancyGrid:
    """Boolean occupancy raster (True = occupied) with metric geometry.

    The outermost ring of cells is forced occupied on construction so the
    free set is always bounded.
    """

    cells: np.ndarray
    resolution: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=bool)
        if cells.ndim != 2:
            raise MapSizeError(f"occupancy raster must be 2-D, got shape {cells.shape}")
        if cells.shape[0] < 3 or cells.shape[1] < 3:
            raise MapSizeError(f"grid must be at least 3x3, got {cells.shape[1]}x{cells.shape[0]}")
        if not self.resolution > 0:
            raise ValueError(f"resolution must be positive, got {self.resolution}")
        cells = cells.copy()
        cells[0, :] = cells[-1, :] = True
        cells[:, 0] = cells[:, -1] = True
        object.__setattr__(self, "cells", _readonly(cells))
        object.__setattr__(self, "resolution", float(self.resolution))
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def nx(self) -> int:
        return self.cells.shape[1]

    @property
    def ny(self) -> int:
        return self.cells.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        """World x coordinates of the columns and y coordinates of the rows."""
        xs = self.origin[0] + self.resolution * np.arange(self.nx)
        ys = self.origin[1] + self.resolution * np.arange(self.ny)
        return xs, ys

    def with_cells(self, cells: np.ndarray) -> "OccupancyGrid":
        return OccupancyGrid(cells, self.resolution, self.origin)


@dataclass(frozen=True)
class ScalarField:
    """Grid-aligned scalar samples. ``stats`` is set only on solver output."""

    values: np.ndarray
    resolution: float
    origin: tuple[float, float] = (0.0, 0.0)
    stats: object = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ShapeMismatchError(f"field must be 2-D, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", _readonly(values))
        object.__setattr__(self, "resolution", float(self.resolution))
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @classmethod
    def on(cls, like, values, stats=None) -> "ScalarField":
        """Field with the geometry of ``like`` (a grid or another field)."""
        values = np.asarray(values, dtype=np.float64)
        shape = like.cells.shape if isinstance(like, OccupancyGrid) else like.values.shape
        if values.shape != shape:
            raise ShapeMismatchError(f"expected shape {shape}, got {values.shape}")
        return cls(values, like.resolution, like.origin, stats)

    @property
    def nx(self) -> int:
        return self.values.shape[1]

    @property
    def ny(self) -> int:
        return self.values.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def same_geometry(self, other) -> bool:
        return (
            self.values.shape == other.values.shape
            and self.resolution == other.resolution
            and self.origin == other.origin
        )


@dataclass(frozen=True)
class DomainDecomposition:
    """Free set, obstacle interiors and boundary of an occupancy grid.

    ``labels`` holds FREE (0), BOUNDARY (-1), or the 1-based obstacle index
    for obstacle-interior cells. ``obstacle_ids`` holds the obstacle index
    of every occupied cell, boundary cells included (0 on FREE).
    ``faces`` lists every (boundary cell, FREE 4-neighbour) pair as rows
    ``(iy_b, ix_b, iy_f, ix_f)``.
    """

    grid: OccupancyGrid
    labels: np.ndarray
    obstacle_ids: np.ndarray
    boundary_cells: np.ndarray
    normals: np.ndarray
    faces: np.ndarray
    n_obs: int
    perimeter: float
    free_area: float
    obstacle_areas: np.ndarray = field(repr=False)

    @property
    def resolution(self) -> float:
        return self.grid.resolution

    @property
    def free_mask(self) -> np.ndarray:
        return self.labels == FREE

    @property
    def boundary_mask(self) -> np.ndarray:
        return self.labels == BOUNDARY

    @property
    def interior_mask(self) -> np.ndarray:
        return self.labels > 0

    @property
    def boundary_obstacle(self) -> np.ndarray:
        """Obstacle index of each boundary cell, aligned with ``boundary_cells``."""
        iy, ix = self.boundary_cells.T
        return self.obstacle_ids[iy, ix]


# --------------------------------------------------------------------------
# PGM I/O


def _pgm_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """First ``count`` whitespace-separated header tokens, skipping comments."""
    tokens: list[bytes] = []
    pos = 0
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos >= n:
            raise MapFormatError("truncated PGM header")
        if data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        tokens.append(data[start:pos])
    return tokens, pos


def read_pgm(path) -> np.ndarray:
    """Gray levels of a P2 or P5 PGM as a uint8 array in image row order."""
    data = Path(path).read_bytes()
    if len(data) < 2 or data[:2] not in (b"P2", b"P5"):
        raise MapFormatError(f"{path}: not a P2/P5 PGM file")
    tokens, pos = _pgm_tokens(data, 4)
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError as exc:
        raise MapFormatError(f"{path}: malformed PGM header") from exc
    if width <= 0 or height <= 0:
        raise MapFormatError(f"{path}: non-positive image size")
    if not 0 < maxval <= 255:
        raise MapFormatError(f"{path}: max gray {maxval} outside 1..255")
    npix = width * height
    if tokens[0] == b"P5":
        raster = data[pos + 1 : pos + 1 + npix]
        if len(raster) < npix:
            raise MapFormatError(f"{path}: truncated raster ({len(raster)} of {npix} bytes)")
        pixels = np.frombuffer(raster, dtype=np.uint8)
    else:
        body = data[pos:].split()
        if len(body) < npix:
            raise MapFormatError(f"{path}: truncated raster ({len(body)} of {npix} values)")
        try:
            pixels = np.array([int(v) for v in body[:npix]], dtype=np.int64)
        except ValueError as exc:
            raise MapFormatError(f"{path}: non-integer pixel value") from exc
        if pixels.min() < 0 or pixels.max() > maxval:
            raise MapFormatError(f"{path}: pixel value outside 0..{maxval}")
        pixels = pixels.astype(np.uint8)
    return pixels.reshape(height, width)


def write_pgm(path, gray: np.ndarray, binary: bool = True) -> None:
    gray = np.asarray(gray, dtype=np.uint8)
    h, w = gray.shape
    header = f"{'P5' if binary else 'P2'}\n{w} {h}\n255\n".encode()
    with open(path, "wb") as fh:
        fh.write(header)
        if binary:
            fh.write(gray.tobytes())
        else:
            for row in gray:
                fh.write((" ".join(str(int(v)) for v in row) + "\n").encode())


def save_occupancy(path, grid: OccupancyGrid, binary: bool = True) -> None:
    """Write a grid as PGM (occupied = 0, free = 255) plus a JSON sidecar."""
    gray = np.where(grid.cells, 0, 255).astype(np.uint8)[::-1]
    write_pgm(path, gray, binary)
    sidecar = Path(path).with_suffix(".json")
    sidecar.write_text(json.dumps({"resolution_m": grid.resolution, "origin_xy": list(grid.origin)}))


def load_occupancy(path, resolution: float | None = None, threshold: int = 128,
                   origin: tuple[float, float] | None = None) -> OccupancyGrid:
    """Load a PGM occupancy map; pixels darker than ``threshold`` are occupied.

    A sidecar ``<stem>.json`` with ``resolution_m`` / ``origin_xy`` is used
    for any argument left as None.
    """
    path = Path(path)
    gray = read_pgm(path)
    sidecar = path.with_suffix(".json")
    meta = json.loads(sidecar.read_text()) if sidecar.exists() else {}
    if resolution is None:
        resolution = meta.get("resolution_m")
    if resolution is None:
        raise ValueError(f"{path}: no resolution given and no sidecar {sidecar.name}")
    if origin is None:
        origin = tuple(meta.get("origin_xy", (0.0, 0.0)))
    if gray.shape[0] < 3 or gray.shape[1] < 3:
        raise MapSizeError(f"{path}: map must be at least 3x3, got {gray.shape[1]}x{gray.shape[0]}")
    return OccupancyGrid(gray[::-1] < threshold, resolution, origin)


# --------------------------------------------------------------------------
# Geometry


def buffer_obstacles(grid: OccupancyGrid, radius: float) -> OccupancyGrid:
    """Dilate the occupied set by a Euclidean disk of ``radius`` meters."""
    if radius < 0:
        raise ValueError(f"buffer radius must be non-negative, got {radius}")
    if radius == 0:
        return grid
    # distance (in cells) from each cell center to the nearest occupied center
    dist = ndimage.distance_transform_edt(~grid.cells)
    cells = dist <= radius / grid.resolution + 1e-9
    if cells.all():
        raise EmptyDomainError(f"buffer radius {radius} m leaves no free cell")
    return grid.with_cells(cells)


def _outward_normals(occupied: np.ndarray, free: np.ndarray, boundary: np.ndarray) -> np.ndarray:
    # signed distance on cell centers: positive in free space, negative inside obstacles
    s = ndimage.distance_transform_edt(~occupied) - ndimage.distance_transform_edt(occupied)
    sp = np.pad(s, 1, mode="edge")
    fp = np.pad(free, 1, constant_values=False)
    cells = np.argwhere(boundary)
    normals = np.empty((len(cells), 2))
    for k, (iy, ix) in enumerate(cells):
        py, px = iy + 1, ix + 1
        g = np.array([sp[py, px + 1] - sp[py, px - 1], sp[py + 1, px] - sp[py - 1, px]])
        toward_free = np.zeros(2)
        first = None
        for diy, dix in NEIGHBORS4:
            if fp[py + diy, px + dix]:
                toward_free += (dix, diy)
                if first is None:
                    first = np.array([dix, diy], dtype=float)
        n = -g
        norm = np.hypot(*n)
        # the distance gradient must point into free space; fall back to face geometry otherwise
        if norm == 0 or n @ toward_free >= 0:
            n = -toward_free
            norm = np.hypot(*n)
            if norm == 0:
                n, norm = -first, 1.0
        normals[k] = n / norm
    return normals


def decompose_domain(grid: OccupancyGrid) -> DomainDecomposition:
    """Split a grid into the free set, obstacle interiors and boundary."""
    free_components, n_free = ndimage.label(~grid.cells, structure=_CROSS)
    if n_free == 0:
        raise EmptyDomainError("occupancy grid has no free cell")
    sizes = np.bincount(free_components.ravel())[1:]
    free = free_components == (1 + int(np.argmax(sizes)))
    occupied = ~free  # unreachable pockets join the obstacle that encloses them

    obstacle_ids, n_obs = ndimage.label(occupied, structure=_CROSS)
    boundary = occupied & ndimage.binary_dilation(free, structure=_CROSS)

    labels = obstacle_ids.copy()
    labels[boundary] = BOUNDARY

    faces = []
    for diy, dix in NEIGHBORS4:
        shifted = np.zeros_like(free)
        # shifted[iy, ix] is True when (iy + diy, ix + dix) is free
        sy = slice(max(diy, 0), free.shape[0] + min(diy, 0))
        sx = slice(max(dix, 0), free.shape[1] + min(dix, 0))
        ty = slice(max(-diy, 0), free.shape[0] + min(-diy, 0))
        tx = slice(max(-dix, 0), free.shape[1] + min(-dix, 0))
        shifted[ty, tx] = free[sy, sx]
        iy, ix = np.nonzero(boundary & shifted)
        faces.append(np.column_stack([iy, ix, iy + diy, ix + dix]))
    faces = np.concatenate(faces).astype(np.int64)
    faces = faces[np.lexsort((faces[:, 3], faces[:, 2], faces[:, 1], faces[:, 0]))]

    res = grid.resolution
    areas = np.bincount(obstacle_ids.ravel(), minlength=n_obs + 1)[1:] * res**2
    return DomainDecomposition(
        grid=grid,
        labels=_readonly(labels),
        obstacle_ids=_readonly(obstacle_ids),
        boundary_cells=_readonly(np.argwhere(boundary)),
        normals=_readonly(_outward_normals(occupied, free, boundary)),
        faces=_readonly(faces),
        n_obs=int(n_obs),
        perimeter=len(faces) * res,
        free_area=int(free.sum()) * res**2,
        obstacle_areas=_readonly(areas),
    )


def distance_field(decomp: DomainDecomposition, mode: str = "unsigned") -> ScalarField:
    """Exact Euclidean distance from each cell center to the nearest boundary cell center.

    ``signed`` negates the distance inside obstacles.
    """
    if mode not in ("unsigned", "signed"):
        raise ValueError(f"mode must be 'unsigned' or 'signed', got {mode!r}")
    dist = ndimage.distance_transform_edt(~decomp.boundary_mask) * decomp.resolution
    if mode == "signed":
        dist = np.where(decomp.interior_mask, -dist, dist)
    return ScalarField.on(decomp.grid, dist)


# --------------------------------------------------------------------------
# Field CSV


def write_field_csv(path, fld: ScalarField) -> None:
    """``nx,ny,resolution,origin_x,origin_y`` on the first line, then one row per line."""
    with open(path, "w") as fh:
        fh.write(f"{fld.nx},{fld.ny},{fld.resolution!r},{fld.origin[0]!r},{fld.origin[1]!r}\n")
        for row in fld.values:
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")


def read_field_csv(path) -> ScalarField:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if len(header) != 5:
            raise MapFormatError(f"{path}: bad field header")
        nx, ny = int(header[0]), int(header[1])
        res, ox, oy = (float(v) for v in header[2:])
        values = np.loadtxt(fh, delimiter=",", dtype=np.float64, ndmin=2)
    if values.shape != (ny, nx):
        raise ShapeMismatchError(f"{path}: header says {nx}x{ny}, body is {values.shape[1]}x{values.shape[0]}")
    return ScalarField(values, res, (ox, oy))
