"""Polygonal partitions, edge geometry and boundary ghost cells.

Edges are stored once each, oriented from the lower cell id to the higher
one, and sorted by ``(min id, max id)`` so every reduction over edges runs in
a fixed order.  Boundary edges point from their owner cell to a ghost cell
whose id is ``n_cells + k``; before :func:`attach_ghosts` is called the right
index of a boundary edge is ``-1``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

# ghost altitude policies
COPY_OWNER = 0
FIXED = 1
WALL = 2

SIDES = ("west", "east", "south", "north")


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class Cell:
    id: int
    area: float
    centroid: np.ndarray
    vertices: np.ndarray


@dataclass(frozen=True)
class Edge:
    left: int
    right: int
    length: float
    normal: np.ndarray
    midpoint: np.ndarray

    def reversed(self) -> "Edge":
        return Edge(self.right, self.left, self.length, -self.normal, self.midpoint)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable admissible partition in structure-of-arrays form."""

    vertices: tuple[np.ndarray, ...]
    area: np.ndarray
    centroid: np.ndarray
    edge_left: np.ndarray
    edge_right: np.ndarray
    edge_length: np.ndarray
    edge_normal: np.ndarray
    edge_midpoint: np.ndarray
    edge_side: tuple[str, ...]
    kind: str = "polygon"
    shape: tuple[int, int] | None = None  # (nx, ny) for structured meshes
    spacing: float | None = None
    origin: tuple[float, float] = (0.0, 0.0)
    ghost_owner: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    ghost_edge: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    ghost_mode: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int8))
    ghost_fixed_z: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def n_cells(self) -> int:
        return self.area.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edge_left.shape[0]

    @property
    def n_ghosts(self) -> int:
        return self.ghost_owner.shape[0]

    @property
    def has_ghosts(self) -> bool:
        return self.n_ghosts > 0

    @property
    def boundary_edges(self) -> np.ndarray:
        return np.flatnonzero((self.edge_right < 0) | (self.edge_right >= self.n_cells))

    @property
    def interior_edges(self) -> np.ndarray:
        return np.flatnonzero((self.edge_right >= 0) & (self.edge_right < self.n_cells))

    @property
    def edge_kind(self) -> np.ndarray:
        """0 interior, 1 free-discharge ghost, 2 wall ghost."""
        kind = np.zeros(self.n_edges, dtype=np.int8)
        kind[self.boundary_edges] = 1
        if self.has_ghosts:
            kind[self.ghost_edge[self.ghost_mode == WALL]] = 2
        return kind

    def cell(self, i: int) -> Cell:
        return Cell(i, float(self.area[i]), self.centroid[i], self.vertices[i])

    def edge(self, e: int) -> Edge:
        return Edge(
            int(self.edge_left[e]),
            int(self.edge_right[e]),
            float(self.edge_length[e]),
            self.edge_normal[e],
            self.edge_midpoint[e],
        )

    def neighbors(self, i: int) -> list[int]:
        """N(i): adjacent cells and ghosts of cell ``i``."""
        out = self.edge_right[self.edge_left == i].tolist()
        out += self.edge_left[self.edge_right == i].tolist()
        return sorted(j for j in out if j >= 0)

    def perimeter(self) -> np.ndarray:
        p = np.zeros(self.n_cells)
        np.add.at(p, self.edge_left, self.edge_length)
        inner = self.interior_edges
        np.add.at(p, self.edge_right[inner], self.edge_length[inner])
        return p

    def normal_sums(self) -> np.ndarray:
        """Per-cell sum of l*n over all sides; zero for closed polygons."""
        s = np.zeros((self.n_cells, 2))
        ln = self.edge_length[:, None] * self.edge_normal
        np.add.at(s, self.edge_left, ln)
        inner = self.interior_edges
        np.add.at(s, self.edge_right[inner], -ln[inner])
        return s

    def ghost_altitude(self, z: np.ndarray, wall_altitude: float | None = None) -> np.ndarray:
        """Resolve ghost altitudes against the cell bed elevation ``z``."""
        zg = np.where(self.ghost_mode == COPY_OWNER, z[self.ghost_owner], self.ghost_fixed_z)
        wall = self.ghost_mode == WALL
        if wall.any():
            # walls never see a pressure contribution; any finite value will do
            zg = np.where(wall, z[self.ghost_owner] if wall_altitude is None else wall_altitude, zg)
        return zg

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["cell", "x", "y", "area"])
            for i in range(self.n_cells):
                w.writerow([i, repr(float(self.centroid[i, 0])), repr(float(self.centroid[i, 1])),
                            repr(float(self.area[i]))])


def _polygon_area_centroid(v: np.ndarray) -> tuple[float, np.ndarray]:
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = 0.5 * cross.sum()
    cx = ((x + xn) * cross).sum() / (6.0 * a)
    cy = ((y + yn) * cross).sum() / (6.0 * a)
    return a, np.array([cx, cy])


def _side_of(normal: np.ndarray) -> str:
    nx, ny = normal
    if abs(nx) >= abs(ny):
        return "east" if nx > 0 else "west"
    return "north" if ny > 0 else "south"


def from_polygons(
    polygons: Sequence[np.ndarray],
    *,
    centroids: np.ndarray | None = None,
    kind: str = "polygon",
    shape: tuple[int, int] | None = None,
    spacing: float | None = None,
    origin: tuple[float, float] = (0.0, 0.0),
    tol: float | None = None,
) -> Mesh:
    """Build a conforming mesh from counterclockwise polygons.

    Vertices closer than ``tol`` are merged, so shared sides use identical
    coordinates and the two views of an edge have exactly opposite normals.
    """
    if len(polygons) == 0:
        raise MeshError("mesh needs at least one cell")
    polys = [np.asarray(p, dtype=float) for p in polygons]
    if tol is None:
        scale = max(float(np.abs(np.concatenate(polys)).max()), 1.0)
        tol = 1e-9 * scale

    # merge vertices
    table: dict[tuple[int, int], int] = {}
    coords: list[np.ndarray] = []
    cell_vids: list[list[int]] = []
    for p in polys:
        ids = []
        for x, y in p:
            key = (round(x / tol), round(y / tol))
            vid = table.get(key)
            if vid is None:
                vid = len(coords)
                table[key] = vid
                coords.append(np.array([x, y]))
            ids.append(vid)
        cell_vids.append(ids)
    vxy = np.array(coords)

    areas = np.empty(len(polys))
    cents = np.empty((len(polys), 2))
    verts = []
    for i, ids in enumerate(cell_vids):
        v = vxy[ids]
        a, c = _polygon_area_centroid(v)
        if a <= 0:
            raise MeshError(f"cell {i} is degenerate or clockwise (area {a})")
        areas[i] = a
        cents[i] = c
        verts.append(v)
    if centroids is not None:
        cents = np.asarray(centroids, dtype=float).copy()

    sides: dict[tuple[int, int], list[tuple[int, int, int]]] = {}
    for i, ids in enumerate(cell_vids):
        k = len(ids)
        for m in range(k):
            a, b = ids[m], ids[(m + 1) % k]
            sides.setdefault((min(a, b), max(a, b)), []).append((i, a, b))

    rows = []
    for key, owners in sides.items():
        if len(owners) > 2:
            raise MeshError(f"non-manifold side {key}")
        owners.sort()
        i, a, b = owners[0]
        j = owners[1][0] if len(owners) == 2 else -1
        d = vxy[b] - vxy[a]
        length = math.hypot(d[0], d[1])
        if length <= 0:
            raise MeshError(f"zero-length side in cell {i}")
        normal = np.array([d[1], -d[0]]) / length
        mid = 0.5 * (vxy[a] + vxy[b])
        rows.append((i, j, length, normal, mid))

    # boundary edges (j = -1) sort after the interior edges of their owner
    order = sorted(range(len(rows)), key=lambda r: (rows[r][0], rows[r][1] if rows[r][1] >= 0 else 1 << 62))
    rows = [rows[r] for r in order]
    left = np.array([r[0] for r in rows], dtype=np.int64)
    right = np.array([r[1] for r in rows], dtype=np.int64)
    length = np.array([r[2] for r in rows])
    normal = np.array([r[3] for r in rows])
    mid = np.array([r[4] for r in rows])
    side = tuple(_side_of(r[3]) if r[1] < 0 else "" for r in rows)
    return Mesh(tuple(verts), areas, cents, left, right, length, normal, mid, side,
                kind=kind, shape=shape, spacing=spacing, origin=origin)


def build_structured_mesh(
    kind: str,
    nx: int,
    ny: int,
    spacing: float,
    origin: tuple[float, float] = (0.0, 0.0),
    keep: np.ndarray | None = None,
) -> Mesh:
    """Regular rectangular or hexagonal partition.

    Cells are numbered row by row from the south-west corner.  For the
    hexagonal kind, ``spacing`` is the side length of flat-topped hexagons
    laid out in offset columns.  ``keep`` (length nx*ny, in that numbering)
    drops the cells where it is false; the survivors are renumbered in order.
    """
    if nx < 1 or ny < 1:
        raise MeshError(f"mesh dimensions must be positive, got {nx}x{ny}")
    if not spacing > 0:
        raise MeshError(f"spacing must be positive, got {spacing}")
    x0, y0 = float(origin[0]), float(origin[1])
    polys, cents = [], []
    if kind in ("rect", "rectangular"):
        for r in range(ny):
            for c in range(nx):
                xa, xb = x0 + c * spacing, x0 + (c + 1) * spacing
                ya, yb = y0 + r * spacing, y0 + (r + 1) * spacing
                polys.append(np.array([[xa, ya], [xb, ya], [xb, yb], [xa, yb]]))
                cents.append((x0 + (c + 0.5) * spacing, y0 + (r + 0.5) * spacing))
        kind = "rectangular"
    elif kind in ("hex", "hexagonal"):
        s = spacing
        hgt = math.sqrt(3.0) * s
        ang = np.arange(6) * (math.pi / 3.0)
        unit = np.column_stack([np.cos(ang), np.sin(ang)])
        for r in range(ny):
            for c in range(nx):
                cx = x0 + s + 1.5 * s * c
                cy = y0 + 0.5 * hgt * (1 + 2 * r + (c % 2))
                polys.append(np.array([cx, cy]) + s * unit)
                cents.append((cx, cy))
        kind = "hexagonal"
    else:
        raise MeshError(f"unknown mesh kind {kind!r}")
    cents = np.array(cents)
    if keep is not None:
        keep = np.asarray(keep, dtype=bool)
        if keep.shape != (nx * ny,):
            raise MeshError(f"keep mask has shape {keep.shape}, expected ({nx * ny},)")
        polys = [p for p, k in zip(polys, keep) if k]
        cents = cents[keep]
    return from_polygons(polys, centroids=cents, kind=kind, shape=(nx, ny),
                         spacing=float(spacing), origin=(x0, y0))


Policy = str | float | Callable[[np.ndarray], float]


def _parse_policy(policy: Policy) -> tuple[int, float]:
    if isinstance(policy, str):
        if policy == "copy_owner":
            return COPY_OWNER, math.nan
        if policy == "wall":
            return WALL, math.nan
        try:
            return FIXED, float(policy)
        except ValueError:
            raise MeshError(f"unknown ghost policy {policy!r}") from None
    return FIXED, float(policy)


def attach_ghosts(mesh: Mesh, altitude_policy: Policy | Mapping[str, Policy] = "copy_owner") -> Mesh:
    """Give every boundary side a ghost cell with zero depth.

    ``altitude_policy`` is ``"copy_owner"``, ``"wall"``, a number (fixed ghost
    altitude), a callable mapping the ghost centroid (the owner centroid
    mirrored through the side midpoint) to a fixed altitude, or a mapping from
    side name (west/east/south/north) to one of those.  A wall ghost closes
    the side: no flux of any kind crosses it.
    """
    if mesh.has_ghosts:
        raise MeshError("mesh already has ghost cells")
    bnd = mesh.boundary_edges
    n = mesh.n_cells
    right = mesh.edge_right.copy()
    right[bnd] = n + np.arange(bnd.size)
    mode = np.empty(bnd.size, dtype=np.int8)
    fixed = np.empty(bnd.size)
    for k, e in enumerate(bnd):
        pol = altitude_policy.get(mesh.edge_side[e], "copy_owner") if isinstance(altitude_policy, Mapping) \
            else altitude_policy
        if callable(pol):
            xg = 2 * mesh.edge_midpoint[e] - mesh.centroid[mesh.edge_left[e]]
            mode[k], fixed[k] = FIXED, float(pol(xg))
        else:
            mode[k], fixed[k] = _parse_policy(pol)
    # ghost ids exceed every cell id, so the (min, max) order is unchanged
    return replace(mesh, edge_right=right, ghost_owner=mesh.edge_left[bnd].copy(), ghost_edge=bnd.copy(),
                   ghost_mode=mode, ghost_fixed_z=fixed)


def min_area_to_perimeter(mesh: Mesh) -> float:
    """min over cells of area / perimeter, boundary sides included."""
    if mesh.n_cells == 0:
        raise MeshError("empty mesh")
    return float(np.min(mesh.area / mesh.perimeter()))
