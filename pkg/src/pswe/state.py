"""Terrain, flow fields and the stationary states of the scheme."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .mesh import Mesh
from .physics import FrictionParams, friction_K

G = 9.81
H_DRY = 1e-10


@dataclass(frozen=True, eq=False)
class Terrain:
    z: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        theta = np.broadcast_to(np.asarray(self.theta, dtype=float), z.shape).copy()
        if not np.all(np.isfinite(z)):
            raise ValueError("bed elevation must be finite")
        if np.any(theta <= 0) or np.any(theta > 1):
            raise ValueError("porosity must lie in (0, 1]")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "theta", theta)

    @classmethod
    def flat(cls, n: int, z: float = 0.0, theta: float = 1.0) -> "Terrain":
        return cls(np.full(n, float(z)), np.full(n, float(theta)))

    @classmethod
    def plane(cls, mesh: Mesh, slope, z0: float = 0.0, theta: float = 1.0) -> "Terrain":
        """z_i = z0 + slope . centroid_i"""
        sx, sy = slope
        c = mesh.centroid
        return cls(z0 + (sx * c[:, 0] + sy * c[:, 1]), np.full(mesh.n_cells, float(theta)))


@dataclass(frozen=True, eq=False)
class FieldState:
    """Primitive per-cell state: depth ``h`` (m) and velocity ``v`` (m/s, shape (n, 2))."""

    h: np.ndarray
    v: np.ndarray
    t: float = 0.0

    @classmethod
    def at_rest(cls, h, t: float = 0.0) -> "FieldState":
        h = np.asarray(h, dtype=float)
        return cls(h, np.zeros((h.size, 2)), t)

    def copy(self) -> "FieldState":
        return replace(self, h=self.h.copy(), v=self.v.copy())

    def conservative(self, terrain: Terrain) -> "ConservativeView":
        return to_conservative(self, terrain)


@dataclass(frozen=True, eq=False)
class ConservativeView:
    th: np.ndarray    # theta * h
    thv: np.ndarray   # theta * h * v


def to_conservative(state: FieldState, terrain: Terrain) -> ConservativeView:
    th = terrain.theta * state.h
    return ConservativeView(th, th[:, None] * state.v)


def to_primitive(view: ConservativeView, terrain: Terrain, t: float = 0.0, h_dry: float = H_DRY) -> FieldState:
    """Recover (h, v); cells at or below ``h_dry`` get zero velocity.

    Exact inverse of :func:`to_conservative` up to one rounding of the
    division (the product theta*h is not injective in floating point).
    """
    h = view.th / terrain.theta
    wet = h > h_dry
    v = np.zeros_like(view.thv)
    v[wet] = view.thv[wet] / view.th[wet, None]
    return FieldState(h, v, t)


def free_surface(state: FieldState, terrain: Terrain, g: float = G) -> np.ndarray:
    """w = g (z + h)"""
    return g * (terrain.z + state.h)


def even_level(level: float) -> float:
    """``level``, or its neighbour towards zero when the last mantissa bit is odd."""
    level = float(level)
    if np.array([level]).view(np.int64)[0] & 1:
        level = float(np.nextafter(level, 0.0))
    return level


def lake_depth(z: np.ndarray, level: float) -> np.ndarray:
    """Depths h >= 0 with ``z + h == level`` exactly in floating point on wet cells.

    ``level - z`` alone misses the level by one ulp for a large share of
    inputs, which would break the exact stationarity of the lake.  A level
    whose last mantissa bit is odd is moved one ulp towards zero first:
    when ``h`` shares the level's ulp, both candidate sums are ties and
    round away from an odd level, so it cannot be hit at all.
    """
    z = np.asarray(z, dtype=float)
    level = even_level(level)
    h = np.maximum(level - z, 0.0)
    wet = h > 0
    for _ in range(64):
        s = z + h
        off = wet & (s != level)
        if not off.any():
            break
        h[off] = np.nextafter(h[off], np.where(s[off] < level, np.inf, -np.inf))
    return h


def make_lake_state(mesh: Mesh, terrain: Terrain, w_level: float, g: float = G) -> FieldState:
    """Lake at rest with free surface ``w_level`` (units of g*m).

    Cells whose bed lies above ``w_level / g`` are dry.
    """
    level = w_level / g
    h = lake_depth(terrain.z, level)
    return FieldState.at_rest(h)


def uniform_flow_velocity(slope, theta: float, h: float, params: FrictionParams, g: float = G) -> np.ndarray:
    """Velocity of steady uniform flow over the plane z = z0 + slope . x.

    The flow runs down the slope, i.e. against ``slope``, with speed
    sqrt(theta*h*g*|slope| / K).
    """
    xi = np.asarray(slope, dtype=float)
    mag = float(np.hypot(xi[0], xi[1]))
    if mag == 0.0:
        raise ValueError("uniform flow needs a nonzero slope")
    if not h > 0:
        raise ValueError("uniform flow needs a positive depth")
    K = friction_K(h, theta, params)
    if K <= 0:
        raise ValueError("uniform flow needs positive friction")
    return -xi * np.sqrt(theta * h * g / (K * mag))


def make_uniform_flow_state(mesh: Mesh, slope, theta: float, h: float, params: FrictionParams,
                            g: float = G) -> FieldState:
    v = uniform_flow_velocity(slope, theta, h, params, g)
    n = mesh.n_cells
    return FieldState(np.full(n, float(h)), np.tile(v, (n, 1)))


@dataclass(frozen=True, eq=False)
class UniformFlowProblem:
    """Sloping strip in steady uniform flow plus the cells to watch.

    Ghost altitudes continue the free surface across every side, so the
    outflow end is exact.  The inflow end cannot be: ghosts are dry, so no
    water enters, and the disturbance moves downstream by one cell per step.
    The strip is therefore ``margin`` columns longer than the window, which
    stays undisturbed for ``margin - 1`` steps.
    """

    mesh: Mesh
    terrain: Terrain
    state: FieldState
    params: FrictionParams
    window: np.ndarray
    velocity: np.ndarray


def make_uniform_flow_problem(nx: int = 64, ny: int = 64, slope=(0.01, 0.0), theta: float = 0.7, h: float = 0.5,
                              params: FrictionParams | None = None, spacing: float = 1.0, margin: int = 40,
                              z0: float = 0.0, g: float = G) -> UniformFlowProblem:
    from .mesh import attach_ghosts, build_structured_mesh

    xi = np.asarray(slope, dtype=float)
    if xi[1] != 0.0 or xi[0] <= 0.0:
        raise ValueError("the strip runs along x: slope must be (positive, 0)")
    params = params or FrictionParams(alpha_p=0.1, alpha_s=0.02)
    mesh = build_structured_mesh("rect", nx + margin, ny, spacing)

    def level(x):
        return z0 + float(xi @ x) + h

    mesh = attach_ghosts(mesh, {"west": level, "east": level, "south": "wall", "north": "wall"})
    terrain = Terrain.plane(mesh, xi, z0, theta)
    state = make_uniform_flow_state(mesh, xi, theta, h, params, g)
    col = np.floor((mesh.centroid[:, 0] - mesh.origin[0]) / spacing).astype(int)
    # water runs towards -x, so the undisturbed window is the west end
    return UniformFlowProblem(mesh, terrain, state, params, np.flatnonzero(col < nx), state.v[0].copy())
