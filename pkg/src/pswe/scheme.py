"""Interface values and the semidiscrete right-hand side.

Per edge (i, j) with unit normal n from i to j:

* velocity and free surface are centred, ``v_ij = (v_i + v_j)/2``;
* the transported depth ``theta*h`` is upwinded on the sign of ``v_ij . n``;
* the free-surface term uses the upwinded value when ``v_n != 0`` and the
  higher-surface side otherwise, which keeps lakes at rest exactly;
* ghost cells carry zero depth and their owner's velocity, so water may
  leave through a free-discharge side but never enter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .mesh import Mesh
from .physics import FrictionParams, friction_K
from .state import G, FieldState, Terrain


@dataclass(frozen=True)
class InterfaceValues:
    v: np.ndarray      # centred velocity
    vn: float
    w: float           # centred free surface
    th_up: float       # upwinded theta*h (0 when vn == 0)
    th_s: float        # theta*h used by the free-surface term


@dataclass(frozen=True, eq=False)
class SemidiscreteRHS:
    """Cell rates; momentum arrays have shape (n, 2)."""

    L: np.ndarray
    J: np.ndarray
    S: np.ndarray
    V: np.ndarray          # artificial viscosity part of J^v
    friction: np.ndarray   # -sigma K |v| v, applied implicitly by the integrator
    mu: np.ndarray         # per edge

    @property
    def momentum(self) -> np.ndarray:
        return self.J + self.V + self.S


@dataclass(frozen=True, eq=False)
class Extended:
    """Cell fields followed by ghost values (h = 0, owner velocity)."""

    h: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    th: np.ndarray
    w: np.ndarray
    c: np.ndarray


def extend(state: FieldState, mesh: Mesh, terrain: Terrain, g: float = G,
           ghost_z: np.ndarray | None = None) -> Extended:
    if not mesh.has_ghosts and mesh.boundary_edges.size:
        raise ValueError("attach ghost cells before assembling fluxes")
    own = mesh.ghost_owner
    if ghost_z is None:
        ghost_z = mesh.ghost_altitude(terrain.z)
    h = np.concatenate([state.h, np.zeros(own.size)])
    vx = np.concatenate([state.v[:, 0], state.v[own, 0]])
    vy = np.concatenate([state.v[:, 1], state.v[own, 1]])
    theta = np.concatenate([terrain.theta, terrain.theta[own]])
    z = np.concatenate([terrain.z, ghost_z])
    th = theta * h
    w = g * (z + h)
    c = np.sqrt(vx * vx + vy * vy) + np.sqrt(g * h)
    return Extended(h, vx, vy, th, w, c)


def interface_values(e: int, mesh: Mesh, state: FieldState, terrain: Terrain, g: float = G,
                     ghost_z: np.ndarray | None = None) -> InterfaceValues:
    """Interface quantities of edge ``e`` seen from its left cell (scalar reference path)."""
    ext = extend(state, mesh, terrain, g, ghost_z)
    i, j = int(mesh.edge_left[e]), int(mesh.edge_right[e])
    n = mesh.edge_normal[e]
    vi = np.array([ext.vx[i], ext.vy[i]])
    vj = np.array([ext.vx[j], ext.vy[j]])
    vm = 0.5 * (vi + vj)
    vn = 0.0 if mesh.edge_kind[e] == 2 else float(vm[0] * n[0] + vm[1] * n[1])
    thi, thj = float(ext.th[i]), float(ext.th[j])
    if vn > 0:
        th_up = thi
    elif vn < 0:
        th_up = thj
    else:
        th_up = 0.0
    if vn != 0:
        th_s = th_up
    else:
        th_s = thi if ext.w[i] > ext.w[j] else thj
    return InterfaceValues(vm, vn, 0.5 * float(ext.w[i] + ext.w[j]), th_up, th_s)


def ghost_interface(e: int, mesh: Mesh, state: FieldState, terrain: Terrain, g: float = G,
                    ghost_z: np.ndarray | None = None) -> InterfaceValues:
    """Interface values on a boundary side.

    The boundary velocity is the owner's; the boundary depth is the owner's
    on outflow and zero on inflow.
    """
    if mesh.edge_right[e] < mesh.n_cells:
        raise ValueError(f"edge {e} is not a boundary edge")
    return interface_values(e, mesh, state, terrain, g, ghost_z)


def assemble_rhs(state: FieldState, mesh: Mesh, terrain: Terrain, params: FrictionParams | None = None,
                 viscosity: bool | str = True, g: float = G, workers: int = 1,
                 ghost_z: np.ndarray | None = None) -> SemidiscreteRHS:
    """Cell rates of the semidiscrete scheme.

    ``viscosity`` is a bool or ``"off"``/``"upwind"``/``"bounded"``; see
    :func:`viscosity_coefficients`.
    """
    ext = extend(state, mesh, terrain, g, ghost_z)
    n = mesh.n_cells
    L, Jx, Jy, Sx, Sy, Vx, Vy, mu = kernels.edge_fluxes(
        mesh.edge_left, mesh.edge_right, mesh.edge_kind, mesh.edge_length,
        np.ascontiguousarray(mesh.edge_normal[:, 0]), np.ascontiguousarray(mesh.edge_normal[:, 1]),
        ext.vx, ext.vy, ext.th, ext.w, ext.c, kernels.viscosity_mode(viscosity), n + mesh.n_ghosts, int(workers),
    )
    J = np.column_stack([Jx[:n], Jy[:n]])
    S = np.column_stack([Sx[:n], Sy[:n]])
    V = np.column_stack([Vx[:n], Vy[:n]])
    if params is None:
        params = FrictionParams()
    K = friction_K(state.h, terrain.theta, params)
    speed = np.sqrt(state.v[:, 0] ** 2 + state.v[:, 1] ** 2)
    friction = -(mesh.area * K * speed)[:, None] * state.v
    return SemidiscreteRHS(np.asarray(L[:n]), J, S, V, friction, np.asarray(mu))


def viscosity_coefficients(state: FieldState, mesh: Mesh, terrain: Terrain, g: float = G,
                           ghost_z: np.ndarray | None = None, mode: bool | str = True) -> np.ndarray:
    """Artificial viscosity per edge: (theta h)_ij * max(c_i, c_j), c = |v| + sqrt(g h).

    ``"upwind"`` takes (theta h)_ij upwinded like the mass flux (the larger
    adjacent value where ``v_n == 0``).  The explicit viscous update of a
    shallow cell next to a deep one then has a coefficient of about
    theta*h_deep / theta*h_shallow times the CFL number, and velocities blow
    up.  ``"bounded"`` (the default, ``True``) takes the smaller adjacent
    value, which keeps that coefficient below the CFL number.
    """
    ext = extend(state, mesh, terrain, g, ghost_z)
    out = kernels.edge_fluxes(
        mesh.edge_left, mesh.edge_right, mesh.edge_kind, mesh.edge_length,
        np.ascontiguousarray(mesh.edge_normal[:, 0]), np.ascontiguousarray(mesh.edge_normal[:, 1]),
        ext.vx, ext.vy, ext.th, ext.w, ext.c, kernels.viscosity_mode(mode) or 2, mesh.n_cells + mesh.n_ghosts, 1,
    )
    return np.asarray(out[-1])
