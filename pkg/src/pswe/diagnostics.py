"""Energy, mass and water-content observables."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .mesh import Mesh
from .physics import FrictionParams, friction_K
from .scheme import assemble_rhs, extend
from .state import G, FieldState, Terrain


def cell_energy(h, v, z, theta, g: float = G):
    """Energy density theta (|v|^2 h / 2 + g h^2 / 2 + g z h).

    ``v`` may be a single 2-vector or an (n, 2) array.
    """
    h = np.asarray(h, dtype=float)
    v = np.asarray(v, dtype=float)
    v2 = (v * v).sum(axis=-1)
    return theta * (0.5 * v2 * h + 0.5 * g * h * h + g * z * h)


@dataclass(frozen=True, eq=False)
class EnergyReport:
    """Energies are area-integrated: ``cell[i] = area_i * E_i``.

    The three rates describe the semidiscrete balance: net energy flux out of
    all cells through their sides, friction dissipation and viscous
    dissipation.
    """

    cell: np.ndarray
    total: float
    flux_sum: float
    friction_dissipation: float
    viscous_dissipation: float


def _edge_flux_normal(ext, mesh: Mesh) -> np.ndarray:
    """l <H_ij, n_ij> for every edge, seen from the left cell."""
    i, j = mesh.edge_left, mesh.edge_right
    n = mesh.edge_normal
    H = _energy_flux(ext, i, j, n, mesh.edge_kind)
    return mesh.edge_length * (H[:, 0] * n[:, 0] + H[:, 1] * n[:, 1])


def _energy_flux(ext, i, j, n, kind) -> np.ndarray:
    vi = np.column_stack([ext.vx[i], ext.vy[i]])
    vj = np.column_stack([ext.vx[j], ext.vy[j]])
    vm = 0.5 * (vi + vj)
    vn = np.where(kind == 2, 0.0, (vm * n).sum(axis=1))
    thi, thj = ext.th[i], ext.th[j]
    wi, wj = ext.w[i], ext.w[j]
    thup = np.where(vn > 0, thi, np.where(vn < 0, thj, 0.0))
    dot = (vi * vj).sum(axis=1)
    H = 0.5 * thup[:, None] * (wi[:, None] * vj + wj[:, None] * vi + dot[:, None] * vm)
    # v_n == 0: only the free-surface term moves energy across the side
    ths = np.where(wi > wj, thi, thj)
    H0 = 0.25 * (ths * (wj - wi))[:, None] * (vi - vj)
    H = np.where((vn == 0)[:, None], H0, H)
    return np.where((kind == 2)[:, None], 0.0, H)


def energy_flux_H(e: int, mesh: Mesh, state: FieldState, terrain: Terrain, g: float = G) -> np.ndarray:
    """Energy flux vector across edge ``e``.

    H = (theta h)_ij (w_i v_j + w_j v_i + <v_i, v_j> v_ij) / 2 where the
    normal velocity is nonzero.  The crossed pairing is what the mass,
    advection and free-surface terms of the scheme actually telescope to;
    the uncrossed w_i v_i + w_j v_j agrees only for uniform states.  Where it vanishes the mass and momentum
    fluxes are zero and only the free-surface work remains, carried by
    (theta h)^s (w_j - w_i)(v_i - v_j) / 4.  Both forms are symmetric in
    (i, j), so the flux is conserved across the side.
    """
    ext = extend(state, mesh, terrain, g)
    i = mesh.edge_left[e:e + 1]
    j = mesh.edge_right[e:e + 1]
    return _energy_flux(ext, i, j, mesh.edge_normal[e:e + 1], mesh.edge_kind[e:e + 1])[0]


def cell_energy_rates(state: FieldState, mesh: Mesh, terrain: Terrain, params: FrictionParams | None = None,
                      viscosity: bool | str = False, g: float = G):
    """Return ``(lhs, flux, friction)`` per cell for the semidiscrete balance.

    ``lhs`` is area * dE_i/dt evaluated through the chain rule on the
    right-hand side, ``flux`` is the sum of l <H, n> over the cell's sides
    and ``friction`` is -area K |v|^3.  Without sources and viscosity,
    lhs + flux == friction up to rounding.
    """
    params = params or FrictionParams()
    rhs = assemble_rhs(state, mesh, terrain, params, viscosity, g)
    v = state.v
    w = g * (terrain.z + state.h)
    dm = rhs.L
    dp = rhs.J + rhs.V + rhs.S + rhs.friction
    lhs = (w - 0.5 * (v * v).sum(axis=1)) * dm + (v * dp).sum(axis=1)

    ext = extend(state, mesh, terrain, g)
    f = _edge_flux_normal(ext, mesh)
    n = mesh.n_cells
    flux = np.zeros(n + mesh.n_ghosts)
    np.add.at(flux, mesh.edge_left, f)
    np.add.at(flux, mesh.edge_right, -f)
    K = friction_K(state.h, terrain.theta, params)
    speed = np.sqrt((v * v).sum(axis=1))
    return lhs, flux[:n], -mesh.area * K * speed ** 3


def energy_report(state: FieldState, mesh: Mesh, terrain: Terrain, params: FrictionParams | None = None,
                  viscosity: bool | str = True, g: float = G) -> EnergyReport:
    params = params or FrictionParams()
    cell = mesh.area * cell_energy(state.h, state.v, terrain.z, terrain.theta, g)
    ext = extend(state, mesh, terrain, g)
    flux_sum = float(np.sum(_edge_flux_normal(ext, mesh)[mesh.boundary_edges]))
    v = state.v
    K = friction_K(state.h, terrain.theta, params)
    fr = float(np.sum(mesh.area * K * np.sqrt((v * v).sum(axis=1)) ** 3))
    visc = 0.0
    if viscosity:
        visc = viscous_dissipation(state, mesh, terrain, dt=1.0, g=g, mode=viscosity)
    return EnergyReport(cell, float(np.sum(cell)), flux_sum, fr, visc)


def viscous_dissipation(state: FieldState, mesh: Mesh, terrain: Terrain, dt: float, g: float = G,
                        mode: bool | str = True) -> float:
    """dt * sum over interior sides of l mu |v_i - v_j|^2 (nonnegative)."""
    rhs = assemble_rhs(state, mesh, terrain, None, mode, g)
    inner = mesh.interior_edges
    i, j = mesh.edge_left[inner], mesh.edge_right[inner]
    dv = state.v[i] - state.v[j]
    return float(dt * np.sum(mesh.edge_length[inner] * rhs.mu[inner] * (dv * dv).sum(axis=1)))


def water_content_q(states: Sequence[FieldState], mesh: Mesh) -> np.ndarray:
    """q(t) = sum(area h(t)) / sum(area h(0))."""
    base = float(np.sum(mesh.area * states[0].h))
    if base <= 0:
        raise ValueError("initial water volume must be positive")
    return np.array([float(np.sum(mesh.area * s.h)) / base for s in states])


@dataclass(frozen=True)
class EnergyAudit:
    """Decomposition of E^{n+1} - E^n.

    ``mass_work + momentum_work + depth_quadratic + velocity_quadratic``
    equals ``delta`` identically.  ``remainder`` is what the friction and
    viscous terms leave unexplained: boundary and source work plus the
    non-conservative part of the free-surface term on sides with zero
    normal velocity.
    """

    delta: float
    mass_work: float
    momentum_work: float
    depth_quadratic: float
    velocity_quadratic: float
    friction_work: float
    viscous_dissipation: float
    remainder: float


def energy_step_audit(before: FieldState, after: FieldState, dt: float, mesh: Mesh, terrain: Terrain,
                      params: FrictionParams | None = None, viscosity: bool | str = True, g: float = G) -> EnergyAudit:
    params = params or FrictionParams()
    ts = terrain.theta * mesh.area
    h0, h1 = before.h, after.h
    v0, v1 = before.v, after.v
    dh = h1 - h0
    w0 = g * (terrain.z + h0)
    mass_work = float(np.sum(ts * dh * (w0 - 0.5 * (v0 * v0).sum(axis=1))))
    dhv = h1[:, None] * v1 - h0[:, None] * v0
    momentum_work = float(np.sum(ts * (dhv * v0).sum(axis=1)))
    depth_q = float(g * np.sum(ts * dh * dh / 2))
    dv = v1 - v0
    vel_q = float(np.sum(ts * h1 / 2 * (dv * dv).sum(axis=1)))

    e0 = float(np.sum(mesh.area * cell_energy(h0, v0, terrain.z, terrain.theta, g)))
    e1 = float(np.sum(mesh.area * cell_energy(h1, v1, terrain.z, terrain.theta, g)))
    K = friction_K(h1, terrain.theta, params)
    speed1 = np.sqrt((v1 * v1).sum(axis=1))
    friction = float(-dt * np.sum(mesh.area * K * speed1 * (v1 * v0).sum(axis=1)))
    visc = viscous_dissipation(before, mesh, terrain, dt, g, viscosity) if viscosity else 0.0
    delta = e1 - e0
    remainder = delta - (friction + depth_q + vel_q - visc)
    return EnergyAudit(delta, mass_work, momentum_work, depth_q, vel_q, friction, visc, remainder)
