"""Canonical experiments shared by the command line and the acceptance suite."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import water_content_q
from .mesh import attach_ghosts, build_structured_mesh
from .physics import FrictionParams
from .state import G, FieldState, Terrain, make_lake_state, make_uniform_flow_problem
from .synthetic import bowl, bowl_lake_level, random_terrain, valley
from .timestep import Model, StepPolicy, advance, cell_energy_total, run, total_mass


@dataclass
class StationaryResult:
    steps: int
    max_dh: float
    max_dv: float
    max_speed: float
    seconds: float
    wet_fraction: float = 1.0


def _hold(state: FieldState, model: Model, steps: int) -> tuple[FieldState, float, float]:
    h0, v0 = state.h.copy(), state.v.copy()
    worst_h = worst_v = 0.0
    policy = StepPolicy()
    for _ in range(steps):
        state, _ = advance(state, model, policy)
        worst_h = max(worst_h, float(np.abs(state.h - h0).max()))
        worst_v = max(worst_v, float(np.abs(state.v - v0).max()))
    return state, worst_h, worst_v


def lake_experiment(cells: int = 32, steps: int = 1000, seed: int = 0, kind: str = "rect",
                    workers: int = 1) -> StationaryResult:
    """Regular lake over U[0, 1) terrain, every cell wet.

    Ghost cells sit above the lake so nothing drains.
    """
    rng = np.random.default_rng(seed)
    mesh = build_structured_mesh(kind, cells, cells, 1.0)
    z = random_terrain(mesh, rng)
    theta = rng.uniform(0.05, 1.0, mesh.n_cells)
    level = 1.5
    mesh = attach_ghosts(mesh, level + 10.0)
    terrain = Terrain(z, theta)
    state = make_lake_state(mesh, terrain, G * level)
    model = Model(mesh, terrain, FrictionParams(0.1, 0.01), workers=workers)
    t0 = time.perf_counter()
    _, dh, dv = _hold(state, model, steps)
    return StationaryResult(steps, dh, dv, 0.0, time.perf_counter() - t0)


def singular_lake_experiment(cells: int = 32, steps: int = 1000, wet_fraction: float = 0.4,
                             kind: str = "rect", workers: int = 1) -> StationaryResult:
    """Lake filling the bottom of a bowl; the dry rim sits above the surface."""
    mesh = build_structured_mesh(kind, cells, cells, 1.0)
    z = bowl(mesh, depth=1.0)
    level = bowl_lake_level(z, wet_fraction)
    mesh = attach_ghosts(mesh, "copy_owner")
    terrain = Terrain(z, np.full(mesh.n_cells, 0.5))
    state = make_lake_state(mesh, terrain, G * level)
    model = Model(mesh, terrain, FrictionParams(0.1, 0.01), workers=workers)
    t0 = time.perf_counter()
    _, dh, dv = _hold(state, model, steps)
    return StationaryResult(steps, dh, dv, 0.0, time.perf_counter() - t0,
                            float(np.mean(state.h > 0)))


@dataclass
class UniformFlowResult:
    steps: int
    max_relative_change: float
    velocity_error: float
    velocity: np.ndarray
    seconds: float


def uniform_flow_experiment(cells: int = 64, slope: float = 0.01, theta: float = 0.7, h: float = 0.5,
                            alpha_p: float = 0.1, alpha_s: float = 0.02, steps: int = 39,
                            workers: int = 1) -> UniformFlowResult:
    """Steady uniform flow on a strip; the watched window is ``cells`` x ``cells``.

    Per step, the largest change of h and v in the window relative to their
    magnitudes; the velocity error is relative to the closed-form speed.
    """
    params = FrictionParams(alpha_p, alpha_s)
    prob = make_uniform_flow_problem(cells, cells, (slope, 0.0), theta, h, params, margin=steps + 1)
    model = Model(prob.mesh, prob.terrain, params, workers=workers)
    win = prob.window
    state = prob.state
    ref = float(np.hypot(*prob.velocity))
    worst = 0.0
    policy = StepPolicy()
    t0 = time.perf_counter()
    for _ in range(steps):
        new, _ = advance(state, model, policy)
        dh = np.abs(new.h[win] - state.h[win]).max() / np.abs(state.h[win]).max()
        dv = np.abs(new.v[win] - state.v[win]).max() / np.abs(state.v[win]).max()
        worst = max(worst, float(dh), float(dv))
        state = new
    err = float(np.abs(state.v[win] - prob.velocity).max()) / ref
    return UniformFlowResult(steps, worst, err, prob.velocity, time.perf_counter() - t0)


@dataclass
class DrainResult:
    theta: float
    times: np.ndarray
    q: np.ndarray
    mass: np.ndarray
    steps: int
    clamped: float
    seconds: float
    extra: dict = field(default_factory=dict)

    def rows(self):
        for t, q, m in zip(self.times, self.q, self.mass):
            yield [repr(float(t)), repr(float(q)), repr(float(m))]


def drain_experiment(theta: float, cells: int = 64, spacing: float = 10.0, h0: float = 0.05,
                     alpha_p: float = 0.1, alpha_s: float = 0.01, t_end: float = 1800.0, dt_out: float = 60.0,
                     workers: int = 1, viscosity: bool = True, terrain_z: np.ndarray | None = None,
                     seed: int | None = None) -> DrainResult:
    """Free discharge of a uniform film from a synthetic valley.

    ``seed`` (optional) adds a deterministic random roughness of 1 cm to the
    valley floor.
    """
    mesh = build_structured_mesh("rect", cells, cells, spacing)
    z = valley(mesh) if terrain_z is None else np.asarray(terrain_z, dtype=float)
    if seed is not None:
        z = z + 0.01 * np.random.default_rng(seed).random(mesh.n_cells)
    mesh = attach_ghosts(mesh, "copy_owner")
    terrain = Terrain(z, np.full(mesh.n_cells, float(theta)))
    state = FieldState(np.full(mesh.n_cells, float(h0)), np.zeros((mesh.n_cells, 2)))
    model = Model(mesh, terrain, FrictionParams(alpha_p, alpha_s), viscosity=viscosity, workers=workers)
    n_out = int(round(t_end / dt_out))
    times = dt_out * np.arange(n_out + 1)
    snaps: list[FieldState] = []
    masses: list[float] = []

    def keep(s):
        snaps.append(FieldState(s.h.copy(), s.v, s.t))
        masses.append(total_mass(s, mesh, terrain))

    t0 = time.perf_counter()
    _, reports = run(state, model, StepPolicy(), float(times[-1]), output_times=times[1:], on_output=keep)
    q = water_content_q(snaps, mesh)
    clamped = sum(r.clamped_mass for r in reports)
    return DrainResult(float(theta), times, q, np.array(masses), len(reports), clamped,
                       time.perf_counter() - t0)


@dataclass
class PositivityResult:
    min_h: float
    clamped: float
    mass0: float
    steps: int


def positivity_case(seed: int, cells: int = 12, steps: int = 500, workers: int = 1) -> PositivityResult:
    """One randomized dam-break over random terrain and porosity.

    The mesh kind, boundary policy, friction and the wet/dry pattern are all
    drawn from ``seed``; about a third of the cells start dry.
    """
    rng = np.random.default_rng(seed)
    kind = "hex" if rng.random() < 0.3 else "rect"
    mesh = build_structured_mesh(kind, cells, cells, float(rng.uniform(0.5, 5.0)))
    n = mesh.n_cells
    smooth = rng.random() < 0.5
    if smooth:
        lo = np.concatenate(mesh.vertices).min(axis=0)
        c = mesh.centroid - lo
        k = rng.normal(size=2) / (cells * mesh.spacing)
        z = rng.uniform(0.0, 2.0) * np.sin(2 * np.pi * c @ k) + rng.normal(scale=0.01, size=2) @ c.T
    else:
        z = rng.uniform(0.0, rng.uniform(0.01, 1.0), n)
    theta = rng.uniform(0.02, 1.0, n) if rng.random() < 0.5 else np.full(n, rng.uniform(0.02, 1.0))
    h = np.where(rng.random(n) < 0.35, 0.0, rng.uniform(0.0, 3.0, n))
    split = mesh.centroid[:, 0] < np.median(mesh.centroid[:, 0])
    h = np.where(split, h * rng.uniform(2.0, 10.0), h)
    v = rng.normal(scale=rng.uniform(0.0, 2.0), size=(n, 2))
    v[h == 0] = 0.0
    boundary = ["copy_owner", "wall", float(z.max() + 5.0)][int(rng.integers(3))]
    mesh = attach_ghosts(mesh, boundary)
    terrain = Terrain(z, theta)
    friction = FrictionParams(*rng.uniform(0.0, 0.5, 2))
    model = Model(mesh, terrain, friction, viscosity=bool(rng.random() < 0.7), workers=workers)
    state = FieldState(h, v)
    mass0 = total_mass(state, mesh, terrain)
    policy = StepPolicy()
    min_h = float(h.min())
    clamped = 0.0
    for k in range(steps):
        state, rep = advance(state, model, policy)
        min_h = min(min_h, float(state.h.min()))
        clamped += rep.clamped_mass
        if rep.mass == 0.0:
            break
    return PositivityResult(min_h, clamped, mass0, k + 1)


@dataclass
class ClosedBasinResult:
    mass: np.ndarray        # per step, index 0 is the initial state
    energy: np.ndarray
    viscous_dissipation: np.ndarray   # per step, evaluated on the state entering it
    min_h: float
    seconds: float

    @property
    def mass_drift(self) -> float:
        return float(abs(self.mass[-1] - self.mass[0]) / self.mass[0])

    def energy_rises(self, slack: float = 1e-10) -> np.ndarray:
        """Indices of steps with E^{n+1} > E^n + slack E^0."""
        return np.flatnonzero(np.diff(self.energy) > slack * self.energy[0])


def closed_basin_dambreak(cells: int = 64, steps: int = 2000, h_left: float = 2.0, h_right: float = 0.5,
                          split: float = 20.0, theta: float = 1.0, viscosity: bool | str = True,
                          track_dissipation: bool = True, workers: int = 1) -> ClosedBasinResult:
    """Dam break in a walled square basin over a flat bed, no sources or friction."""
    from .diagnostics import viscous_dissipation

    mesh = attach_ghosts(build_structured_mesh("rect", cells, cells, 1.0), "wall")
    terrain = Terrain(np.zeros(mesh.n_cells), np.full(mesh.n_cells, float(theta)))
    state = FieldState.at_rest(np.where(mesh.centroid[:, 0] < split, h_left, h_right))
    model = Model(mesh, terrain, viscosity=viscosity, workers=workers)
    policy = StepPolicy()
    mass = [total_mass(state, mesh, terrain)]
    energy = [cell_energy_total(state, mesh, terrain)]
    dissipation = []
    min_h = float(state.h.min())
    t0 = time.perf_counter()
    for _ in range(steps):
        if track_dissipation and viscosity:
            dissipation.append(viscous_dissipation(state, mesh, terrain, 1.0, mode=viscosity))
        state, rep = advance(state, model, policy)
        mass.append(rep.mass)
        energy.append(rep.energy)
        min_h = min(min_h, float(state.h.min()))
    return ClosedBasinResult(np.array(mass), np.array(energy), np.array(dissipation), min_h,
                             time.perf_counter() - t0)
