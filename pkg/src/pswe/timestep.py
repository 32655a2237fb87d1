"""First-order fractional-step integrator.

One step: explicit transport + free-surface + viscosity update of the
conservative variables, then an implicit mass-source solve for depth and an
implicit friction solve for velocity, both at the new time level.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable

import numpy as np

from .mesh import Mesh, min_area_to_perimeter
from .physics import FrictionParams, SourceModel, friction_K
from .scheme import SemidiscreteRHS, assemble_rhs
from .state import G, H_DRY, FieldState, Terrain

log = logging.getLogger(__name__)

BOUNDS = ("positivity", "cfl", "min")


class SolverError(RuntimeError):
    """The integrator cannot continue; ``state`` is the last valid state."""

    def __init__(self, msg: str, state: FieldState | None = None):
        super().__init__(msg)
        self.state = state


class PositivityError(SolverError):
    pass


class TimeStepError(SolverError):
    pass


@dataclass(frozen=True)
class StepPolicy:
    safety: float = 0.9
    bound: str = "min"
    dt_max: float = 1e3
    dt_min: float = 1e-10

    def __post_init__(self):
        if not 0 < self.safety <= 1:
            raise ValueError("safety factor must lie in (0, 1]")
        if self.bound not in BOUNDS:
            raise ValueError(f"bound must be one of {BOUNDS}")
        if not 0 < self.dt_min <= self.dt_max:
            raise ValueError("need 0 < dt_min <= dt_max")


@dataclass(frozen=True, eq=False)
class Model:
    """Everything a step needs besides the state."""

    mesh: Mesh
    terrain: Terrain
    friction: FrictionParams = field(default_factory=FrictionParams)
    sources: SourceModel = field(default_factory=SourceModel)
    viscosity: bool | str = True   # see scheme.viscosity_coefficients
    g: float = G
    workers: int = 1
    h_dry: float = H_DRY

    @cached_property
    def ghost_z(self) -> np.ndarray:
        return self.mesh.ghost_altitude(self.terrain.z)

    @cached_property
    def phi_min(self) -> float:
        return min_area_to_perimeter(self.mesh)


@dataclass(frozen=True)
class StepReport:
    t: float
    dt: float
    mass: float
    energy: float
    max_speed: float
    clamped_mass: float
    source_clamped: float = 0.0

    FIELDS = ("t", "dt", "mass", "energy", "max_speed", "clamped_mass", "source_clamped")

    def row(self) -> list[str]:
        return [repr(float(getattr(self, k))) for k in self.FIELDS]


def _speed(v: np.ndarray) -> np.ndarray:
    return np.sqrt(v[:, 0] * v[:, 0] + v[:, 1] * v[:, 1])


def dt_positivity(state: FieldState, mesh: Mesh, dt_max: float = math.inf,
                  phi_min: float | None = None) -> float:
    """phi_min / max|v|: the depth stays nonnegative below this step."""
    vmax = float(_speed(state.v).max(initial=0.0))
    if vmax == 0.0:
        return dt_max
    phi = min_area_to_perimeter(mesh) if phi_min is None else phi_min
    return min(phi / vmax, dt_max)


def dt_cfl(state: FieldState, mesh: Mesh, g: float = G, dt_max: float = math.inf,
           phi_min: float | None = None) -> float:
    """phi_min / max(|v| + sqrt(g h))."""
    c = _speed(state.v) + np.sqrt(g * state.h)
    cmax = float(c.max(initial=0.0))
    if cmax == 0.0:
        return dt_max
    phi = min_area_to_perimeter(mesh) if phi_min is None else phi_min
    return min(phi / cmax, dt_max)


def select_dt(state: FieldState, model: Model, policy: StepPolicy) -> float:
    bounds = []
    if policy.bound in ("positivity", "min"):
        bounds.append(dt_positivity(state, model.mesh, policy.dt_max, model.phi_min))
    if policy.bound in ("cfl", "min"):
        bounds.append(dt_cfl(state, model.mesh, model.g, policy.dt_max, model.phi_min))
    tau = min(bounds)
    if tau >= policy.dt_max:
        return policy.dt_max
    return policy.safety * tau


def hyperbolic_substep(state: FieldState, rhs: SemidiscreteRHS, dt: float, mesh: Mesh, terrain: Terrain):
    """Explicit update of theta*h and theta*h*v.

    Returns ``(th_star, thv_star, clamped)`` where ``clamped`` is the
    roundoff-level negative mass (per unit area, summed with areas) snapped
    to zero.  Anything more negative than that raises PositivityError.
    """
    th = terrain.theta * state.h
    thv = th[:, None] * state.v
    r = dt / mesh.area
    th_star = th + r * rhs.L
    thv_star = thv + r[:, None] * (rhs.J + rhs.V + rhs.S)
    neg = th_star < 0
    clamped = 0.0
    if neg.any():
        tol = max(1e-14, 1e-12 * float(th.max(initial=0.0)))
        worst = float(th_star.min())
        if worst < -tol:
            raise PositivityError(
                f"theta*h = {worst:.3e} after the transport step at t={state.t:.6g} (dt={dt:.3e}); "
                "time step too large", state)
        clamped = float(-(mesh.area[neg] * th_star[neg]).sum())
        th_star = np.where(neg, 0.0, th_star)
        thv_star[neg] = 0.0
    return th_star, thv_star, clamped


def source_substep_h(th_star: np.ndarray, t_next: float, theta: np.ndarray, model: SourceModel, dt: float,
                     max_iter: int = 100):
    """Implicit mass-source update: y = th_star + dt (r - theta iota(t, y/theta)).

    Returns ``(th_new, clamped)``; ``clamped`` is the per-area mass that the
    sources would have removed below zero depth.
    """
    if model.is_null:
        return th_star.copy(), np.zeros_like(th_star)
    r = model.rain(t_next)
    inf = model.infiltration
    if not inf.depth_dependent:
        y = th_star + dt * (r - theta * inf(t_next, th_star))
    else:
        def resid(y):
            return y - th_star - dt * (r - theta * inf(t_next, y / theta))

        # resid is increasing in y; a root below zero means the sources would
        # drain the cell dry, which is clamped below
        below = resid(np.zeros_like(th_star)) >= 0
        lo = np.zeros_like(th_star)
        hi = np.maximum(th_star + dt * np.maximum(r, 0.0), 0.0)
        active = ~below & (hi > lo)
        y = hi.copy()
        tiny = 4 * np.finfo(float).eps
        for _ in range(max_iter):
            if not active.any():
                break
            mid = 0.5 * (lo + hi)
            up = resid(mid) < 0
            lo = np.where(active & up, mid, lo)
            hi = np.where(active & ~up, mid, hi)
            conv = active & ((hi - lo) <= tiny * np.maximum(hi, 1e-300))
            y = np.where(conv, hi, y)
            active &= ~conv
        if active.any():
            raise SolverError(f"infiltration solve did not converge in {max_iter} iterations")
        y = np.where(below, th_star + dt * (r - theta * inf(t_next, np.zeros_like(th_star))), y)
    clamped = np.where(y < 0, -y, 0.0)
    return np.maximum(y, 0.0), clamped


def friction_substep_v(th_new: np.ndarray, thv_star: np.ndarray, K: np.ndarray, dt: float) -> np.ndarray:
    """Implicit friction: th*v + dt K |v| v = thv_star.

    v is parallel to ``thv_star``; its magnitude is the nonnegative root of
    dt K s^2 + th s - |thv_star| = 0, written in the cancellation-free form
    s = 2 m / (th + sqrt(th^2 + 4 dt K m)).  Cells with th = 0 get v = 0.
    """
    m = np.sqrt(thv_star[:, 0] * thv_star[:, 0] + thv_star[:, 1] * thv_star[:, 1])
    den = th_new + np.sqrt(th_new * th_new + 4.0 * dt * K * m)
    scale = np.divide(2.0, den, out=np.zeros_like(den), where=(th_new > 0) & (den > 0))
    return scale[:, None] * thv_star


def cell_energy_total(state: FieldState, mesh: Mesh, terrain: Terrain, g: float = G) -> float:
    h, v = state.h, state.v
    e = terrain.theta * (0.5 * (v[:, 0] * v[:, 0] + v[:, 1] * v[:, 1]) * h + 0.5 * g * h * h + g * terrain.z * h)
    return float(np.sum(mesh.area * e))


def total_mass(state: FieldState, mesh: Mesh, terrain: Terrain) -> float:
    """Sum of area * theta * h."""
    return float(np.sum(mesh.area * terrain.theta * state.h))


def advance(state: FieldState, model: Model, policy: StepPolicy, dt: float | None = None,
            rhs: SemidiscreteRHS | None = None) -> tuple[FieldState, StepReport]:
    """One fractional step.  ``dt`` overrides the policy (it must respect it)."""
    mesh, terrain = model.mesh, model.terrain
    if dt is None:
        dt = select_dt(state, model, policy)
        if dt < policy.dt_min:
            raise TimeStepError(f"time step {dt:.3e} fell below dt_min={policy.dt_min:.3e} at t={state.t:.6g}",
                                state)
    if rhs is None:
        rhs = assemble_rhs(state, mesh, terrain, model.friction, model.viscosity, model.g, model.workers,
                           model.ghost_z)
    th_star, thv_star, clamped = hyperbolic_substep(state, rhs, dt, mesh, terrain)
    t_next = state.t + dt
    th_new, src_clamped = source_substep_h(th_star, t_next, terrain.theta, model.sources, dt)

    # depth in increment form: a zero update leaves h bit-for-bit unchanged
    th_old = terrain.theta * state.h
    h_new = np.where(th_new > 0, np.maximum(state.h + (th_new - th_old) / terrain.theta, 0.0), 0.0)

    K = friction_K(h_new, terrain.theta, model.friction)
    v_new = friction_substep_v(th_new, thv_star, K, dt)
    v_new[h_new <= model.h_dry] = 0.0

    new = FieldState(h_new, v_new, t_next)
    report = StepReport(
        t=t_next,
        dt=dt,
        mass=total_mass(new, mesh, terrain),
        energy=cell_energy_total(new, mesh, terrain, model.g),
        max_speed=float(_speed(v_new).max(initial=0.0)),
        clamped_mass=clamped,
        source_clamped=float(np.sum(mesh.area * src_clamped)),
    )
    return new, report


def run(state: FieldState, model: Model, policy: StepPolicy, t_end: float, *,
        output_times: Iterable[float] = (), on_output: Callable[[FieldState], None] | None = None,
        on_step: Callable[[FieldState, StepReport], None] | None = None,
        max_steps: int | None = None) -> tuple[FieldState, list[StepReport]]:
    """Advance to ``t_end``, landing exactly on every output time.

    ``on_output`` sees the initial state and the state at each output time.
    """
    outs = [float(t) for t in output_times]
    stops = sorted({t for t in outs if state.t < t <= t_end} | {float(t_end)})
    reports: list[StepReport] = []
    if on_output is not None:
        on_output(state)
    k = 0
    for stop in stops:
        while state.t < stop:
            dt = select_dt(state, model, policy)
            if dt < policy.dt_min:
                raise TimeStepError(
                    f"time step {dt:.3e} fell below dt_min={policy.dt_min:.3e} at t={state.t:.6g}", state)
            landing = state.t + dt >= stop
            if landing:
                dt = stop - state.t
            state, rep = advance(state, model, policy, dt=dt)
            if landing:
                state = FieldState(state.h, state.v, stop)
            reports.append(rep)
            if on_step is not None:
                on_step(state, rep)
            k += 1
            if max_steps is not None and k >= max_steps:
                return state, reports
        if on_output is not None:
            on_output(state)
    return state, reports
