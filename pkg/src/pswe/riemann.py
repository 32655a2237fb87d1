"""Dam-break validation: exact solution for constant porosity and a 1-D runner."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .mesh import attach_ghosts, build_structured_mesh
from .physics import FrictionParams
from .state import G, FieldState, Terrain
from .timestep import Model, StepPolicy, run, total_mass


@dataclass(frozen=True)
class RiemannIC:
    h_l: float = 9.0
    h_r: float = 1.0
    v_l: float = 0.0
    v_r: float = 0.0
    theta_l: float = 1.0
    theta_r: float = 1.0
    x0: float = 1.0
    z: float = 1.0
    half_width: float = 5.0  # domain is [x0 - half_width, x0 + half_width]

    def __post_init__(self):
        if self.h_l < 0 or self.h_r < 0:
            raise ValueError("depths must be nonnegative")


class DamBreak:
    """Exact solution of the frictionless flat-bed dam break, h_l > h_r >= 0, at rest.

    Left rarefaction into a constant middle state followed by a right-moving
    shock (a dry right state gives the rarefaction alone).  The middle depth
    solves  2(c_l - c_m) = (h_m - h_r) sqrt(g (h_m + h_r) / (2 h_m h_r)).
    """

    def __init__(self, h_l: float, h_r: float, g: float = G):
        if not h_l > h_r >= 0:
            raise ValueError("only h_l > h_r >= 0 is supported")
        self.h_l, self.h_r, self.g = float(h_l), float(h_r), g
        self.c_l = math.sqrt(g * h_l)
        if h_r == 0:
            self.h_m, self.u_m, self.shock_speed = 0.0, 2 * self.c_l, 2 * self.c_l
        else:
            self.h_m = brentq(self.matching, h_r, h_l, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
            self.u_m = 2 * (self.c_l - math.sqrt(g * self.h_m))
            self.shock_speed = self.h_m * self.u_m / (self.h_m - self.h_r)
        self.c_m = math.sqrt(g * self.h_m)
        self.check()

    def matching(self, h: float) -> float:
        g = self.g
        rare = 2 * (self.c_l - math.sqrt(g * h))
        shock = (h - self.h_r) * math.sqrt(g * (h + self.h_r) / (2 * h * self.h_r))
        return rare - shock

    def rankine_hugoniot_residual(self) -> tuple[float, float]:
        """Relative residuals of the mass and momentum jump conditions."""
        if self.h_r == 0:
            return 0.0, 0.0
        s, g = self.shock_speed, self.g
        hm, um, hr = self.h_m, self.u_m, self.h_r
        mass = s * (hm - hr) - hm * um
        mom = s * hm * um - (hm * um * um + 0.5 * g * hm * hm - 0.5 * g * hr * hr)
        return abs(mass) / (hm * abs(um)), abs(mom) / (0.5 * g * hm * hm)

    def invariant_residual(self) -> float:
        """Change of u + 2c across the rarefaction, relative to 2 c_l."""
        return abs(self.u_m + 2 * self.c_m - 2 * self.c_l) / (2 * self.c_l)

    def check(self, tol: float = 1e-10) -> None:
        worst = max(*self.rankine_hugoniot_residual(), self.invariant_residual())
        if worst > tol:
            raise ArithmeticError(f"dam-break self-check failed (residual {worst:.3e})")

    def sample(self, xi) -> tuple[np.ndarray, np.ndarray]:
        """(h, u) at similarity coordinate xi = (x - x0) / t."""
        xi = np.asarray(xi, dtype=float)
        g = self.g
        h = np.full(xi.shape, self.h_r)
        u = np.zeros(xi.shape)
        left = xi <= -self.c_l
        fan = (xi > -self.c_l) & (xi <= self.u_m - self.c_m)
        mid = (xi > self.u_m - self.c_m) & (xi <= self.shock_speed)
        h[left] = self.h_l
        c = (2 * self.c_l - xi[fan]) / 3
        h[fan] = c * c / g
        u[fan] = 2 * (self.c_l - c)
        h[mid] = self.h_m
        u[mid] = self.u_m
        return h, u


def exact_dambreak(h_l: float, h_r: float, x, t: float, x0: float = 0.0, g: float = G):
    """Exact (h, v) at positions ``x`` and time ``t > 0``."""
    if not t > 0:
        raise ValueError("t must be positive")
    return DamBreak(h_l, h_r, g).sample((np.asarray(x, dtype=float) - x0) / t)


@dataclass(frozen=True, eq=False)
class Profile:
    x: np.ndarray
    h: np.ndarray
    v: np.ndarray
    area: np.ndarray
    t: float
    mass0: float
    mass: float

    def to_csv(self, path: str | Path, exact: tuple[np.ndarray, np.ndarray] | None = None) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["x", "h_num", "v_num", "h_exact", "v_exact"])
            for k in range(self.x.size):
                he = repr(float(exact[0][k])) if exact is not None else ""
                ve = repr(float(exact[1][k])) if exact is not None else ""
                w.writerow([repr(float(self.x[k])), repr(float(self.h[k])), repr(float(self.v[k])), he, ve])


def run_riemann_1d(ic: RiemannIC, cells: int, t_end: float, with_friction: bool = False, *,
                   viscosity: bool = False, friction: FrictionParams | None = None,
                   policy: StepPolicy | None = None, workers: int = 1, g: float = G,
                   ends: str = "closed") -> Profile:
    """Run the 2-D engine on a cells x 1 strip.

    The lateral sides are zero-flux walls.  With ``ends="free"`` the two
    ends discharge freely; ``ends="closed"`` makes them walls too, so nothing
    happens there until a wave arrives.
    """
    if ends not in ("free", "closed"):
        raise ValueError("ends must be 'free' or 'closed'")
    if cells < 10:
        raise ValueError("need at least 10 cells")
    length = 2 * ic.half_width
    dx = length / cells
    mesh = build_structured_mesh("rect", cells, 1, dx, origin=(ic.x0 - ic.half_width, 0.0))
    end = "copy_owner" if ends == "free" else "wall"
    mesh = attach_ghosts(mesh, {"west": end, "east": end, "south": "wall", "north": "wall"})
    x = mesh.centroid[:, 0]
    left = x < ic.x0
    terrain = Terrain(np.full(cells, float(ic.z)), np.where(left, ic.theta_l, ic.theta_r))
    h = np.where(left, ic.h_l, ic.h_r).astype(float)
    v = np.zeros((cells, 2))
    v[:, 0] = np.where(left, ic.v_l, ic.v_r)
    state = FieldState(h, v)
    if with_friction:
        params = friction or FrictionParams(alpha_p=0.1, alpha_s=0.01)
    else:
        params = FrictionParams()
    model = Model(mesh, terrain, params, viscosity=viscosity, g=g, workers=workers)
    m0 = total_mass(state, mesh, terrain)
    final, _ = run(state, model, policy or StepPolicy(), t_end)
    return Profile(x, final.h.copy(), final.v[:, 0].copy(), mesh.area, t_end, m0,
                   total_mass(final, mesh, terrain))


def l1_error(profile: Profile | np.ndarray, exact, area: np.ndarray | None = None) -> float:
    """Area-weighted L1 distance sum(area |h_num - h_exact|) / sum(area).

    On a strip this is the usual 1-D L1 norm divided by the domain length.
    """
    if isinstance(profile, Profile):
        h, area = profile.h, profile.area
    else:
        h = np.asarray(profile, dtype=float)
    exact = np.asarray(exact, dtype=float)
    if h.shape != exact.shape:
        raise ValueError(f"profile length {h.size} does not match exact solution length {exact.size}")
    if area is None:
        area = np.ones_like(h)
    return float(np.sum(area * np.abs(h - exact)) / np.sum(area))
