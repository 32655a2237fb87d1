"""Raster ingestion, run configuration and result serialization.

Rasters are ESRI ASCII grids (six header lines, values row-major with the
top row first).  Run configurations are INI files read with configparser;
the accepted sections and keys are listed in ``SCHEMA``.
"""

from __future__ import annotations

import configparser
import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .mesh import COPY_OWNER, Mesh, attach_ghosts, build_structured_mesh
from .physics import (ConstantInfiltration, ConstantRain, FrictionParams, HortonInfiltration, Hyetograph,
                      NoInfiltration, SourceModel)
from .state import G, FieldState, Terrain, make_lake_state
from .timestep import Model, StepPolicy

HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value")
NODATA_DEFAULT = -9999.0
NODATA_WALL_HEIGHT = 100.0


class RasterError(ValueError):
    pass


class ConfigError(ValueError):
    pass


# -- rasters ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Raster:
    """ESRI ASCII grid.  ``values[0]`` is the northernmost row."""

    ncols: int
    nrows: int
    cellsize: float
    xllcorner: float
    yllcorner: float
    nodata: float
    values: np.ndarray

    def __post_init__(self):
        if self.ncols < 1 or self.nrows < 1:
            raise RasterError(f"raster dimensions must be positive, got {self.ncols}x{self.nrows}")
        if not self.cellsize > 0:
            raise RasterError(f"cellsize must be positive, got {self.cellsize}")
        if np.shape(self.values) != (self.nrows, self.ncols):
            raise RasterError(f"values have shape {np.shape(self.values)}, header says "
                              f"{self.nrows} rows x {self.ncols} columns")

    @property
    def missing(self) -> np.ndarray:
        return self.values == self.nodata

    @classmethod
    def from_cells(cls, values: np.ndarray, mesh: Mesh, nodata: float = NODATA_DEFAULT) -> "Raster":
        """Raster of per-cell values on a full rectangular mesh."""
        if mesh.kind != "rectangular" or mesh.shape is None or mesh.n_cells != mesh.shape[0] * mesh.shape[1]:
            raise RasterError("only complete rectangular meshes map one-to-one onto a raster")
        nx, ny = mesh.shape
        grid = np.asarray(values, dtype=float).reshape(ny, nx)[::-1]
        return cls(nx, ny, float(mesh.spacing), float(mesh.origin[0]), float(mesh.origin[1]), nodata, grid.copy())

    def sample(self, points: np.ndarray) -> np.ndarray:
        """Value of the raster cell containing each point; NaN outside the grid."""
        pts = np.asarray(points, dtype=float)
        col = np.floor((pts[:, 0] - self.xllcorner) / self.cellsize).astype(np.int64)
        row_from_south = np.floor((pts[:, 1] - self.yllcorner) / self.cellsize).astype(np.int64)
        row = self.nrows - 1 - row_from_south
        inside = (col >= 0) & (col < self.ncols) & (row >= 0) & (row < self.nrows)
        out = np.full(pts.shape[0], np.nan)
        out[inside] = self.values[row[inside], col[inside]]
        return out


def _number(tok: str, path, lineno: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise RasterError(f"{path}:{lineno}: non-numeric token {tok!r}") from None


def read_esri_ascii(path: str | Path) -> Raster:
    """Parse an ESRI ASCII grid; header keys are case-insensitive."""
    path = Path(path)
    header: dict[str, float] = {}
    data: list[float] = []
    with open(path) as f:
        lines = f.readlines()
    lineno = 0
    for lineno, line in enumerate(lines, 1):
        parts = line.split()
        if not parts:
            continue
        key = parts[0].lower()
        if key[0].isalpha() and not _is_number(parts[0]):
            if key not in HEADER_KEYS:
                raise RasterError(f"{path}:{lineno}: unknown header key {parts[0]!r}")
            if len(parts) != 2:
                raise RasterError(f"{path}:{lineno}: header line must be 'key value'")
            if key in header:
                raise RasterError(f"{path}:{lineno}: duplicate header key {parts[0]!r}")
            if data:
                raise RasterError(f"{path}:{lineno}: header key {parts[0]!r} after the data")
            header[key] = _number(parts[1], path, lineno)
            continue
        data.extend(_number(tok, path, lineno) for tok in parts)
    for key in HEADER_KEYS[:5]:
        if key not in header:
            raise RasterError(f"{path}: missing header key {key!r}")
    ncols, nrows = header["ncols"], header["nrows"]
    if ncols != int(ncols) or nrows != int(nrows):
        raise RasterError(f"{path}: ncols and nrows must be integers")
    ncols, nrows = int(ncols), int(nrows)
    if len(data) != ncols * nrows:
        raise RasterError(f"{path}:{lineno}: expected {ncols * nrows} values, found {len(data)}")
    return Raster(ncols, nrows, header["cellsize"], header["xllcorner"], header["yllcorner"],
                  header.get("nodata_value", NODATA_DEFAULT), np.array(data).reshape(nrows, ncols))


def _is_number(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def write_esri_ascii(raster: Raster, path: str | Path) -> None:
    """Write with repr() values, so reading back is exact."""
    with open(path, "w") as f:
        f.write(f"ncols {raster.ncols}\n")
        f.write(f"nrows {raster.nrows}\n")
        f.write(f"xllcorner {raster.xllcorner!r}\n")
        f.write(f"yllcorner {raster.yllcorner!r}\n")
        f.write(f"cellsize {raster.cellsize!r}\n")
        f.write(f"NODATA_value {raster.nodata!r}\n")
        for row in raster.values:
            f.write(" ".join(repr(float(v)) for v in row))
            f.write("\n")


# -- configuration ----------------------------------------------------------

# section -> key -> (type, default); default None means mandatory
_REQ = None
SCHEMA: dict[str, dict[str, tuple[type, object]]] = {
    "mesh": {"kind": (str, _REQ), "nx": (int, _REQ), "ny": (int, _REQ), "spacing": (float, _REQ),
             "x0": (float, 0.0), "y0": (float, 0.0), "boundary": (str, "copy_owner"),
             "boundary_west": (str, ""), "boundary_east": (str, ""),
             "boundary_south": (str, ""), "boundary_north": (str, "")},
    "terrain": {"z_raster": (str, ""), "slope_x": (float, 0.0), "slope_y": (float, 0.0), "z0": (float, 0.0),
                "theta_raster": (str, ""), "theta": (float, float("nan")), "nodata": (str, "wall")},
    "physics": {"g": (float, G), "alpha_p": (float, 0.0), "alpha_s": (float, 0.0), "viscosity": (str, "on"),
                "h_dry": (float, 1e-10)},
    "source": {"rain": (float, 0.0), "rain_csv": (str, ""), "infiltration": (str, "none"),
               "rate": (float, 0.0), "f0": (float, 0.0), "fc": (float, 0.0), "k": (float, 0.0),
               "gate_depth": (float, 0.0)},
    "policy": {"safety": (float, 0.9), "bound": (str, "min"), "dt_max": (float, 1e3), "dt_min": (float, 1e-10),
               "workers": (int, 1)},
    "initial": {"kind": (str, _REQ), "level": (float, float("nan")), "h": (float, float("nan")),
                "h_left": (float, float("nan")), "h_right": (float, float("nan")), "x_split": (float, float("nan")),
                "h_raster": (str, ""), "vx": (float, 0.0), "vy": (float, 0.0)},
    "output": {"t_end": (float, _REQ), "dt_out": (float, 0.0), "series_dt": (float, 0.0),
               "snapshots": (bool, True)},
}
MANDATORY = tuple((s, k) for s, keys in SCHEMA.items() for k, (_, d) in keys.items() if d is _REQ)
INITIAL_KINDS = ("lake", "uniform", "dambreak", "raster")


@dataclass
class RunConfig:
    """Validated run configuration; ``sections`` holds typed values for every key."""

    sections: dict[str, dict[str, object]]
    base_dir: Path = field(default_factory=Path.cwd)

    def __getitem__(self, section: str) -> dict[str, object]:
        return self.sections[section]

    @property
    def step_policy(self) -> StepPolicy:
        p = self["policy"]
        return StepPolicy(p["safety"], p["bound"], p["dt_max"], p["dt_min"])

    @property
    def viscosity(self) -> bool | str:
        v = str(self["physics"]["viscosity"]).lower()
        return {"on": True, "true": True, "yes": True, "1": True,
                "off": False, "false": False, "no": False, "0": False}.get(v, v)

    def path(self, value: str) -> Path:
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p


def _convert(section: str, key: str, typ: type, raw: str, parser: configparser.ConfigParser):
    try:
        if typ is bool:
            return parser.getboolean(section, key)
        return typ(raw.strip())
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a valid {typ.__name__}") from None


def parse_config(text: str, base_dir: str | Path = ".", source: str = "<config>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    unknown = [s for s in parser.sections() if s not in SCHEMA]
    if unknown:
        raise ConfigError(f"{source}: unknown section(s) {unknown}")
    sections: dict[str, dict[str, object]] = {}
    for section, keys in SCHEMA.items():
        given = dict(parser.items(section)) if parser.has_section(section) else {}
        extra = sorted(set(given) - set(keys))
        if extra:
            raise ConfigError(f"{source}: unknown key(s) in [{section}]: {extra}")
        values = {}
        for key, (typ, default) in keys.items():
            if key in given:
                values[key] = _convert(section, key, typ, given[key], parser)
            elif default is _REQ:
                raise ConfigError(f"{source}: missing mandatory key [{section}] {key}")
            else:
                values[key] = default
        sections[section] = values
    cfg = RunConfig(sections, Path(base_dir))
    _validate(cfg, source)
    return cfg


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text(), path.parent, str(path))


def _validate(cfg: RunConfig, source: str) -> None:
    m, t, ph, src, ini, out = (cfg[s] for s in ("mesh", "terrain", "physics", "source", "initial", "output"))
    if m["kind"] not in ("rect", "rectangular", "hex", "hexagonal"):
        raise ConfigError(f"{source}: [mesh] kind must be rect or hex, got {m['kind']!r}")
    if m["nx"] < 1 or m["ny"] < 1 or not m["spacing"] > 0:
        raise ConfigError(f"{source}: [mesh] needs nx, ny >= 1 and spacing > 0")
    if t["theta_raster"] and not np.isnan(t["theta"]):
        raise ConfigError(f"{source}: [terrain] give either theta_raster or theta, not both")
    theta = 1.0 if np.isnan(t["theta"]) else t["theta"]
    if not t["theta_raster"] and not 0 < theta <= 1:
        raise ConfigError(f"{source}: [terrain] theta must lie in (0, 1]")
    if t["nodata"] not in ("wall", "hole"):
        raise ConfigError(f"{source}: [terrain] nodata must be 'wall' or 'hole'")
    if ph["alpha_p"] < 0 or ph["alpha_s"] < 0 or not ph["g"] > 0:
        raise ConfigError(f"{source}: [physics] needs alpha_p, alpha_s >= 0 and g > 0")
    if cfg.viscosity not in (True, False, "upwind", "bounded"):
        raise ConfigError(f"{source}: [physics] viscosity must be on/off/upwind/bounded")
    if src["infiltration"] not in ("none", "constant", "horton"):
        raise ConfigError(f"{source}: [source] infiltration must be none, constant or horton")
    if src["rain_csv"] and src["rain"]:
        raise ConfigError(f"{source}: [source] give either rain or rain_csv, not both")
    if ini["kind"] not in INITIAL_KINDS:
        raise ConfigError(f"{source}: [initial] kind must be one of {INITIAL_KINDS}")
    need = {"lake": ("level",), "uniform": ("h",), "dambreak": ("h_left", "h_right", "x_split"), "raster": ()}
    for key in need[ini["kind"]]:
        if np.isnan(ini[key]):
            raise ConfigError(f"{source}: [initial] kind={ini['kind']} needs {key}")
    if ini["kind"] == "raster" and not ini["h_raster"]:
        raise ConfigError(f"{source}: [initial] kind=raster needs h_raster")
    if not out["t_end"] > 0 or out["dt_out"] < 0 or out["series_dt"] < 0:
        raise ConfigError(f"{source}: [output] needs t_end > 0 and nonnegative cadences")
    if cfg["policy"]["workers"] < 1:
        raise ConfigError(f"{source}: [policy] workers must be >= 1")
    try:
        cfg.step_policy
    except ValueError as exc:
        raise ConfigError(f"{source}: [policy] {exc}") from None
    for section, key in (("terrain", "z_raster"), ("terrain", "theta_raster"), ("initial", "h_raster"),
                         ("source", "rain_csv")):
        value = cfg[section][key]
        if value and not cfg.path(value).is_file():
            raise ConfigError(f"{source}: [{section}] {key}: file not found: {value}")


def render_config(sections: dict[str, dict[str, object]]) -> str:
    """INI text for a (partial) section mapping; inverse of parse_config for given keys."""
    parser = configparser.ConfigParser(interpolation=None)
    for section, values in sections.items():
        parser[section] = {k: repr(v) if isinstance(v, float) else str(v) for k, v in values.items()}
    from io import StringIO

    buf = StringIO()
    parser.write(buf)
    return buf.getvalue()


# -- assembling a run -------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RunSetup:
    mesh: Mesh
    terrain: Terrain
    model: Model
    state: FieldState
    policy: StepPolicy


def _boundary_policy(value: str):
    try:
        return float(value)
    except ValueError:
        return value


def terrain_from_rasters(mesh_points: np.ndarray, z_raster: Raster, theta_raster: Raster | None,
                         theta: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sample z (and theta) at the given points.

    Returns ``(z, theta, missing)``; ``missing`` flags points on NODATA or
    outside the z raster, where z is NaN.
    """
    z = z_raster.sample(mesh_points)
    raw = z.copy()
    missing = np.isnan(raw) | (raw == z_raster.nodata)
    z[missing] = np.nan
    if theta_raster is not None:
        th = theta_raster.sample(mesh_points)
        bad = np.isnan(th) | (th == theta_raster.nodata)
        th[bad] = 1.0
    else:
        th = np.full(len(mesh_points), float(theta))
    return z, th, missing


def build_run(cfg: RunConfig, workers: int | None = None) -> RunSetup:
    m, t, ph, src, ini = (cfg[s] for s in ("mesh", "terrain", "physics", "source", "initial"))
    nx, ny, dx = m["nx"], m["ny"], m["spacing"]
    origin = (m["x0"], m["y0"])
    full = build_structured_mesh(m["kind"], nx, ny, dx, origin)
    theta_const = 1.0 if np.isnan(t["theta"]) else t["theta"]
    theta_raster = read_esri_ascii(cfg.path(t["theta_raster"])) if t["theta_raster"] else None

    if t["z_raster"]:
        z, theta, missing = terrain_from_rasters(full.centroid, read_esri_ascii(cfg.path(t["z_raster"])),
                                                 theta_raster, theta_const)
        if missing.all():
            raise ConfigError("the terrain raster does not cover any cell")
    else:
        xi = np.array([t["slope_x"], t["slope_y"]])
        z = t["z0"] + full.centroid @ xi
        theta = np.full(full.n_cells, theta_const)
        if theta_raster is not None:
            sampled = theta_raster.sample(full.centroid)
            theta = np.where(np.isnan(sampled) | (sampled == theta_raster.nodata), 1.0, sampled)
        missing = np.zeros(full.n_cells, dtype=bool)

    keep = None
    if missing.any():
        if t["nodata"] == "wall":
            # impermeable high ground
            z = np.where(missing, np.nanmax(z) + NODATA_WALL_HEIGHT, z)
            theta = np.where(missing, 1.0, theta)
        else:
            keep = ~missing
    mesh = full if keep is None else build_structured_mesh(m["kind"], nx, ny, dx, origin, keep=keep)
    if keep is not None:
        z, theta = z[keep], theta[keep]

    sides = {s: _boundary_policy(m[f"boundary_{s}"] or m["boundary"]) for s in ("west", "east", "south", "north")}
    mesh = attach_ghosts(mesh, sides)
    if keep is not None:
        mesh = _free_discharge_on_holes(mesh, full)

    terrain = Terrain(z, theta)
    sources = _source_model(cfg)
    model = Model(mesh, terrain, FrictionParams(ph["alpha_p"], ph["alpha_s"]), sources, cfg.viscosity, ph["g"],
                  workers or cfg["policy"]["workers"], ph["h_dry"])
    state = _initial_state(cfg, mesh, terrain, keep, full)
    return RunSetup(mesh, terrain, model, state, cfg.step_policy)


def _free_discharge_on_holes(mesh: Mesh, full: Mesh) -> Mesh:
    """Ghosts on sides facing a removed cell discharge freely.

    A side is on the outer outline when the full mesh has a boundary side
    with the same midpoint.
    """
    from dataclasses import replace

    scale = 1e6 / float(full.spacing)

    def key(p):
        return (int(round(p[0] * scale)), int(round(p[1] * scale)))

    outline = {key(p) for p in full.edge_midpoint[full.boundary_edges]}
    outer = np.array([key(p) in outline for p in mesh.edge_midpoint[mesh.ghost_edge]], dtype=bool)
    mode = np.where(outer, mesh.ghost_mode, COPY_OWNER).astype(np.int8)
    return replace(mesh, ghost_mode=mode)


def _source_model(cfg: RunConfig) -> SourceModel:
    s = cfg["source"]
    rain = Hyetograph.from_csv(cfg.path(s["rain_csv"])) if s["rain_csv"] else ConstantRain(s["rain"])
    kind = s["infiltration"]
    if kind == "constant":
        inf = ConstantInfiltration(s["rate"], s["gate_depth"])
    elif kind == "horton":
        inf = HortonInfiltration(s["f0"], s["fc"], s["k"], s["gate_depth"])
    else:
        inf = NoInfiltration()
    return SourceModel(rain, inf)


def _initial_state(cfg: RunConfig, mesh: Mesh, terrain: Terrain, keep, full: Mesh) -> FieldState:
    ini = cfg["initial"]
    g = cfg["physics"]["g"]
    n = mesh.n_cells
    kind = ini["kind"]
    if kind == "lake":
        state = make_lake_state(mesh, terrain, g * ini["level"], g)
    elif kind == "uniform":
        state = FieldState(np.full(n, ini["h"]), np.zeros((n, 2)))
    elif kind == "dambreak":
        h = np.where(mesh.centroid[:, 0] < ini["x_split"], ini["h_left"], ini["h_right"]).astype(float)
        state = FieldState(h, np.zeros((n, 2)))
    else:
        r = read_esri_ascii(cfg.path(ini["h_raster"]))
        h = r.sample(mesh.centroid)
        h = np.where(np.isnan(h) | (h == r.nodata), 0.0, h)
        if (h < 0).any():
            raise ConfigError("initial depth raster has negative values")
        state = FieldState(h, np.zeros((n, 2)))
    if ini["vx"] or ini["vy"]:
        v = np.tile([ini["vx"], ini["vy"]], (n, 1))
        v[state.h <= 0] = 0.0
        state = FieldState(state.h, v, state.t)
    return state


# -- results ----------------------------------------------------------------

def output_times(t_end: float, dt_out: float) -> np.ndarray:
    """0, dt_out, 2 dt_out, ... up to t_end (always included)."""
    if dt_out <= 0:
        return np.array([0.0, t_end])
    n = int(np.floor(t_end / dt_out + 1e-9))
    times = dt_out * np.arange(n + 1)
    if t_end - times[-1] > 1e-9 * t_end:
        times = np.append(times, t_end)
    return times


def snapshot_name(field_name: str, step: int, t: float) -> str:
    return f"{field_name}_{step:06d}_t{t:014.6f}.asc"


def write_snapshot(state: FieldState, terrain: Terrain, mesh: Mesh, out_dir: str | Path, step: int,
                   g: float = G) -> list[Path]:
    """h, |v| and w rasters (rectangular meshes) or one cell CSV (other meshes)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    speed = np.hypot(state.v[:, 0], state.v[:, 1])
    w = g * (terrain.z + state.h)
    rect = mesh.kind == "rectangular" and mesh.shape is not None and mesh.n_cells == mesh.shape[0] * mesh.shape[1]
    if rect:
        paths = []
        for name, values in (("h", state.h), ("speed", speed), ("w", w)):
            p = out / snapshot_name(name, step, state.t)
            write_esri_ascii(Raster.from_cells(values, mesh), p)
            paths.append(p)
        return paths
    p = out / f"cells_{step:06d}_t{state.t:014.6f}.csv"
    with open(p, "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(["x", "y", "h", "speed", "w"])
        for k in range(mesh.n_cells):
            wr.writerow([repr(float(mesh.centroid[k, 0])), repr(float(mesh.centroid[k, 1])),
                         repr(float(state.h[k])), repr(float(speed[k])), repr(float(w[k]))])
    return [p]


def write_series(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """CSV with a header row; floats are written with repr()."""
    with open(path, "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(list(header))
        for row in rows:
            wr.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def write_state_dump(state: FieldState, path: str | Path) -> None:
    """Plain per-cell dump (h, vx, vy) of a state, e.g. the last valid one."""
    write_series(path, ["h", "vx", "vy"],
                 ((float(h), float(vx), float(vy)) for h, (vx, vy) in zip(state.h, state.v)))
