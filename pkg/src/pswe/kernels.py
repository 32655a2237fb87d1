"""Backend selection for the edge flux kernel.

The compiled extension is used when it imports; set ``PSWE_BACKEND=python``
to force the numpy path.  Both produce bitwise-identical output.
"""

import os

from . import _core_py

try:
    from . import _core as _compiled
except ImportError:  # extension not built
    _compiled = None

AVAILABLE = {"python": _core_py.edge_fluxes}
if _compiled is not None:
    AVAILABLE["cython"] = _compiled.edge_fluxes

_requested = os.environ.get("PSWE_BACKEND", "").strip().lower()
if _requested and _requested not in AVAILABLE:
    raise ImportError(f"PSWE_BACKEND={_requested!r} not available (have {sorted(AVAILABLE)})")
BACKEND = _requested or ("cython" if "cython" in AVAILABLE else "python")
edge_fluxes = AVAILABLE[BACKEND]


def use_backend(name: str) -> None:
    """Switch the active kernel at runtime (benchmarks, parity tests)."""
    global BACKEND, edge_fluxes
    if name not in AVAILABLE:
        raise ValueError(f"backend {name!r} not available (have {sorted(AVAILABLE)})")
    BACKEND = name
    edge_fluxes = AVAILABLE[name]


def current():
    return edge_fluxes


VISCOSITY_MODES = {"off": 0, "upwind": 1, "bounded": 2}


def viscosity_mode(setting) -> int:
    """Kernel flag for a viscosity setting.

    ``True`` selects ``"bounded"`` (mu built from the smaller adjacent
    theta*h), ``False``/``None`` selects ``"off"``; ``"upwind"`` uses the
    upwinded theta*h as in the plain recipe.
    """
    if setting is None or setting is False:
        return 0
    if setting is True:
        return VISCOSITY_MODES["bounded"]
    try:
        return VISCOSITY_MODES[str(setting).lower()]
    except KeyError:
        raise ValueError(f"viscosity must be a bool or one of {sorted(VISCOSITY_MODES)}, got {setting!r}") from None
