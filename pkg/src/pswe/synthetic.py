"""Synthetic terrains evaluated at cell centroids (mesh-kind agnostic)."""

from __future__ import annotations

import numpy as np

from .mesh import Mesh


def _extent(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    pts = np.concatenate(mesh.vertices)
    return pts.min(axis=0), pts.max(axis=0)


def random_terrain(mesh: Mesh, rng: np.random.Generator, low: float = 0.0, high: float = 1.0) -> np.ndarray:
    """Independent U[low, high) altitude per cell."""
    return rng.uniform(low, high, mesh.n_cells)


def bowl(mesh: Mesh, depth: float = 1.0, rim: float = 0.0) -> np.ndarray:
    """Paraboloid with its bottom at the domain centre.

    The altitude is ``rim - depth`` at the centre and ``rim`` on the
    inscribed circle.
    """
    lo, hi = _extent(mesh)
    c = 0.5 * (lo + hi)
    r = 0.5 * float(np.min(hi - lo))
    d = mesh.centroid - c
    return rim - depth + depth * (d[:, 0] ** 2 + d[:, 1] ** 2) / (r * r)


def bowl_lake_level(z: np.ndarray, wet_fraction: float) -> float:
    """Lake level wetting the requested fraction of cells (strictly below it)."""
    if not 0 < wet_fraction < 1:
        raise ValueError("wet_fraction must lie in (0, 1)")
    zs = np.sort(z)
    k = int(round(wet_fraction * z.size))
    k = min(max(k, 1), z.size - 1)
    return 0.5 * (zs[k - 1] + zs[k])


def valley(mesh: Mesh, side_slope: float = 0.05, thalweg_slope: float = 0.01, relief: float = 0.0) -> np.ndarray:
    """V-shaped valley draining towards the west edge.

    The thalweg runs along the horizontal mid-line and rises eastwards with
    ``thalweg_slope``; the flanks rise with ``side_slope``.  ``relief`` adds
    a smooth deterministic undulation of that amplitude.
    """
    lo, hi = _extent(mesh)
    x = mesh.centroid[:, 0] - lo[0]
    y = mesh.centroid[:, 1] - 0.5 * (lo[1] + hi[1])
    z = thalweg_slope * x + side_slope * np.abs(y)
    if relief:
        lx, ly = hi - lo
        z = z + relief * np.sin(2 * np.pi * 3 * x / lx) * np.cos(2 * np.pi * 2 * y / ly)
    return z
