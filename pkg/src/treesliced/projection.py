"""Projection of discrete measures onto tree systems.

Each support point contributes one atom per line: the atom's coordinate is
the orthogonal projection onto the line (measured from the line's source),
and its mass is the support weight times a splitting weight. The splitting
map assigns a simplex vector over the k lines, computed from point-to-line
distances so that it is invariant under rigid motions of point and system
together.

Sign convention: the softmax is applied to ``delta * distance`` exactly as
configured. A positive ``delta`` therefore puts MORE mass on lines that are
FARTHER from the point; pass a negative ``delta`` to favor nearby lines.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .core import EmpiricalMeasure
from .errors import ConfigError, DimensionError
from .trees import TreeSystem

DISTANCE_SOFTMAX = "distance-softmax"
UNIFORM_SPLIT = "uniform"

MASS_SUM_TOL = 1e-10


@dataclass(frozen=True)
class SplittingConfig:
    """Parameters of the splitting map.

    ``distance-softmax`` mode computes softmax(delta * point-line distances);
    ``uniform`` ignores delta and assigns 1/k to every line (a useful control,
    and the only rigid-motion-invariant map that ignores the system).
    """

    delta: float = 1.0
    mode: str = DISTANCE_SOFTMAX

    def __post_init__(self):
        if self.mode not in (DISTANCE_SOFTMAX, UNIFORM_SPLIT):
            raise ConfigError(f"unknown splitting mode {self.mode!r}")
        if not np.isfinite(self.delta):
            raise ConfigError("delta must be finite")


@dataclass(frozen=True)
class ProjectedMeasure:
    """A measure pushed onto the k lines of one tree system.

    ``coords[l, i]`` is the coordinate of support i on line l; ``masses[l, i]``
    the (non-negative) mass it carries there. Atoms are never merged, even
    when coordinates coincide; column i always corresponds to support i.
    """

    coords: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.float64)
        masses = np.asarray(self.masses, dtype=np.float64)
        if coords.ndim != 2 or coords.shape != masses.shape:
            raise DimensionError("coords and masses must share shape (k, n)")
        if not np.all(np.isfinite(coords)):
            raise DimensionError("projected coordinates must be finite")
        if np.any(masses < 0):
            raise DimensionError("masses must be non-negative")
        coords = coords.copy()
        masses = masses.copy()
        coords.flags.writeable = False
        masses.flags.writeable = False
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "masses", masses)

    @property
    def k(self) -> int:
        return self.coords.shape[0]

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    def to_json(self) -> str:
        return json.dumps({"coords": self.coords.tolist(), "masses": self.masses.tolist()})


def _check_dim(d_point: int, t: TreeSystem) -> None:
    if d_point != t.dim:
        raise DimensionError(f"points in dimension {d_point}, tree in {t.dim}")


def line_coordinates(points: np.ndarray, t: TreeSystem) -> np.ndarray:
    """Per-line projection coordinates <y - source_l, dir_l>, shape (k, n)."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    _check_dim(points.shape[1], t)
    # (k, n): row l holds the coordinates of all points on line l
    return np.einsum("kd,nd->kn", t.directions, points) - np.einsum(
        "kd,kd->k", t.directions, t.roots
    )[:, None]


def point_line_distances(y: np.ndarray, t: TreeSystem) -> np.ndarray:
    """Euclidean distances from a point to each line of the system."""
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1:
        raise DimensionError("y must be a single point")
    return _distances_batch(y[None, :], t)[:, 0]


def _distances_batch(points: np.ndarray, t: TreeSystem) -> np.ndarray:
    """Distances of many points to each line, shape (k, n)."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    _check_dim(points.shape[1], t)
    diff = points[None, :, :] - t.roots[:, None, :]  # (k, n, d)
    sq = np.einsum("knd,knd->kn", diff, diff)
    along = np.einsum("knd,kd->kn", diff, t.directions)
    # roundoff can push the radicand slightly negative when the point sits on the line
    return np.sqrt(np.maximum(sq - along**2, 0.0))


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=0, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=0, keepdims=True)


def _weights_batch(points: np.ndarray, t: TreeSystem, cfg: SplittingConfig) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if cfg.mode == UNIFORM_SPLIT:
        return np.full((t.k, points.shape[0]), 1.0 / t.k)
    return _softmax(cfg.delta * _distances_batch(points, t))


def splitting_weights(y: np.ndarray, t: TreeSystem, cfg: SplittingConfig) -> np.ndarray:
    """Simplex vector over lines for one point (softmax of delta * distances)."""
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1:
        raise DimensionError("y must be a single point")
    return _weights_batch(y[None, :], t, cfg)[:, 0]


def project(m: EmpiricalMeasure, t: TreeSystem, cfg: SplittingConfig) -> ProjectedMeasure:
    """Push a measure onto a tree system.

    Support i lands on line l at coordinate <y_i - source_l, dir_l> with mass
    w_i * alpha(y_i)_l; the total mass of 1 is preserved exactly up to
    roundoff.
    """
    _check_dim(m.dim, t)
    coords = line_coordinates(m.supports, t)
    alphas = _weights_batch(m.supports, t, cfg)
    return ProjectedMeasure(coords, m.weights[None, :] * alphas)
