"""Foundational types: weighted point clouds, rigid transforms, seeded RNG streams.

Every random draw in the library flows through a :class:`SeedSpec`, so two runs
with the same spec produce bit-identical results regardless of evaluation order.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InvalidMeasure

WEIGHT_SUM_TOL = 1e-12
ORTHO_TOL = 1e-10

_U64 = 0xFFFFFFFFFFFFFFFF


@dataclass(frozen=True)
class SeedSpec:
    """A (master seed, stream index) pair naming one reproducible RNG stream.

    Child streams are derived by hashing the stream index together with a
    path of integers/strings, so parallel tasks can each own an independent
    stream that is a pure function of the parent spec.
    """

    master: int
    stream: int = 0

    def child(self, *path: int | str) -> "SeedSpec":
        h = hashlib.blake2b(digest_size=8)
        h.update(repr((self.stream & _U64,) + tuple(path)).encode())
        return SeedSpec(self.master, int.from_bytes(h.digest(), "little"))

    def sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence([self.master & _U64, self.stream & _U64])

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(self.sequence())


def _as_float_matrix(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidMeasure(f"{name} must be a 2-d array, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class EmpiricalMeasure:
    """A probability measure supported on finitely many weighted points.

    ``supports`` is an (n, d) coordinate matrix; ``weights`` is a length-n
    non-negative vector summing to 1 (within ``WEIGHT_SUM_TOL``).
    Instances are immutable; use :func:`make_measure` to construct one from
    raw, possibly unnormalized data.
    """

    supports: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        supports = _as_float_matrix(self.supports, "supports")
        weights = np.asarray(self.weights, dtype=np.float64)
        if supports.shape[0] < 1:
            raise InvalidMeasure("measure needs at least one support point")
        if not np.all(np.isfinite(supports)):
            raise InvalidMeasure("supports contain non-finite coordinates")
        if weights.shape != (supports.shape[0],):
            raise InvalidMeasure(
                f"weights shape {weights.shape} does not match {supports.shape[0]} supports"
            )
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise InvalidMeasure("weights must be finite and non-negative")
        if abs(float(weights.sum()) - 1.0) > WEIGHT_SUM_TOL:
            raise InvalidMeasure(f"weights sum to {weights.sum()!r}, expected 1")
        supports = supports.copy()
        weights = weights.copy()
        supports.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "supports", supports)
        object.__setattr__(self, "weights", weights)

    @property
    def n(self) -> int:
        return self.supports.shape[0]

    @property
    def dim(self) -> int:
        return self.supports.shape[1]


def make_measure(supports, weights=None) -> EmpiricalMeasure:
    """Build an :class:`EmpiricalMeasure`, normalizing weights by their sum.

    Omitted weights default to uniform 1/n. Raises :class:`InvalidMeasure`
    for empty input, non-finite entries, negative weights, or an all-zero
    weight vector.
    """
    supports = _as_float_matrix(supports, "supports")
    if supports.shape[0] < 1:
        raise InvalidMeasure("measure needs at least one support point")
    if not np.all(np.isfinite(supports)):
        raise InvalidMeasure("supports contain non-finite coordinates")
    n = supports.shape[0]
    if weights is None:
        w = np.full(n, 1.0 / n)
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (n,):
            raise InvalidMeasure(f"expected {n} weights, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise InvalidMeasure("weights contain non-finite values")
        if np.any(w < 0):
            raise InvalidMeasure("weights must be non-negative")
        total = float(w.sum())
        if total <= 0:
            raise InvalidMeasure("weights sum to zero")
        # leave already-normalized weights untouched so the op is idempotent
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            w = w / total
    return EmpiricalMeasure(supports, w)


@dataclass(frozen=True)
class EuclideanTransform:
    """A rigid motion y -> Q @ y + a with Q orthogonal (reflections allowed)."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.rotation, dtype=np.float64)
        a = np.asarray(self.translation, dtype=np.float64)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise DimensionError(f"rotation must be square, got shape {q.shape}")
        d = q.shape[0]
        if a.shape != (d,):
            raise DimensionError(f"translation shape {a.shape} does not match d={d}")
        if not np.allclose(q.T @ q, np.eye(d), atol=ORTHO_TOL, rtol=0.0):
            raise InvalidMeasure("rotation matrix is not orthogonal within tolerance")
        q = q.copy()
        a = a.copy()
        q.flags.writeable = False
        a.flags.writeable = False
        object.__setattr__(self, "rotation", q)
        object.__setattr__(self, "translation", a)

    @property
    def dim(self) -> int:
        return self.rotation.shape[0]

    def apply_points(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        if points.shape[-1] != self.dim:
            raise DimensionError(
                f"points in dimension {points.shape[-1]}, transform in {self.dim}"
            )
        return points @ self.rotation.T + self.translation

    def inverse(self) -> "EuclideanTransform":
        qt = self.rotation.T
        return EuclideanTransform(qt, -qt @ self.translation)


def random_euclidean_transform(d: int, seed: SeedSpec) -> EuclideanTransform:
    """Draw Q from the orthogonal group and a uniform translation in [-5, 5]^d.

    Q is obtained by orthogonalizing a standard-normal d x d sample (QR with
    the sign of diag(R) fixed), which covers both rotation components of O(d).
    """
    if d < 1:
        raise DimensionError(f"dimension must be >= 1, got {d}")
    rng = seed.generator()
    gauss = rng.standard_normal((d, d))
    q, r = np.linalg.qr(gauss)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    q = q * signs
    a = rng.uniform(-5.0, 5.0, size=d)
    return EuclideanTransform(q, a)


def apply_transform(g: EuclideanTransform, m: EmpiricalMeasure) -> EmpiricalMeasure:
    """Pushforward of a discrete measure: map supports, keep weights."""
    if m.dim != g.dim:
        raise DimensionError(f"measure in dimension {m.dim}, transform in {g.dim}")
    return EmpiricalMeasure(g.apply_points(m.supports), m.weights)


def save_measure_csv(m: EmpiricalMeasure, path) -> None:
    """Write a measure as CSV: header x_1..x_d,weight; one row per support."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x_{i + 1}" for i in range(m.dim)] + ["weight"])
        for row, w in zip(m.supports, m.weights):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(w))])


def load_measure_csv(path) -> EmpiricalMeasure:
    """Read a measure from CSV (columns x_1..x_d plus optional final weight)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InvalidMeasure(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        has_weight = bool(header) and header[-1] == "weight"
        coord_names = header[:-1] if has_weight else header
        expected = [f"x_{i + 1}" for i in range(len(coord_names))]
        if not coord_names or coord_names != expected:
            raise InvalidMeasure(
                f"{path}: header must be x_1..x_d with optional trailing 'weight', got {header}"
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise InvalidMeasure(f"{path}:{lineno}: expected {len(header)} fields")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise InvalidMeasure(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise InvalidMeasure(f"{path}: no data rows")
    data = np.asarray(rows, dtype=np.float64)
    if has_weight:
        return make_measure(data[:, :-1], data[:, -1])
    return make_measure(data)
