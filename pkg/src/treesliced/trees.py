"""Tree systems of lines and their samplers.

A tree system is a set of k lines glued into a tree: either k concurrent
lines sharing one root point, or a chain where line i is attached to line
i-1 at a sampled coordinate. Directions are drawn uniformly on the sphere
(normalized Gaussians); the orthogonal variant runs Gram-Schmidt over the
draws in order, keeping the first direction fixed.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np

from .core import SeedSpec
from .errors import ConfigError, DegenerateDirections, DimensionError, StructureError

UNIT_TOL = 1e-12
CHAIN_TOL = 1e-10
_GS_RESIDUAL_TOL = 1e-8

CONCURRENT = "concurrent"
CHAIN = "chain"


@dataclass(frozen=True)
class UniformCube:
    """Root drawn uniformly from [-half_width, half_width]^d."""

    half_width: float = 1.0

    def __post_init__(self):
        if not self.half_width > 0:
            raise ConfigError("half_width must be positive")

    def sample(self, rng: np.random.Generator, d: int) -> np.ndarray:
        return rng.uniform(-self.half_width, self.half_width, size=d)


@dataclass(frozen=True)
class GaussianRoot:
    """Root drawn from an isotropic Gaussian around ``mean``."""

    mean: np.ndarray
    stddev: float = 1.0

    def __post_init__(self):
        if not self.stddev > 0:
            raise ConfigError("stddev must be positive")
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=np.float64))

    def sample(self, rng: np.random.Generator, d: int) -> np.ndarray:
        if self.mean.shape != (d,):
            raise DimensionError(f"root mean has shape {self.mean.shape}, expected ({d},)")
        return self.mean + self.stddev * rng.standard_normal(d)


@dataclass(frozen=True)
class FixedRoot:
    """Root pinned at one point (useful for tests)."""

    point: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", np.asarray(self.point, dtype=np.float64))

    def sample(self, rng: np.random.Generator, d: int) -> np.ndarray:
        if self.point.shape != (d,):
            raise DimensionError(f"root point has shape {self.point.shape}, expected ({d},)")
        return self.point.copy()


@dataclass(frozen=True)
class DataCenteredRoot:
    """Placeholder resolved by data-owning drivers (flows, color transfer).

    Those drivers replace it with a :class:`GaussianRoot` centered on the
    target's empirical mean; sampling trees near the data keeps the
    distance-based splitting away from its saturated regime. Sampling an
    unresolved placeholder is an error.
    """

    stddev: float = 1.0

    def __post_init__(self):
        if not self.stddev > 0:
            raise ConfigError("stddev must be positive")

    def sample(self, rng: np.random.Generator, d: int) -> np.ndarray:
        raise ConfigError(
            "DataCenteredRoot must be resolved against a dataset before sampling"
        )


RootDistribution = UniformCube | GaussianRoot | FixedRoot | DataCenteredRoot


def resolve_root(cfg: TreeSamplerConfig, data_mean: np.ndarray) -> TreeSamplerConfig:
    """Swap a :class:`DataCenteredRoot` placeholder for a concrete Gaussian."""
    if isinstance(cfg.root, DataCenteredRoot):
        return dataclasses.replace(
            cfg, root=GaussianRoot(np.asarray(data_mean, dtype=np.float64), cfg.root.stddev)
        )
    return cfg


@dataclass(frozen=True)
class TreeSamplerConfig:
    """How to sample one tree system.

    ``structure`` is "concurrent" or "chain"; chains attach each line to its
    predecessor at a coordinate drawn uniformly from
    [-step_half_width, step_half_width]. ``orthogonalize`` requires k <= d.
    """

    k: int
    root: RootDistribution = field(default_factory=UniformCube)
    orthogonalize: bool = False
    structure: str = CONCURRENT
    step_half_width: float = 1.0

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.structure not in (CONCURRENT, CHAIN):
            raise ConfigError(f"unknown structure {self.structure!r}")
        if not self.step_half_width > 0:
            raise ConfigError("step_half_width must be positive")
        if self.orthogonalize and self.structure == CHAIN:
            raise ConfigError("orthogonalize applies to concurrent systems only")


@dataclass(frozen=True)
class TreeSystem:
    """k lines with tree structure.

    ``roots`` holds one source point per line ((k, d); all rows equal for
    concurrent systems). ``directions`` holds unit direction vectors (k, d).
    For chains, ``attachments[i-1]`` is the coordinate of line i's source on
    line i-1, measured from the parent's source.
    """

    roots: np.ndarray
    directions: np.ndarray
    kind: str = CONCURRENT
    attachments: np.ndarray | None = None

    def __post_init__(self):
        roots = np.asarray(self.roots, dtype=np.float64)
        dirs = np.asarray(self.directions, dtype=np.float64)
        if roots.ndim != 2 or dirs.ndim != 2 or roots.shape != dirs.shape:
            raise DimensionError(
                f"roots {roots.shape} and directions {dirs.shape} must both be (k, d)"
            )
        norms = np.linalg.norm(dirs, axis=1)
        if np.any(np.abs(norms - 1.0) > UNIT_TOL):
            raise StructureError("direction rows must be unit-norm")
        if self.kind == CONCURRENT:
            if self.attachments is not None:
                raise StructureError("concurrent systems carry no attachments")
            if np.any(roots != roots[0]):
                raise StructureError("concurrent system requires identical root rows")
            att = None
        elif self.kind == CHAIN:
            att = np.asarray(
                self.attachments if self.attachments is not None else np.zeros(0),
                dtype=np.float64,
            )
            if att.shape != (roots.shape[0] - 1,):
                raise StructureError(
                    f"chain with {roots.shape[0]} lines needs {roots.shape[0] - 1} attachments"
                )
            if att.size and not np.all(np.isfinite(att)):
                raise StructureError("attachment coordinates must be finite")
            # connectivity: source_i = source_{i-1} + t_i * dir_{i-1}
            for i in range(1, roots.shape[0]):
                implied = roots[i - 1] + att[i - 1] * dirs[i - 1]
                if np.max(np.abs(roots[i] - implied)) > CHAIN_TOL:
                    raise StructureError(f"line {i} source does not lie on its parent line")
        else:
            raise StructureError(f"unknown tree kind {self.kind!r}")
        roots = roots.copy()
        dirs = dirs.copy()
        roots.flags.writeable = False
        dirs.flags.writeable = False
        object.__setattr__(self, "roots", roots)
        object.__setattr__(self, "directions", dirs)
        if att is not None:
            att = att.copy()
            att.flags.writeable = False
        object.__setattr__(self, "attachments", att)

    @property
    def k(self) -> int:
        return self.directions.shape[0]

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    def to_json(self) -> str:
        payload = {
            "kind": self.kind,
            "roots": self.roots.tolist(),
            "directions": self.directions.tolist(),
        }
        if self.attachments is not None:
            payload["attachments"] = self.attachments.tolist()
        return json.dumps(payload)

    @staticmethod
    def from_json(text: str) -> "TreeSystem":
        payload = json.loads(text)
        return TreeSystem(
            roots=np.asarray(payload["roots"], dtype=np.float64),
            directions=np.asarray(payload["directions"], dtype=np.float64),
            kind=payload["kind"],
            attachments=(
                np.asarray(payload["attachments"], dtype=np.float64)
                if "attachments" in payload
                else None
            ),
        )


def _unit_sphere(rng: np.random.Generator, k: int, d: int) -> np.ndarray:
    while True:
        v = rng.standard_normal((k, d))
        norms = np.linalg.norm(v, axis=1)
        if np.all(norms > 1e-12):
            return v / norms[:, None]


def orthogonalize_directions(dirs: np.ndarray) -> np.ndarray:
    """Gram-Schmidt in row order; row 0 is returned unchanged.

    Raises :class:`DegenerateDirections` when a residual norm falls below
    1e-8, signalling the caller to redraw rather than normalize noise.
    """
    dirs = np.asarray(dirs, dtype=np.float64)
    k, d = dirs.shape
    if k > d:
        raise ConfigError(f"cannot orthogonalize {k} directions in dimension {d}")
    out = dirs.copy()
    for i in range(1, k):
        v = out[i] - out[:i].T @ (out[:i] @ out[i])
        norm = np.linalg.norm(v)
        if norm < _GS_RESIDUAL_TOL:
            raise DegenerateDirections(f"direction {i} is numerically dependent on earlier rows")
        out[i] = v / norm
    return out


def _draw_directions(rng: np.random.Generator, k: int, d: int, orthogonalize: bool) -> np.ndarray:
    if not orthogonalize:
        return _unit_sphere(rng, k, d)
    for _ in range(64):
        try:
            return orthogonalize_directions(_unit_sphere(rng, k, d))
        except DegenerateDirections:
            continue
    raise DegenerateDirections("could not draw an independent direction set")


def sample_concurrent(
    cfg: TreeSamplerConfig, d: int, count: int, seed: SeedSpec
) -> list[TreeSystem]:
    """Sample ``count`` concurrent tree systems, one derived seed per system."""
    if cfg.structure != CONCURRENT:
        raise ConfigError("sampler config is not concurrent")
    if cfg.orthogonalize and cfg.k > d:
        raise ConfigError(f"orthogonalize needs k <= d, got k={cfg.k}, d={d}")
    if count < 1:
        raise ConfigError("count must be >= 1")
    systems = []
    for i in range(count):
        root_rng = seed.child(i, 0).generator()
        dirs_rng = seed.child(i, 1).generator()
        root = cfg.root.sample(root_rng, d)
        dirs = _draw_directions(dirs_rng, cfg.k, d, cfg.orthogonalize)
        systems.append(TreeSystem(np.tile(root, (cfg.k, 1)), dirs, kind=CONCURRENT))
    return systems


def sample_chain(cfg: TreeSamplerConfig, d: int, count: int, seed: SeedSpec) -> list[TreeSystem]:
    """Sample chain systems: source_i = source_{i-1} + t_i * dir_{i-1}."""
    if count < 1:
        raise ConfigError("count must be >= 1")
    systems = []
    for i in range(count):
        root_rng = seed.child(i, 0).generator()
        dirs_rng = seed.child(i, 1).generator()
        step_rng = seed.child(i, 2).generator()
        dirs = _unit_sphere(dirs_rng, cfg.k, d)
        roots = np.empty((cfg.k, d))
        roots[0] = cfg.root.sample(root_rng, d)
        steps = step_rng.uniform(-cfg.step_half_width, cfg.step_half_width, size=max(cfg.k - 1, 0))
        for j in range(1, cfg.k):
            roots[j] = roots[j - 1] + steps[j - 1] * dirs[j - 1]
        systems.append(TreeSystem(roots, dirs, kind=CHAIN, attachments=steps))
    return systems


def transform_tree(g, t: TreeSystem) -> TreeSystem:
    """Apply a rigid motion to every line: sources map affinely, directions rotate.

    Attachment coordinates are preserved (along-line parameters are isometry
    invariants).
    """
    if g.dim != t.dim:
        raise DimensionError(f"tree in dimension {t.dim}, transform in {g.dim}")
    roots = g.apply_points(t.roots)
    # orthogonal multiplication keeps unit norms within validator tolerance,
    # and skipping renormalization keeps the identity transform a strict no-op
    dirs = t.directions @ g.rotation.T
    return TreeSystem(roots, dirs, kind=t.kind, attachments=t.attachments)
