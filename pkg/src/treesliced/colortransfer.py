"""Palette-space color transfer by flowing source colors toward a target.

Pixels are quantized to a k-means palette; the palette colors then follow
the same Euler flow as the point-cloud experiments, between the two palette
measures weighted by pixel counts. RGB values live on the raw [0, 255]
scale throughout; during the final fraction of iterations every Euler step
is followed by rounding to integers and clamping, so the endpoint is a
valid 8-bit palette.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .core import SeedSpec, make_measure
from .errors import ConfigError, DimensionError, DivergenceError
from .estimators import DBTSW, EstimatorConfig, estimate
from .gradients import dbtsw_value_and_grad
from .projection import SplittingConfig
from .trees import DataCenteredRoot, TreeSamplerConfig, resolve_root
from .estimators import sample_systems


@dataclass(frozen=True)
class Palette:
    """A color palette with per-color pixel counts and the pixel assignment."""

    colors: np.ndarray  # (c, 3) floats in [0, 255]
    counts: np.ndarray  # (c,) pixel counts
    assignment: np.ndarray  # (N,) palette index per pixel

    def __post_init__(self):
        colors = np.asarray(self.colors, dtype=np.float64)
        counts = np.asarray(self.counts, dtype=np.int64)
        assignment = np.asarray(self.assignment, dtype=np.int64)
        if colors.ndim != 2 or colors.shape[1] != 3:
            raise DimensionError("palette colors must be (c, 3)")
        if counts.shape != (colors.shape[0],):
            raise DimensionError("counts must have one entry per color")
        if counts.sum() != assignment.shape[0]:
            raise DimensionError("counts must sum to the pixel total")
        object.__setattr__(self, "colors", colors)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "assignment", assignment)

    @property
    def c(self) -> int:
        return self.colors.shape[0]


def load_image(path) -> np.ndarray:
    """Read an image file as an (H, W, 3) uint8 RGB array."""
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def save_image(pixels: np.ndarray, path) -> None:
    pixels = np.asarray(pixels)
    if pixels.ndim != 3 or pixels.shape[2] != 3:
        raise DimensionError("image must be (H, W, 3)")
    Image.fromarray(pixels.astype(np.uint8), mode="RGB").save(path)


def kmeans_palette(pixels: np.ndarray, c: int, seed: SeedSpec, max_iter: int = 50) -> Palette:
    """Quantize pixels to ``c`` colors with seeded farthest-point k-means.

    Initialization picks a seeded random pixel and then repeatedly the pixel
    farthest from the chosen set; refinement stops at ``max_iter`` rounds or
    when no centroid moves more than 1e-3.
    """
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.ndim == 3:
        pixels = pixels.reshape(-1, pixels.shape[2])
    if pixels.ndim != 2 or pixels.shape[1] != 3:
        raise DimensionError("pixels must be (N, 3) or (H, W, 3)")
    n = pixels.shape[0]
    if not 1 <= c <= n:
        raise ConfigError(f"cluster count {c} must be in [1, {n}]")
    rng = seed.generator()

    centroids = np.empty((c, 3))
    centroids[0] = pixels[rng.integers(0, n)]
    best = np.einsum("nd,nd->n", pixels - centroids[0], pixels - centroids[0])
    for j in range(1, c):
        centroids[j] = pixels[int(np.argmax(best))]
        d = np.einsum("nd,nd->n", pixels - centroids[j], pixels - centroids[j])
        best = np.minimum(best, d)

    assignment = np.zeros(n, dtype=np.int64)
    for _ in range(max_iter):
        d2 = (
            np.einsum("nd,nd->n", pixels, pixels)[:, None]
            - 2.0 * pixels @ centroids.T
            + np.einsum("cd,cd->c", centroids, centroids)[None, :]
        )
        assignment = np.argmin(d2, axis=1)
        moved = 0.0
        for j in range(c):
            members = pixels[assignment == j]
            if len(members) == 0:
                # revive an empty cluster at the worst-served pixel
                far = int(np.argmax(np.min(d2, axis=1)))
                new = pixels[far]
            else:
                new = members.mean(axis=0)
            moved = max(moved, float(np.max(np.abs(new - centroids[j]))))
            centroids[j] = new
        if moved < 1e-3:
            break
    d2 = (
        np.einsum("nd,nd->n", pixels, pixels)[:, None]
        - 2.0 * pixels @ centroids.T
        + np.einsum("cd,cd->c", centroids, centroids)[None, :]
    )
    assignment = np.argmin(d2, axis=1)
    counts = np.bincount(assignment, minlength=c)
    return Palette(np.clip(centroids, 0.0, 255.0), counts, assignment)


@dataclass(frozen=True)
class TransferConfig:
    """Euler-flow settings for moving a source palette toward a target one."""

    step_size: float = 17.0
    iterations: int = 2000
    L: int = 33
    k: int = 3
    delta: float = 10.0
    rounding_fraction: float = 0.1
    root_stddev_fraction: float = 0.25
    seed: SeedSpec = field(default_factory=lambda: SeedSpec(0))

    def __post_init__(self):
        if self.step_size < 0:
            raise ConfigError("step size must be non-negative")
        if self.iterations < 0:
            raise ConfigError("iterations must be >= 0")
        if not 0.0 <= self.rounding_fraction <= 1.0:
            raise ConfigError("rounding_fraction must be in [0, 1]")
        if self.L < 1 or self.k < 1:
            raise ConfigError("L and k must be >= 1")


def palette_measure(p: Palette):
    return make_measure(p.colors, p.counts.astype(np.float64))


def transfer_estimator_config(
    source: Palette, target: Palette, cfg: TransferConfig, seed: SeedSpec
) -> EstimatorConfig:
    """Estimator used for transfer progress: trees rooted near the palettes."""
    combined = np.concatenate([source.colors, target.colors])
    stddev = max(float(combined.std(axis=0).mean()) * cfg.root_stddev_fraction, 1.0)
    sampler = resolve_root(
        TreeSamplerConfig(k=cfg.k, root=DataCenteredRoot(stddev)), combined.mean(axis=0)
    )
    return EstimatorConfig(
        DBTSW, L=cfg.L, sampler=sampler, splitting=SplittingConfig(delta=cfg.delta), seed=seed
    )


def transfer_curve(source: Palette, target: Palette, cfg: TransferConfig):
    """Flow the source palette toward the target palette.

    Returns the endpoint palette (integer colors in [0, 255]) and the
    per-iteration estimate history. Palette weights are pixel-count
    proportional; gradients are converted to per-color velocities by
    dividing out the weights, as in the point-cloud flow.
    """
    base = transfer_estimator_config(source, target, cfg, cfg.seed)
    target_measure = palette_measure(target)
    weights = source.counts.astype(np.float64)
    weights = weights / weights.sum()
    Z = source.colors.copy()
    history = np.zeros(cfg.iterations)
    rounding_from = cfg.iterations - int(round(cfg.rounding_fraction * cfg.iterations))
    initial = estimate(palette_measure(source), target_measure, base).value
    ceiling = 10.0 * max(initial, 1.0)
    for it in range(cfg.iterations):
        step_cfg = dataclasses.replace(base, seed=cfg.seed.child(3, it))
        trees = sample_systems(step_cfg, 3)
        rep = dbtsw_value_and_grad(Z, weights, target_measure, trees, step_cfg.splitting)
        history[it] = rep.value
        if not rep.value <= ceiling:
            raise DivergenceError(
                f"transfer diverged: estimate {rep.value:.3g} exceeds 10x initial {initial:.3g}"
            )
        # Euler with a linearly annealed step: the stated step size at the
        # start, shrinking to zero so the endpoint settles instead of
        # jittering at the step scale around the optimum
        step = cfg.step_size * (1.0 - it / cfg.iterations)
        Z = Z - step * (rep.gradient / weights[:, None])
        if it >= rounding_from:
            Z = np.clip(np.rint(Z), 0.0, 255.0)
    Z = np.clip(np.rint(Z), 0.0, 255.0)
    return Palette(Z, source.counts, source.assignment), history


def recolor(image: np.ndarray, palette: Palette) -> np.ndarray:
    """Replace each pixel with its cluster's (transported) palette color."""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise DimensionError("image must be (H, W, 3)")
    n = image.shape[0] * image.shape[1]
    if palette.assignment.shape[0] != n:
        raise DimensionError(
            f"palette assignment covers {palette.assignment.shape[0]} pixels, image has {n}"
        )
    if palette.assignment.min() < 0 or palette.assignment.max() >= palette.c:
        raise IndexError("palette assignment index out of range")
    flat = np.clip(np.rint(palette.colors), 0, 255).astype(np.uint8)[palette.assignment]
    return flat.reshape(image.shape)
