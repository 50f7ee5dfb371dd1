"""Synthetic benchmark data.

All three generators share one recipe: the first ``p1`` features follow a
Gaussian mixture whose component index is the cluster label, the remaining
``p2`` features follow an independent mixture that carries no information
about the label.  They differ only in how component centers are placed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset

_NAMES = ("basic", "signflip", "sphere")

# Sphere center draws closer than this are considered degenerate and redrawn.
_MIN_CENTER_GAP = 1e-6


@dataclass(frozen=True)
class SimSetting:
    """Parameters of one synthetic scenario.

    ``basic`` and ``signflip`` require ``n_clusters == p1`` and a spike
    height ``c`` (zero is allowed and yields pure noise); ``sphere`` places
    centers on a radius-``r`` sphere and lets ``n_clusters`` float free of
    ``p1``.  ``balanced`` forces cluster sizes to be as equal as possible
    instead of multinomial.
    """

    name: str
    p1: int
    p2: int
    n: int
    n_clusters: int
    seed: int
    c: float | None = None
    r: float | None = None
    balanced: bool = False

    def __post_init__(self) -> None:
        if self.name not in _NAMES:
            raise ValueError(f"unknown generator name {self.name!r}")
        if self.p1 < 1 or self.p2 < 1:
            raise ValueError("feature block sizes must be positive")
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.name == "sphere":
            if self.n_clusters < 2 or self.p1 < 2:
                raise ValueError("sphere setting needs n_clusters >= 2 and p1 >= 2")
            if self.r is None or self.r <= 0:
                raise ValueError("sphere setting needs a positive radius r")
            if self.c is not None:
                raise ValueError("sphere setting is scaled by r, not c")
        else:
            if self.n_clusters != self.p1:
                raise ValueError("basic/signflip settings need n_clusters == p1")
            if self.c is None or self.c < 0:
                raise ValueError("basic/signflip settings need c >= 0")
            if self.r is not None:
                raise ValueError("basic/signflip settings are scaled by c, not r")


def _labels(rng: np.random.Generator, n: int, k: int, balanced: bool) -> np.ndarray:
    if balanced:
        return rng.permutation(np.arange(n) % k + 1)
    return rng.integers(1, k + 1, size=n)


def _spike_block(
    rng: np.random.Generator, n: int, width: int, height: float, signflip: bool
) -> np.ndarray:
    """Center block with one nonzero coordinate per row at a random position."""
    pos = rng.integers(0, width, size=n)
    amp = np.full(n, float(height))
    if signflip:
        amp *= rng.choice((-1.0, 1.0), size=n)
    block = np.zeros((n, width))
    block[np.arange(n), pos] = amp
    return block


def _feature_names(p: int) -> tuple[str, ...]:
    return tuple(f"x{j + 1}" for j in range(p))


def _assemble(setting: SimSetting, rng: np.random.Generator, centers: np.ndarray,
              labels: np.ndarray) -> Dataset:
    points = centers + rng.standard_normal(centers.shape)
    return Dataset(
        points=points,
        labels=labels,
        feature_names=_feature_names(setting.p1 + setting.p2),
    )


def gen_basic(setting: SimSetting) -> Dataset:
    """Axis-aligned spikes: cluster k sits at height c on relevant feature k."""
    rng = np.random.default_rng(setting.seed)
    labels = _labels(rng, setting.n, setting.n_clusters, setting.balanced)
    relevant = np.zeros((setting.n, setting.p1))
    relevant[np.arange(setting.n), labels - 1] = setting.c
    noise_block = _spike_block(rng, setting.n, setting.p2, setting.c, signflip=False)
    return _assemble(setting, rng, np.hstack([relevant, noise_block]), labels)


def gen_signflip(setting: SimSetting) -> Dataset:
    """As basic, but irrelevant spikes point up or down with equal chance."""
    rng = np.random.default_rng(setting.seed)
    labels = _labels(rng, setting.n, setting.n_clusters, setting.balanced)
    relevant = np.zeros((setting.n, setting.p1))
    relevant[np.arange(setting.n), labels - 1] = setting.c
    noise_block = _spike_block(rng, setting.n, setting.p2, setting.c, signflip=True)
    return _assemble(setting, rng, np.hstack([relevant, noise_block]), labels)


def _sphere_centers(rng: np.random.Generator, k: int, p1: int, r: float) -> np.ndarray:
    """Draw k centers uniformly on the radius-r sphere, redrawing degenerate sets."""
    while True:
        raw = rng.standard_normal((k, p1))
        norms = np.linalg.norm(raw, axis=1)
        if np.any(norms < 1e-12):
            continue
        centers = raw * (r / norms)[:, None]
        gaps = np.linalg.norm(centers[:, None, :] - centers[None, :, :], axis=2)
        if np.all(gaps[np.triu_indices(k, 1)] >= _MIN_CENTER_GAP):
            return centers


def gen_sphere(setting: SimSetting) -> Dataset:
    """Cluster centers drawn uniformly on a sphere in the relevant subspace."""
    rng = np.random.default_rng(setting.seed)
    centers = _sphere_centers(rng, setting.n_clusters, setting.p1, setting.r)
    labels = _labels(rng, setting.n, setting.n_clusters, setting.balanced)
    relevant = centers[labels - 1]
    noise_block = _spike_block(rng, setting.n, setting.p2, setting.r, signflip=True)
    return _assemble(setting, rng, np.hstack([relevant, noise_block]), labels)


GENERATORS = {"basic": gen_basic, "signflip": gen_signflip, "sphere": gen_sphere}
