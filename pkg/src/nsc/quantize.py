"""Color quantization: k-means palette extraction with a pluggable distance.

The distance between a pixel and a candidate palette color is either exact
Euclidean RGB distance or a covering-architecture surrogate of the 6-input
distance kernel (pixel RGB + centroid RGB, zero-padded to the network
width).  Pixels are scaled to [0, 1] for the clustering math and rescaled
on output.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .imaging import image_mse, image_ssim  # re-exported as part of this module's API
from .rng import Rng
from .surrogate import MlpSurrogate, PaddingMode, interpret, pad_batch

__all__ = [
    "ExactDistance",
    "KMeansConfig",
    "SurrogateDistance",
    "image_mse",
    "image_ssim",
    "kmeans_palette",
    "quantize_image",
    "remap",
]


class ExactDistance:
    """Euclidean distance between pixel rows and each centroid."""

    name = "exact"

    def __call__(self, pixels: np.ndarray, centroids: np.ndarray) -> np.ndarray:
        diff = pixels[:, None, :] - centroids[None, :, :]
        return np.sqrt(np.sum(diff * diff, axis=-1))


class SurrogateDistance:
    """Distance predicted by a covering-architecture network.

    Inputs are the six scalars (pixel RGB, centroid RGB) zero-padded to the
    network's input width, matching how such surrogates are finetuned.
    """

    name = "surrogate"

    def __init__(self, params_or_net):
        self.net = (params_or_net if isinstance(params_or_net, MlpSurrogate)
                    else interpret(params_or_net))

    def __call__(self, pixels: np.ndarray, centroids: np.ndarray) -> np.ndarray:
        n, k = pixels.shape[0], centroids.shape[0]
        pairs = np.concatenate(
            [np.repeat(pixels, k, axis=0), np.tile(centroids, (n, 1))], axis=1)
        x = pad_batch(pairs, PaddingMode.ZERO, width=self.net.arity)
        return self.net(x)[:, 0].reshape(n, k)


@dataclass
class KMeansConfig:
    k: int
    max_iters: int = 40
    centroid_tolerance: float = 1e-5
    distance: object = field(default_factory=ExactDistance)
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("palette size must be >= 1")


def kmeans_palette(img: np.ndarray, cfg: KMeansConfig) -> np.ndarray:
    """Lloyd iterations over the image's RGB vectors; returns (k, 3) floats
    in [0, 1].

    Assignment uses the configured distance; the update step is always the
    arithmetic mean of assigned pixels.  Stops after max_iters or when the
    summed Euclidean movement of the centroids drops below the tolerance.
    Empty clusters are re-seeded from a random pixel.
    """
    pixels = _to_unit_pixels(img)
    distinct = np.unique(pixels, axis=0)
    k = cfg.k
    if k > distinct.shape[0]:
        warnings.warn(f"palette size {k} exceeds {distinct.shape[0]} distinct colors; reducing")
        k = distinct.shape[0]
    rng = Rng(cfg.seed).child("kmeans")
    centroids = distinct[rng.child("init").choice(distinct.shape[0], size=k, replace=False)]

    exact = ExactDistance()
    check_monotone = isinstance(cfg.distance, ExactDistance)
    prev_objective = math.inf
    for iteration in range(cfg.max_iters):
        assign = np.argmin(cfg.distance(pixels, centroids), axis=1)
        if check_monotone:
            objective = float(np.sum(np.min(exact(pixels, centroids) ** 2, axis=1)))
            assert objective <= prev_objective + 1e-12, \
                f"within-cluster objective increased at iteration {iteration}"
            prev_objective = objective
        new_centroids = centroids.copy()
        reseeded = False
        for j in range(k):
            members = pixels[assign == j]
            if members.shape[0]:
                new_centroids[j] = members.mean(axis=0)
            else:
                pick = int(rng.child("reseed", iteration, j).integers(0, pixels.shape[0]))
                new_centroids[j] = pixels[pick]
                reseeded = True
        movement = float(np.sum(np.sqrt(np.sum((new_centroids - centroids) ** 2, axis=1))))
        centroids = new_centroids
        if reseeded:
            prev_objective = math.inf  # a reseed may legitimately raise the objective
        if movement < cfg.centroid_tolerance:
            break
    return centroids


def remap(img: np.ndarray, centroids: np.ndarray, distance=None) -> np.ndarray:
    """Replace each pixel with its nearest palette color (ties: lowest index)."""
    if centroids.shape[0] < 1:
        raise ValueError("empty palette")
    distance = distance or ExactDistance()
    pixels = _to_unit_pixels(img)
    assign = np.argmin(distance(pixels, centroids), axis=1)
    palette_u8 = np.clip(np.round(centroids * 255.0), 0, 255).astype(np.uint8)
    return palette_u8[assign].reshape(img.shape)


def quantize_image(img: np.ndarray, cfg: KMeansConfig) -> tuple[np.ndarray, np.ndarray]:
    """Palette extraction followed by remapping; returns (image, centroids)."""
    centroids = kmeans_palette(img, cfg)
    return remap(img, centroids, cfg.distance), centroids


def _to_unit_pixels(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected (h, w, 3) image, got {img.shape}")
    if img.size == 0:
        raise ValueError("empty image")
    return img.reshape(-1, 3).astype(np.float64) / 255.0
