"""Image primitives: binary PPM I/O, a procedural test image, MSE, and SSIM.

Images are uint8 RGB arrays of shape (height, width, 3).  The bundled test
content is generated procedurally so the package ships no binary assets.
"""

from __future__ import annotations

import math

import numpy as np

BT601 = (0.299, 0.587, 0.114)

SSIM_WINDOW = 7
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_L = 255.0


def read_ppm(path) -> np.ndarray:
    """Read a binary (P6) PPM image."""
    with open(path, "rb") as fh:
        data = fh.read()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    if fields[0] != b"P6":
        raise ValueError(f"not a binary PPM file: magic {fields[0]!r}")
    width, height, maxval = (int(f) for f in fields[1:4])
    if maxval != 255:
        raise ValueError(f"unsupported maxval {maxval}")
    pos += 1  # single whitespace after maxval
    pixels = np.frombuffer(data, dtype=np.uint8, count=width * height * 3, offset=pos)
    return pixels.reshape(height, width, 3).copy()


def write_ppm(img: np.ndarray, path) -> None:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ValueError("expected uint8 RGB image of shape (h, w, 3)")
    h, w, _ = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(img.tobytes())


def synthetic_image(width: int = 64, height: int = 64, variant: int = 0) -> np.ndarray:
    """Deterministic RGB test image with gradients, edges, and color regions."""
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    u, v = xx / max(width - 1, 1), yy / max(height - 1, 1)
    phase = 0.7 * variant
    r = 0.5 + 0.5 * np.sin(2 * math.pi * (2 * u + phase))
    g = 0.5 + 0.5 * np.cos(2 * math.pi * (1.5 * v - phase))
    b = 0.5 + 0.5 * np.sin(2 * math.pi * (u + v + 0.25 + phase))
    cx, cy = 0.5 + 0.2 * math.cos(phase), 0.5 + 0.2 * math.sin(phase)
    disc = ((u - cx) ** 2 + (v - cy) ** 2) < 0.04
    r = np.where(disc, 0.9, r)
    g = np.where(disc, 0.2, g)
    b = np.where(disc, 0.1, b)
    stripes = ((xx.astype(int) // 8) % 2 == 0) & (yy > height * 0.75)
    g = np.where(stripes, 0.85, g)
    img = np.stack([r, g, b], axis=-1)
    return np.clip(np.round(img * 255.0), 0, 255).astype(np.uint8)


def to_gray(img: np.ndarray) -> np.ndarray:
    """Luma (ITU BT.601 weights) as float64 in 0..255."""
    rgb = np.asarray(img, dtype=np.float64)
    return BT601[0] * rgb[..., 0] + BT601[1] * rgb[..., 1] + BT601[2] * rgb[..., 2]


def image_mse(a: np.ndarray, b: np.ndarray) -> float:
    """Mean over all channel values of squared difference, in 0-255 units."""
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    d = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return float(np.mean(d * d))


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g1 = np.exp(-(coords ** 2) / (2.0 * sigma ** 2))
    k = np.outer(g1, g1)
    return k / k.sum()


def _windowed_sums(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Valid-mode 2-d correlation via stride tricks (images here are small)."""
    size = kernel.shape[0]
    windows = np.lib.stride_tricks.sliding_window_view(x, (size, size))
    return np.einsum("ijkl,kl->ij", windows, kernel)


def image_ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Structural similarity on the luma channel.

    Gaussian 7x7 window (sigma 1.5), K1=0.01, K2=0.03, L=255, averaged over
    all valid window positions.
    """
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    x, y = to_gray(a), to_gray(b)
    if min(x.shape) < SSIM_WINDOW:
        raise ValueError(f"image smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    kernel = _gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA)
    c1 = (SSIM_K1 * SSIM_L) ** 2
    c2 = (SSIM_K2 * SSIM_L) ** 2
    mu_x = _windowed_sums(x, kernel)
    mu_y = _windowed_sums(y, kernel)
    sxx = _windowed_sums(x * x, kernel) - mu_x * mu_x
    syy = _windowed_sums(y * y, kernel) - mu_y * mu_y
    sxy = _windowed_sums(x * y, kernel) - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * sxy + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))
