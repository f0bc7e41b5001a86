"""Synthetic ellipse phantoms used as stand-in ground truth images.

Each phantom is a piecewise-smooth magnitude image in [0, 1]: a large body
ellipse plus a handful of randomly placed, rotated ellipses whose intensity
can carry a smooth linear ramp. A piecewise-constant variant (no ramps) is
provided for total-variation experiments.
"""

from __future__ import annotations

import numpy as np

__all__ = ["ellipse_phantom", "piecewise_constant_phantom"]


def _ellipse_support(size: int, center, axes, angle: float) -> np.ndarray:
    ys, xs = np.mgrid[0:size, 0:size]
    # normalized coordinates in [-1, 1]
    x = (xs + 0.5) / size * 2.0 - 1.0
    y = (ys + 0.5) / size * 2.0 - 1.0
    ca, sa = np.cos(angle), np.sin(angle)
    xr = ca * (x - center[0]) + sa * (y - center[1])
    yr = -sa * (x - center[0]) + ca * (y - center[1])
    return (xr / axes[0]) ** 2 + (yr / axes[1]) ** 2 <= 1.0


def ellipse_phantom(
    size: int,
    rng: np.random.Generator,
    n_ellipses: tuple[int, int] = (4, 8),
    smooth_ramps: bool = True,
) -> np.ndarray:
    """Draw one random phantom of shape (size, size) with values in [0, 1]."""
    img = np.zeros((size, size), dtype=np.float64)

    # body: a large centered ellipse with mild eccentricity and a base intensity
    body_axes = (rng.uniform(0.70, 0.85), rng.uniform(0.70, 0.85))
    body_angle = rng.uniform(0.0, np.pi)
    body = _ellipse_support(size, (rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05)),
                            body_axes, body_angle)
    img[body] += rng.uniform(0.25, 0.45)

    ys, xs = np.mgrid[0:size, 0:size]
    xn = (xs + 0.5) / size * 2.0 - 1.0
    yn = (ys + 0.5) / size * 2.0 - 1.0

    count = rng.integers(n_ellipses[0], n_ellipses[1] + 1)
    for _ in range(count):
        center = (rng.uniform(-0.45, 0.45), rng.uniform(-0.45, 0.45))
        axes = (rng.uniform(0.08, 0.35), rng.uniform(0.08, 0.35))
        angle = rng.uniform(0.0, np.pi)
        support = _ellipse_support(size, center, axes, angle)
        delta = rng.uniform(0.15, 0.55) * rng.choice((-1.0, 1.0))
        if smooth_ramps:
            # linear intensity ramp across the ellipse, normalized to [0.5, 1.5]
            direction = rng.uniform(0.0, 2 * np.pi)
            ramp = (xn - center[0]) * np.cos(direction) + (yn - center[1]) * np.sin(direction)
            scale = max(axes)
            profile = 1.0 + 0.5 * np.clip(ramp / scale, -1.0, 1.0)
        else:
            profile = 1.0
        img[support] += delta * np.asarray(profile * support, dtype=np.float64)[support]

    img = np.clip(img, 0.0, None)
    peak = img.max()
    if peak > 0:
        img /= peak
    return img


def piecewise_constant_phantom(size: int, rng: np.random.Generator) -> np.ndarray:
    """Phantom made of constant-intensity ellipses; ideal for TV priors."""
    return ellipse_phantom(size, rng, n_ellipses=(3, 6), smooth_ramps=False)
