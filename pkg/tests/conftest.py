"""Shared synthetic instances for the test suite."""

import numpy as np

from flowmatte.core import BACKGROUND, FOREGROUND, UNKNOWN

FLAT_FG = np.array([0.9, 0.2, 0.1])
FLAT_BG = np.array([0.1, 0.3, 0.8])


def make_ramp_composite(height=24, width=24, band=8, fg=FLAT_FG, bg=FLAT_BG,
                        noise=0.0, seed=0, margin=1):
    """Two flat layers blended by a horizontal alpha ramp.

    The ramp spans ``band`` columns in the middle; the trimap marks those
    columns (plus ``margin`` on each side) unknown.  Returns
    ``(image, trimap, alpha)``.
    """
    start = (width - band) // 2
    alpha = np.zeros((height, width))
    alpha[:, :start] = 1.0
    ramp = np.linspace(1.0, 0.0, band + 2)[1:-1]
    alpha[:, start:start + band] = ramp[None, :]
    image = alpha[..., None] * np.asarray(fg) \
        + (1.0 - alpha[..., None]) * np.asarray(bg)
    if noise:
        rng = np.random.default_rng(seed)
        image = image + rng.normal(0.0, noise, image.shape)
    image = np.clip(image, 0.0, 1.0)
    trimap = np.full((height, width), UNKNOWN, dtype=np.uint8)
    trimap[:, :start - margin] = FOREGROUND
    trimap[:, start + band + margin:] = BACKGROUND
    return image, trimap, alpha


def make_random_instance(rng, height, width, unknown_share=0.4):
    """Random image plus a random trimap with every region non-empty."""
    image = rng.random((height, width, 3))
    labels = rng.choice(
        [BACKGROUND, UNKNOWN, FOREGROUND], size=(height, width),
        p=[(1 - unknown_share) / 2, unknown_share, (1 - unknown_share) / 2])
    flat = labels.ravel()
    anchors = rng.choice(flat.size, size=3, replace=False)
    flat[anchors] = [FOREGROUND, BACKGROUND, UNKNOWN]
    return image, labels.astype(np.uint8)
