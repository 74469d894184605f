"""Sum-to-one mixture weights.

Every nonlocal flow expresses a pixel as an affine combination of its
neighbors.  The weights minimize the squared reconstruction error subject to
summing to one, which reduces to solving a regularized Gram system against
the all-ones vector and normalizing.
"""

from __future__ import annotations

import numpy as np


def solve_mixture_weights_batch(targets: np.ndarray, neighbors: np.ndarray,
                                regularization: float = 1e-3) -> np.ndarray:
    """Mixture weights for a batch of reconstruction problems.

    ``targets`` is (m, d) and ``neighbors`` is (m, k, d); the result is
    (m, k) with each row summing to one.  ``regularization`` is added to the
    Gram diagonal so the solve stays well posed even for duplicate or
    degenerate neighbor sets.
    """
    targets = np.asarray(targets, dtype=np.float64)
    neighbors = np.asarray(neighbors, dtype=np.float64)
    if regularization <= 0:
        raise ValueError("regularization must be positive")
    if targets.ndim != 2 or neighbors.ndim != 3 or \
            neighbors.shape[0] != targets.shape[0] or \
            neighbors.shape[2] != targets.shape[1]:
        raise ValueError("expected targets (m, d) and neighbors (m, k, d)")
    diffs = targets[:, None, :] - neighbors
    gram = diffs @ diffs.transpose(0, 2, 1)
    k = neighbors.shape[1]
    gram[:, np.arange(k), np.arange(k)] += regularization
    weights = np.linalg.solve(gram, np.ones((*gram.shape[:2], 1)))[..., 0]
    # The Gram matrix is positive definite, so the weight total is strictly
    # positive and the normalization is safe.
    return weights / weights.sum(axis=1, keepdims=True)


def solve_mixture_weights(target: np.ndarray, neighbors: np.ndarray,
                          regularization: float = 1e-3) -> np.ndarray:
    """Single-problem convenience wrapper around the batched solve."""
    return solve_mixture_weights_batch(
        np.asarray(target, float)[None, :],
        np.asarray(neighbors, float)[None, :, :], regularization)[0]


def split_combined_weights(weights: np.ndarray, fg_count: int):
    """Total weight carried by the first ``fg_count`` entries and the rest."""
    weights = np.asarray(weights, dtype=np.float64)
    fg_count = int(fg_count)
    if not 0 <= fg_count <= weights.shape[-1]:
        raise ValueError("fg_count out of range")
    return (float(weights[..., :fg_count].sum(axis=-1)),
            float(weights[..., fg_count:].sum(axis=-1)))


def mixture_endpoint_colors(weights: np.ndarray, neighbor_colors: np.ndarray,
                            fg_count: int, cutoff: float = 1e-8):
    """Per-side weighted mean colors from a joint two-side mixture.

    Returns ``(fg_color, bg_color)``; a side whose total weight falls below
    ``cutoff`` has no meaningful mean and yields ``None``.
    """
    weights = np.asarray(weights, dtype=np.float64)
    neighbor_colors = np.asarray(neighbor_colors, dtype=np.float64)
    wf, wb = split_combined_weights(weights, fg_count)
    fg = None
    bg = None
    if wf >= cutoff:
        fg = weights[:fg_count] @ neighbor_colors[:fg_count] / wf
    if wb >= cutoff:
        bg = weights[fg_count:] @ neighbor_colors[fg_count:] / wb
    return fg, bg
