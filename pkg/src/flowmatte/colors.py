"""Layer color estimation: unmixed foreground and background from a matte.

Colors propagate through four flows: two local smoothness flows driven by
the alpha and color gradients, a pair of color-mixture flows that keep each
layer's sources on the correct side of the matte, and an intra-unknown flow.
A compositing term ties the two layers to the observed image wherever alpha
mixes them.  All of it assembles into one symmetric system over stacked
foreground-then-background unknowns, solved independently per channel.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage, sparse

from .core import (BACKGROUND, EmptyRegionError, FOREGROUND, Params, UNKNOWN,
                   check_same_size)
from .knn import KnnIndex, build_features
from .mixture import solve_mixture_weights_batch
from .solver import SolveReport, affinity_laplacian, solve_spd

# Gradient filter taps (Farid-Simoncelli 3-tap pair): smooth across one
# axis, differentiate along the other.
_SMOOTH = np.array([0.229879, 0.540242, 0.229879])
_DIFF = np.array([-0.425287, 0.0, 0.425287])

# Tolerance used when snapping a stored matte to exact 0/1: one 8-bit level.
ALPHA_SNAP_TOL = 1.0 / 255.0

_OFFSETS = [(-1, -1), (-1, 0), (-1, 1), (0, -1),
            (0, 1), (1, -1), (1, 0), (1, 1)]


def snap_alpha(matte: np.ndarray, tol: float = ALPHA_SNAP_TOL) -> np.ndarray:
    """Round near-extreme alpha values to exact 0/1 (8-bit mattes rarely
    store the extremes exactly)."""
    alpha = np.asarray(matte, dtype=np.float64).copy()
    alpha[alpha >= 1.0 - tol] = 1.0
    alpha[alpha <= tol] = 0.0
    return alpha


def alpha_regions(alpha: np.ndarray) -> np.ndarray:
    """Region labels implied by a (snapped) matte: opaque pixels act as
    foreground, transparent ones as background, the rest as unknown."""
    labels = np.full(alpha.shape, UNKNOWN, dtype=np.uint8)
    labels[alpha == 1.0] = FOREGROUND
    labels[alpha == 0.0] = BACKGROUND
    return labels


def compute_gradients(field: np.ndarray):
    """x- and y-derivatives of a scalar field, border replicated."""
    field = np.asarray(field, dtype=np.float64)
    sx = ndimage.correlate1d(field, _SMOOTH, axis=0, mode="nearest")
    gx = ndimage.correlate1d(sx, _DIFF, axis=1, mode="nearest")
    sy = ndimage.correlate1d(field, _SMOOTH, axis=1, mode="nearest")
    gy = ndimage.correlate1d(sy, _DIFF, axis=0, mode="nearest")
    return gx, gy


def _pair_edges(h: int, w: int):
    """Directed 3x3 neighbor pairs: flat source/destination indices plus the
    unit offset direction, one batch per offset."""
    index = np.arange(h * w).reshape(h, w)
    for dy, dx in _OFFSETS:
        ps = (slice(max(0, -dy), h - max(0, dy)),
              slice(max(0, -dx), w - max(0, dx)))
        qs = (slice(max(0, dy), h - max(0, -dy)),
              slice(max(0, dx), w - max(0, -dx)))
        norm = float(np.hypot(dx, dy))
        yield index[ps].ravel(), index[qs].ravel(), ps, dx / norm, dy / norm


def build_transition_flow(alpha: np.ndarray) -> sparse.csr_matrix:
    """Directed alpha-transition weights |gradient . direction| between each
    pixel and its 3x3 neighbors."""
    h, w = alpha.shape
    gx, gy = compute_gradients(alpha)
    rows, cols, vals = [], [], []
    for src, dst, ps, ux, uy in _pair_edges(h, w):
        vals.append(np.abs(gx[ps].ravel() * ux + gy[ps].ravel() * uy))
        rows.append(src)
        cols.append(dst)
    return sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(h * w, h * w)).tocsr()


def build_no_transition_flow(image: np.ndarray,
                             alpha: np.ndarray) -> sparse.csr_matrix:
    """Directed smoothness weights active where both the alpha and the color
    stay flat along the neighbor direction:
    ``max(1 - |grad alpha|, 0) * max(1 - |grad color|, 0)``."""
    h, w = alpha.shape
    agx, agy = compute_gradients(alpha)
    cgrads = [compute_gradients(image[..., c]) for c in range(3)]
    rows, cols, vals = [], [], []
    for src, dst, ps, ux, uy in _pair_edges(h, w):
        da = np.abs(agx[ps].ravel() * ux + agy[ps].ravel() * uy)
        dc2 = np.zeros_like(da)
        for cgx, cgy in cgrads:
            dc2 += (cgx[ps].ravel() * ux + cgy[ps].ravel() * uy) ** 2
        weight = np.maximum(1.0 - da, 0.0) * np.maximum(1.0 - np.sqrt(dc2), 0.0)
        vals.append(weight)
        rows.append(src)
        cols.append(dst)
    return sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(h * w, h * w)).tocsr()


def _layer_mixture_flow(image: np.ndarray, alpha: np.ndarray,
                        pool: np.ndarray, unk: np.ndarray,
                        params: Params) -> sparse.csr_matrix:
    """Color-mixture flow from unknown pixels into one side's pool, with the
    alpha value folded into both the search features and the mixture."""
    h, w = alpha.shape
    n = h * w
    if pool.size < 2:
        raise EmptyRegionError(
            "layer color estimation needs at least two pixels per side pool")
    feats = build_features(image, pool, 1.0, alpha=alpha)
    index = KnnIndex(feats, pool, params.knn_backtrack_eps)
    upos = np.searchsorted(pool, unk)
    neigh = index.query_many(feats[upos], params.cm_neighbors, exclude=unk)
    values = np.column_stack([image.reshape(n, 3), alpha.ravel()])
    weights = solve_mixture_weights_batch(
        values[unk], values[neigh], params.mixture_reg)
    rows = np.repeat(unk, neigh.shape[1])
    return sparse.coo_matrix(
        (weights.ravel(), (rows, neigh.ravel())), shape=(n, n)).tocsr()


def build_color_cm_flow(image: np.ndarray, alpha: np.ndarray, params: Params):
    """The two layer color-mixture flows: foreground colors may flow in from
    the unknown and opaque pools only, background colors from the unknown
    and transparent pools only."""
    check_same_size(image, alpha)
    labels = alpha_regions(alpha).ravel()
    unk = np.flatnonzero(labels == UNKNOWN)
    if unk.size == 0:
        raise EmptyRegionError("the matte marks every pixel as known")
    fg_pool = np.flatnonzero(labels != BACKGROUND)
    bg_pool = np.flatnonzero(labels != FOREGROUND)
    return (_layer_mixture_flow(image, alpha, fg_pool, unk, params),
            _layer_mixture_flow(image, alpha, bg_pool, unk, params))


def build_color_intra_u_flow(image: np.ndarray, alpha: np.ndarray,
                             params: Params) -> sparse.csr_matrix:
    """Feature-similarity flow among the matte's unknown pixels, with alpha
    in the feature vector."""
    check_same_size(image, alpha)
    h, w = alpha.shape
    n = h * w
    unk = np.flatnonzero(alpha_regions(alpha).ravel() == UNKNOWN)
    if unk.size < 2:
        raise EmptyRegionError(
            "intra-unknown color flow needs at least two mixed pixels")
    feats = build_features(image, unk, params.uu_coord_scale, alpha=alpha)
    index = KnnIndex(feats, unk, params.knn_backtrack_eps)
    neigh = index.query_many(feats, params.uu_neighbors, exclude=unk)
    neigh_pos = np.searchsorted(unk, neigh)
    gaps = np.abs(feats[:, None, :] - feats[neigh_pos])
    weights = np.maximum(1.0 - gaps.sum(axis=2), 0.0)
    rows = np.repeat(unk, neigh.shape[1])
    graph = sparse.coo_matrix(
        (weights.ravel(), (rows, neigh.ravel())), shape=(n, n)).tocsr()
    return graph.maximum(graph.T).tocsr()


def assemble_color_system(image: np.ndarray, alpha: np.ndarray,
                          params: Params) -> sparse.csr_matrix:
    """Quadratic-form matrix of the layer color energy over stacked
    (foreground, background) unknowns; shared by all three channels."""
    n = alpha.size
    transition = build_transition_flow(alpha)
    no_transition = build_no_transition_flow(image, alpha)
    smooth = affinity_laplacian(transition + transition.T) \
        + affinity_laplacian(no_transition + no_transition.T)
    # A fully known matte leaves no pixels for the nonlocal color flows;
    # the smoothness and compositing terms then carry the solve alone.
    mixed = np.count_nonzero(alpha_regions(alpha) == UNKNOWN)
    if mixed:
        cm_fg, cm_bg = build_color_cm_flow(image, alpha, params)
    else:
        cm_fg = cm_bg = sparse.csr_matrix((n, n))
    if mixed >= 2:
        intra = affinity_laplacian(build_color_intra_u_flow(
            image, alpha, params))
    else:
        intra = sparse.csr_matrix((n, n))

    def normal_term(flow):
        lap = affinity_laplacian(flow)
        return lap.T @ lap

    flat = alpha.ravel()
    block_fg = (params.local_strength * smooth + normal_term(cm_fg)
                + params.uu_strength * intra
                + params.known_weight * sparse.diags(flat ** 2))
    block_bg = (params.local_strength * smooth + normal_term(cm_bg)
                + params.uu_strength * intra
                + params.known_weight * sparse.diags((1.0 - flat) ** 2))
    coupling = params.known_weight * sparse.diags(flat * (1.0 - flat))
    return sparse.bmat([[block_fg, coupling], [coupling, block_bg]],
                       format="csr")


def estimate_colors(image: np.ndarray, matte: np.ndarray, params: Params):
    """Unmixed layer colors for an image given its alpha matte.

    Returns ``(fg, bg, SolveReport)`` with both layers clamped to [0, 1];
    the report aggregates the three channel solves.
    """
    check_same_size(image, matte)
    alpha = snap_alpha(matte)
    system = assemble_color_system(image, alpha, params)
    n = alpha.size
    flat = alpha.ravel()
    fg = np.empty((n, 3))
    bg = np.empty((n, 3))
    iterations = 0
    residual = 0.0
    elapsed = 0.0
    for ch in range(3):
        channel = image[..., ch].ravel()
        rhs = np.concatenate([params.known_weight * flat * channel,
                              params.known_weight * (1.0 - flat) * channel])
        start = np.concatenate([channel, channel])
        solution, report = solve_spd(system, rhs, start, params)
        fg[:, ch] = solution[:n]
        bg[:, ch] = solution[n:]
        iterations += report.iterations
        residual = max(residual, report.relative_residual)
        elapsed += report.wall_time
    shape = image.shape
    return (np.clip(fg, 0.0, 1.0).reshape(shape),
            np.clip(bg, 0.0, 1.0).reshape(shape),
            SolveReport(iterations, residual, elapsed))


def composite(fg: np.ndarray, matte: np.ndarray,
              new_bg: np.ndarray) -> np.ndarray:
    """Overlay a matted foreground onto a new background."""
    check_same_size(fg, matte)
    check_same_size(new_bg, matte)
    alpha = np.asarray(matte, dtype=np.float64)[..., None]
    return np.clip(alpha * fg + (1.0 - alpha) * new_bg, 0.0, 1.0)
