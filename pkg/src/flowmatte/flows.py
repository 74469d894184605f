"""Builders for the four pixel-to-pixel information flows.

Three nonlocal flows (color-mixture, known-to-unknown, intra-unknown) connect
pixels through feature-space neighborhoods; the local flow connects pixels
through overlapping 3x3 color windows.  Each builder returns either a sparse
affinity matrix over all image pixels or, for the known-to-unknown flow, the
per-pixel estimates it produces directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage, sparse

from .core import EmptyRegionError, Params, UNKNOWN, check_same_size, region_masks
from .knn import KnnIndex, build_features
from .mixture import solve_mixture_weights_batch


@dataclass
class KtoUFlow:
    """Per-pixel output of the known-to-unknown flow.

    ``fg_weight`` is the total mixture weight on the foreground side (a
    direct alpha estimate), ``confidence`` scores how well the two implied
    endpoint colors separate, and ``fg_color``/``bg_color`` carry the
    endpoint colors themselves (NaN where a side's weight vanished).
    """

    pixels: np.ndarray
    fg_weight: np.ndarray
    confidence: np.ndarray
    fg_color: np.ndarray
    bg_color: np.ndarray


def _affinity(n: int, rows: np.ndarray, cols: np.ndarray,
              vals: np.ndarray) -> sparse.csr_matrix:
    graph = sparse.coo_matrix((vals, (rows, cols)), shape=(n, n))
    return graph.tocsr()


def build_cm_flow(image: np.ndarray, trimap: np.ndarray,
                  params: Params) -> sparse.csr_matrix:
    """Color-mixture flow: each unknown pixel as a sum-to-one combination
    of its nearest neighbors among all pixels in color/coordinate space."""
    check_same_size(image, trimap)
    h, w = trimap.shape
    n = h * w
    _, _, unk = region_masks(trimap)
    if unk.size == 0:
        raise EmptyRegionError("trimap has no unknown pixels")
    everything = np.arange(n)
    feats = build_features(image, everything, params.cm_coord_scale)
    index = KnnIndex(feats, everything, params.knn_backtrack_eps)
    neigh = index.query_many(feats[unk], params.cm_neighbors, exclude=unk)
    colors = image.reshape(n, 3)
    weights = solve_mixture_weights_batch(
        colors[unk], colors[neigh], params.mixture_reg)
    rows = np.repeat(unk, neigh.shape[1])
    return _affinity(n, rows, neigh.ravel(), weights.ravel())


def build_ktou_flow(image: np.ndarray, trimap: np.ndarray,
                    params: Params) -> KtoUFlow:
    """Known-to-unknown flow: a joint mixture over nearby foreground and
    background pixels gives each unknown pixel an alpha estimate with a
    confidence."""
    check_same_size(image, trimap)
    h, w = trimap.shape
    fg, bg, unk = region_masks(trimap)
    if unk.size == 0:
        raise EmptyRegionError("trimap has no unknown pixels")
    if fg.size == 0 or bg.size == 0:
        raise EmptyRegionError(
            "known-to-unknown flow needs both foreground and background pixels")

    feats_all = build_features(image, np.arange(h * w), params.ku_coord_scale)
    fg_index = KnnIndex(feats_all[fg], fg, params.knn_backtrack_eps)
    bg_index = KnnIndex(feats_all[bg], bg, params.knn_backtrack_eps)
    fg_neigh = fg_index.query_many(feats_all[unk], params.ku_neighbors)
    bg_neigh = bg_index.query_many(feats_all[unk], params.ku_neighbors)
    kf = fg_neigh.shape[1]

    colors = image.reshape(-1, 3)
    both = np.concatenate([fg_neigh, bg_neigh], axis=1)
    weights = solve_mixture_weights_batch(
        colors[unk], colors[both], params.mixture_reg)

    wf = weights[:, :kf].sum(axis=1)
    wb = weights[:, kf:].sum(axis=1)
    fg_ok = wf >= 1e-8
    bg_ok = wb >= 1e-8
    fg_color = np.full((unk.size, 3), np.nan)
    bg_color = np.full((unk.size, 3), np.nan)
    fg_color[fg_ok] = (np.einsum("ij,ijc->ic", weights[fg_ok, :kf],
                                 colors[fg_neigh[fg_ok]])
                       / wf[fg_ok, None])
    bg_color[bg_ok] = (np.einsum("ij,ijc->ic", weights[bg_ok, kf:],
                                 colors[bg_neigh[bg_ok]])
                       / wb[bg_ok, None])

    # Confidence is the mean squared channel gap between the two endpoint
    # colors; an undefined endpoint means no usable estimate.
    confidence = np.zeros(unk.size)
    ok = fg_ok & bg_ok
    confidence[ok] = np.sum((fg_color[ok] - bg_color[ok]) ** 2, axis=1) / 3.0
    confidence = np.clip(confidence, 0.0, 1.0)
    return KtoUFlow(pixels=unk, fg_weight=wf, confidence=confidence,
                    fg_color=fg_color, bg_color=bg_color)


def build_intra_u_flow(image: np.ndarray, trimap: np.ndarray,
                       params: Params) -> sparse.csr_matrix:
    """Intra-unknown flow: feature-similarity edges between unknown pixels,
    symmetrized over the union of the two directed neighborhoods."""
    check_same_size(image, trimap)
    h, w = trimap.shape
    n = h * w
    _, _, unk = region_masks(trimap)
    if unk.size < 2:
        raise EmptyRegionError(
            "intra-unknown flow needs at least two unknown pixels")
    feats = build_features(image, unk, params.uu_coord_scale)
    index = KnnIndex(feats, unk, params.knn_backtrack_eps)
    neigh = index.query_many(feats, params.uu_neighbors, exclude=unk)

    neigh_pos = np.searchsorted(unk, neigh)
    gaps = np.abs(feats[:, None, :] - feats[neigh_pos])
    weights = np.maximum(1.0 - gaps.sum(axis=2), 0.0)

    rows = np.repeat(unk, neigh.shape[1])
    graph = _affinity(n, rows, neigh.ravel(), weights.ravel())
    return graph.maximum(graph.T).tocsr()


def build_local_flow(image: np.ndarray, trimap: np.ndarray,
                     params: Params) -> sparse.csr_matrix:
    """Local flow: affinities from shared 3x3 windows, using each window's
    color mean and covariance.  Only windows fully inside the image and
    touching at least one unknown pixel contribute."""
    check_same_size(image, trimap)
    h, w = trimap.shape
    n = h * w
    if h < 3 or w < 3:
        return sparse.csr_matrix((n, n))
    touches = ndimage.maximum_filter(
        (trimap == UNKNOWN).astype(np.uint8), size=3)
    centers = touches[1:-1, 1:-1].astype(bool)
    if not centers.any():
        return sparse.csr_matrix((n, n))

    windows = sliding_window_view(
        np.arange(n).reshape(h, w), (3, 3)).reshape(h - 2, w - 2, 9)[centers]
    winc = image.reshape(n, 3)[windows]                     # (m, 9, 3)
    mu = winc.mean(axis=1, keepdims=True)
    dc = winc - mu
    cov = dc.transpose(0, 2, 1) @ dc / 9.0
    cov[:, np.arange(3), np.arange(3)] += params.local_eps / 9.0
    sol = np.linalg.solve(cov, dc.transpose(0, 2, 1))       # (m, 3, 9)
    aff = (1.0 + dc @ sol) / 9.0                            # (m, 9, 9)
    aff = 0.5 * (aff + aff.transpose(0, 2, 1))

    rows = np.repeat(windows, 9, axis=1).ravel()
    cols = np.tile(windows, (1, 9)).ravel()
    graph = _affinity(n, rows, cols, aff.ravel())
    # Accumulation order across overlapping windows can differ between the
    # (p, q) and (q, p) slots by a few ulps; averaging restores exact
    # symmetry.
    return (0.5 * (graph + graph.T)).tocsr()


def dump_flow_graph(path, graph: sparse.spmatrix):
    """Write a sparse affinity as ``src dst weight`` lines (row-major order)."""
    coo = graph.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{r} {c} {v:.17g}\n")
