"""Trimap preprocessing: trimming passes and the transparency classifier.

Trimming shrinks the unknown band before any flow is built: an edge pass
grows the known regions pixel ring by pixel ring wherever colors match, and
a patch pass relabels unknown pixels whose local color distribution clearly
matches one known side and clearly mismatches the other.  The transparency
classifier then decides whether the known-to-unknown flow can be trusted for
the remaining band.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core import (BACKGROUND, EmptyRegionError, FOREGROUND, Params, UNKNOWN,
                   check_same_size, region_masks)
from .knn import KnnIndex

_OFFSETS = [(-1, -1), (-1, 0), (-1, 1), (0, -1),
            (0, 1), (1, -1), (1, 0), (1, 1)]


def _absorb_mask(image: np.ndarray, labels: np.ndarray, region: int,
                 tol: float) -> np.ndarray:
    """Unknown pixels that touch ``region`` through a neighbor of similar
    color (Euclidean RGB distance at most ``tol``)."""
    h, w = labels.shape
    near = np.zeros((h, w), dtype=bool)
    region_mask = labels == region
    for dy, dx in _OFFSETS:
        ps = (slice(max(0, -dy), h - max(0, dy)),
              slice(max(0, -dx), w - max(0, dx)))
        qs = (slice(max(0, dy), h - max(0, -dy)),
              slice(max(0, dx), w - max(0, -dx)))
        diff = image[ps] - image[qs]
        close = np.einsum("...c,...c->...", diff, diff) <= tol * tol
        near[ps] |= region_mask[qs] & close
    return near & (labels == UNKNOWN)


def edge_trim(image: np.ndarray, trimap: np.ndarray,
              params: Params) -> np.ndarray:
    """Grow both known regions into the unknown band, one pixel ring per
    round, absorbing unknown pixels whose color matches an adjacent known
    pixel.  A pixel claimed by both sides in the same round stays unknown.
    """
    check_same_size(image, trimap)
    labels = np.array(trimap, copy=True)
    for _ in range(params.trim_radius):
        to_fg = _absorb_mask(image, labels, FOREGROUND, params.trim_color_tol)
        to_bg = _absorb_mask(image, labels, BACKGROUND, params.trim_color_tol)
        contested = to_fg & to_bg
        to_fg &= ~contested
        to_bg &= ~contested
        if not to_fg.any() and not to_bg.any():
            break
        labels[to_fg] = FOREGROUND
        labels[to_bg] = BACKGROUND
    return labels


@dataclass
class PatchStats:
    """Per-pixel 3x3 window color statistics, flattened row-major."""

    means: np.ndarray   # (n, 3)
    covs: np.ndarray    # (n, 3, 3)


def patch_statistics(image: np.ndarray, cov_reg: float) -> PatchStats:
    """3x3 window mean and population covariance around every pixel.

    Windows reaching past the border replicate the edge pixels; ``cov_reg``
    is added to the covariance diagonal so every matrix stays invertible.
    """
    h, w = image.shape[:2]
    means = np.stack(
        [ndimage.uniform_filter(image[..., c], size=3, mode="nearest")
         for c in range(3)], axis=-1)
    covs = np.empty((h, w, 3, 3))
    for a in range(3):
        for b in range(a, 3):
            second = ndimage.uniform_filter(
                image[..., a] * image[..., b], size=3, mode="nearest")
            covs[..., a, b] = covs[..., b, a] = \
                second - means[..., a] * means[..., b]
    covs[..., np.arange(3), np.arange(3)] += cov_reg
    return PatchStats(means.reshape(-1, 3), covs.reshape(-1, 3, 3))


def bhattacharyya_distance(mean_a, cov_a, mean_b, cov_b):
    """Bhattacharyya distance between Gaussians; broadcasts over batches."""
    mean_a = np.asarray(mean_a, float)
    mean_b = np.asarray(mean_b, float)
    cov_a = np.asarray(cov_a, float)
    cov_b = np.asarray(cov_b, float)
    avg = 0.5 * (cov_a + cov_b)
    diff = mean_a - mean_b
    bshape = np.broadcast_shapes(avg.shape[:-2], diff.shape[:-1])
    avg = np.broadcast_to(avg, bshape + avg.shape[-2:])
    diff = np.broadcast_to(diff, bshape + diff.shape[-1:])
    sol = np.linalg.solve(avg, diff[..., None])[..., 0]
    quad = 0.125 * np.einsum("...i,...i->...", diff, sol)
    logdet_avg = np.linalg.slogdet(avg)[1]
    logdet_a = np.linalg.slogdet(cov_a)[1]
    logdet_b = np.linalg.slogdet(cov_b)[1]
    return quad + 0.5 * (logdet_avg - 0.5 * (logdet_a + logdet_b))


def _pure_window_pixels(labels: np.ndarray, region: np.ndarray) -> np.ndarray:
    """Subset of ``region`` whose (edge-replicated) 3x3 window carries a
    single label, so the window statistics describe that region alone."""
    lo = ndimage.minimum_filter(labels, size=3, mode="nearest").ravel()
    hi = ndimage.maximum_filter(labels, size=3, mode="nearest").ravel()
    return region[lo[region] == hi[region]]


def _closest_known_distance(stats: PatchStats, unk: np.ndarray,
                            known: np.ndarray, params: Params) -> np.ndarray:
    """Smallest Bhattacharyya distance from each unknown pixel's patch to
    the candidate known patches with the nearest mean colors."""
    if known.size == 0:
        return np.full(unk.size, np.inf)
    index = KnnIndex(stats.means[known], known, params.knn_backtrack_eps)
    cand = index.query_many(stats.means[unk],
                            min(params.patch_candidates, known.size))
    dist = bhattacharyya_distance(
        stats.means[unk][:, None, :], stats.covs[unk][:, None, :, :],
        stats.means[cand], stats.covs[cand])
    return dist.min(axis=1)


def patch_trim(image: np.ndarray, trimap: np.ndarray,
               params: Params) -> np.ndarray:
    """Relabel unknown pixels by local color distribution.

    A pixel joins a known side only when its patch sits well inside that
    side's distribution (distance below ``patch_strong_match``) while being
    far from the other side (distance above ``patch_no_match``); everything
    else stays unknown.  Candidate distributions come from windows lying
    entirely within one region, so a boundary window that already mixes in
    unknown pixels cannot vouch for its side.
    """
    check_same_size(image, trimap)
    labels = np.array(trimap, copy=True)
    fg, bg, unk = region_masks(labels)
    if unk.size == 0:
        return labels
    stats = patch_statistics(image, params.patch_cov_reg)
    dist_fg = _closest_known_distance(
        stats, unk, _pure_window_pixels(labels, fg), params)
    dist_bg = _closest_known_distance(
        stats, unk, _pure_window_pixels(labels, bg), params)
    to_fg = (dist_fg < params.patch_strong_match) & \
            (dist_bg > params.patch_no_match)
    to_bg = (dist_bg < params.patch_strong_match) & \
            (dist_fg > params.patch_no_match)
    flat = labels.ravel()
    flat[unk[to_fg]] = FOREGROUND
    flat[unk[to_bg]] = BACKGROUND
    return labels


@dataclass
class TransparencyDecision:
    """Outcome of the histogram fit behind the solve-path choice."""

    fit_error: float
    use_e2: bool
    fg_coeff: float
    bg_coeff: float


def _band_histogram(image: np.ndarray, select: np.ndarray,
                    fallback: np.ndarray, params: Params) -> np.ndarray:
    """Joint RGB histogram (L1-normalized) over the selected pixels, falling
    back to the full region when the band misses it entirely."""
    pixels = select if select.size else fallback
    colors = image.reshape(-1, 3)[pixels]
    bins = params.histogram_bins
    q = np.minimum((colors * bins).astype(np.int64), bins - 1)
    q = np.maximum(q, 0)
    ids = (q[:, 0] * bins + q[:, 1]) * bins + q[:, 2]
    hist = np.bincount(ids, minlength=bins ** 3).astype(np.float64)
    return hist / hist.sum()


def classify_transparency(image: np.ndarray, trimap: np.ndarray,
                          params: Params) -> TransparencyDecision:
    """Decide whether the unknown band looks like a blend of the nearby
    known colors.

    Fits the unknown region's color histogram as a two-coefficient
    combination of the foreground and background band histograms; a large
    residual means highly transparent or otherwise unexplained colors, in
    which case the known-to-unknown flow should be left out of the solve.
    """
    check_same_size(image, trimap)
    fg, bg, unk = region_masks(trimap)
    if fg.size == 0 or bg.size == 0:
        raise EmptyRegionError(
            "transparency classifier needs both known regions")
    if unk.size == 0:
        raise EmptyRegionError("transparency classifier needs unknown pixels")

    dist = ndimage.distance_transform_edt(trimap != UNKNOWN)
    band = (dist <= params.histogram_band).ravel()
    hist_fg = _band_histogram(image, fg[band[fg]], fg, params)
    hist_bg = _band_histogram(image, bg[band[bg]], bg, params)
    hist_unk = _band_histogram(image, unk, unk, params)

    gram = np.array([[hist_fg @ hist_fg, hist_fg @ hist_bg],
                     [hist_fg @ hist_bg, hist_bg @ hist_bg]])
    rhs = np.array([hist_fg @ hist_unk, hist_bg @ hist_unk])
    if np.linalg.det(gram) < 1e-12:
        gram = gram + 1e-8 * np.eye(2)
    coeff = np.linalg.solve(gram, rhs)
    resid = coeff[0] * hist_fg + coeff[1] * hist_bg - hist_unk
    error = float(resid @ resid)
    return TransparencyDecision(fit_error=error,
                                use_e2=error > params.transparency_threshold,
                                fg_coeff=float(coeff[0]),
                                bg_coeff=float(coeff[1]))
