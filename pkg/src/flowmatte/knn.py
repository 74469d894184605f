"""Feature vectors and K-nearest-neighbor queries for the flow builders.

Each nonlocal flow searches neighbors in a feature space that concatenates
pixel color with scaled image-plane coordinates (and, for layer color
estimation, the alpha value).  Queries are exact by default and resolve
distance ties by preferring the lower pixel index, so graph construction is
deterministic for a given input.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .core import EmptyRegionError


def build_features(image: np.ndarray, pixels: np.ndarray, coord_scale: float,
                   alpha: np.ndarray | None = None) -> np.ndarray:
    """Feature vectors for a subset of pixels.

    Layout is ``[r, g, b, x*scale/width, y*scale/height]``; when ``alpha``
    is given it is inserted after the color, giving
    ``[r, g, b, a, x*scale/width, y*scale/height]``.
    """
    h, w = image.shape[:2]
    pixels = np.asarray(pixels)
    ys, xs = pixels // w, pixels % w
    cols = image.reshape(-1, 3)[pixels]
    fx = coord_scale * xs / w
    fy = coord_scale * ys / h
    if alpha is None:
        return np.column_stack([cols, fx, fy])
    return np.column_stack([cols, np.asarray(alpha).ravel()[pixels], fx, fy])


class KnnIndex:
    """Nearest-neighbor index over the features of a pixel subset.

    Results are reported as pixel indices (not positions within the subset).
    With ``backtrack_eps == 0`` queries are exact and ties in distance are
    broken toward the lower pixel index; a positive ``backtrack_eps`` trades
    that guarantee for faster approximate search.
    """

    def __init__(self, features: np.ndarray, pixels: np.ndarray,
                 backtrack_eps: float = 0.0):
        features = np.ascontiguousarray(features, dtype=np.float64)
        pixels = np.asarray(pixels)
        if features.ndim != 2 or features.shape[0] != pixels.shape[0]:
            raise ValueError("features and pixels must align row for row")
        if pixels.size == 0:
            raise EmptyRegionError(
                "cannot build a neighbor index over an empty pixel set")
        self.features = features
        self.pixels = pixels
        self.backtrack_eps = float(backtrack_eps)
        self._tree = cKDTree(features)

    def __len__(self) -> int:
        return self.pixels.size

    def query(self, feature: np.ndarray, k: int,
              exclude: int | None = None) -> np.ndarray:
        """Pixel indices of the k nearest subset members to one feature."""
        exc = None if exclude is None else np.asarray([exclude])
        return self.query_many(np.asarray(feature, float)[None, :], k, exc)[0]

    def query_many(self, queries: np.ndarray, k: int,
                   exclude: np.ndarray | None = None) -> np.ndarray:
        """Batched query.

        ``queries`` is (m, d); ``exclude`` optionally gives one pixel index
        per query to leave out of its result (normally the query pixel
        itself).  Returns an (m, k) array of pixel indices ordered by
        ascending distance, ties broken by ascending pixel index.  ``k`` is
        capped at the number of available subset members.
        """
        queries = np.ascontiguousarray(np.atleast_2d(queries), dtype=np.float64)
        n = len(self)
        pad = 0 if exclude is None else 1
        k_eff = min(int(k), n - pad)
        if k_eff < 1:
            raise EmptyRegionError(
                "neighbor query needs at least one available pixel")
        # One extra candidate beyond what we keep lets us detect distance
        # ties that straddle the cutoff.
        k_query = min(k_eff + pad + 1, n)
        dist, pos = self._tree.query(queries, k=k_query, eps=self.backtrack_eps)
        if k_query == 1:
            dist = dist[:, None]
            pos = pos[:, None]
        ids = self.pixels[pos]
        order = np.lexsort((ids, dist), axis=-1)
        dist = np.take_along_axis(dist, order, axis=-1)
        ids = np.take_along_axis(ids, order, axis=-1)

        keep = np.empty((queries.shape[0], k_eff), dtype=self.pixels.dtype)
        exact = self.backtrack_eps == 0.0
        for row in range(queries.shape[0]):
            row_ids = ids[row]
            row_dist = dist[row]
            if exclude is not None:
                mask = row_ids != exclude[row]
                row_ids = row_ids[mask]
                row_dist = row_dist[mask]
            if exact and row_dist.size > k_eff and \
                    row_dist[k_eff] <= row_dist[k_eff - 1]:
                # The first discarded candidate ties the last kept one, so
                # the window may have cut through a tie group.  Re-rank the
                # full tie radius for this query.
                row_ids = self._resolve_ties(
                    queries[row], row_dist[k_eff - 1], k_eff,
                    None if exclude is None else exclude[row])
            keep[row] = row_ids[:k_eff]
        return keep

    def _resolve_ties(self, query: np.ndarray, radius: float, k: int,
                      exclude: int | None) -> np.ndarray:
        pos = self._tree.query_ball_point(query, radius * (1 + 1e-12) + 1e-300)
        pos = np.asarray(pos, dtype=np.intp)
        ids = self.pixels[pos]
        if exclude is not None:
            mask = ids != exclude
            pos, ids = pos[mask], ids[mask]
        dist = np.linalg.norm(self.features[pos] - query, axis=1)
        order = np.lexsort((ids, dist))
        return ids[order[:k]]
