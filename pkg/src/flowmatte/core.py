"""Shared data model: trimap labels, algorithm parameters, pixel indexing."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

# Trimap region labels. A trimap partitions the image into pixels known to be
# background, pixels known to be foreground, and an unknown band in between.
BACKGROUND = 0
UNKNOWN = 1
FOREGROUND = 2

# Grayscale thresholds used when decoding a trimap image: values at or above
# FG_LEVEL are foreground, values at or below BG_LEVEL are background, and
# everything else is unknown.
FG_LEVEL = 0.8
BG_LEVEL = 0.2


class MattingError(Exception):
    """Base class for errors raised by the matting pipeline."""


class EmptyRegionError(MattingError):
    """A trimap (or matte) region required by an operation has no pixels."""


class SolverError(MattingError):
    """The iterative solver failed to reach the requested tolerance."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class Params:
    """Tunable constants for the whole toolkit.

    The defaults reproduce the published operating point of the method and
    rarely need changing.  Weights balance the individual energy terms,
    counts set neighborhood sizes for the graph builders, and the remaining
    fields control trimming, classification, and the linear solver.
    """

    # Neighborhood sizes for the three nonlocal flow graphs.
    cm_neighbors: int = 20
    ku_neighbors: int = 7
    uu_neighbors: int = 5

    # Energy term weights.
    ku_strength: float = 0.05
    uu_strength: float = 0.01
    local_strength: float = 1.0
    known_weight: float = 100.0
    loyalty_strength: float = 0.05

    # Spatial coordinate scaling inside the per-flow feature vectors.
    cm_coord_scale: float = 1.0
    ku_coord_scale: float = 10.0
    uu_coord_scale: float = 1.0 / 20.0

    # Conditioning added to the mixture-weight Gram matrix and to the local
    # window covariance.
    mixture_reg: float = 1e-3
    local_eps: float = 1e-7

    # Preconditioned conjugate-gradient stopping rule.
    cg_tol: float = 1e-6
    cg_max_iter: int = 2000

    # Trimap trimming: number of one-pixel expansion rounds for the edge
    # pass, its color tolerance, and the patch-statistics pass thresholds.
    trim_radius: int = 9
    trim_color_tol: float = 9.0 / 255.0
    patch_cov_reg: float = 1e-5
    patch_candidates: int = 20
    patch_strong_match: float = 0.25
    patch_no_match: float = 0.9

    # Transparency classifier: width of the known bands feeding the color
    # histograms, bins per channel, and the decision threshold on the
    # histogram fit error.
    histogram_band: int = 20
    histogram_bins: int = 16
    transparency_threshold: float = 0.2

    # Nearest-neighbor search accuracy: 0.0 is exact, larger values allow
    # approximate neighbors within a (1 + eps) distance factor.
    knn_backtrack_eps: float = 0.0

    def __post_init__(self):
        for name in ("cm_neighbors", "ku_neighbors", "uu_neighbors",
                     "patch_candidates", "cg_max_iter", "histogram_bins"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        for name in ("known_weight", "mixture_reg", "local_eps", "cg_tol",
                     "patch_cov_reg"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("ku_strength", "uu_strength", "local_strength",
                     "loyalty_strength", "cm_coord_scale", "ku_coord_scale",
                     "uu_coord_scale", "trim_color_tol",
                     "transparency_threshold", "knn_backtrack_eps"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.trim_radius < 0:
            raise ValueError("trim_radius must be nonnegative")
        if self.histogram_band < 1:
            raise ValueError("histogram_band must be a positive integer")
        if not 0.0 <= self.patch_strong_match < self.patch_no_match:
            raise ValueError("patch thresholds need 0 <= strong_match < no_match")

    def replace(self, **changes) -> "Params":
        """Return a copy with the given fields changed."""
        return dataclasses.replace(self, **changes)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in dataclasses.fields(cls)]

    @classmethod
    def from_mapping(cls, mapping: dict, base: "Params | None" = None) -> "Params":
        """Build parameters from string key/value pairs.

        Values are converted to the declared field type; unknown keys raise
        ``ValueError`` so typos in config files do not pass silently.
        """
        base = base or cls()
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        changes = {}
        for key, value in mapping.items():
            name = key.strip().replace("-", "_")
            if name not in types:
                raise ValueError(f"unknown parameter: {key}")
            kind = int if types[name] == "int" else float
            try:
                changes[name] = kind(value)
            except (TypeError, ValueError) as exc:
                raise ValueError(f"bad value for {key}: {value!r}") from exc
        return base.replace(**changes)

    @classmethod
    def from_file(cls, path: str | Path, base: "Params | None" = None) -> "Params":
        """Read ``key=value`` lines; blank lines and ``#`` comments are skipped."""
        mapping = {}
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
            key, value = line.split("=", 1)
            mapping[key] = value.strip()
        return cls.from_mapping(mapping, base)


def pixel_index(row, col, width):
    """Row-major flat index of pixel (row, col)."""
    return np.asarray(row) * width + np.asarray(col)


def pixel_coords(index, width):
    """Inverse of :func:`pixel_index`: returns ``(rows, cols)``."""
    index = np.asarray(index)
    return index // width, index % width


def region_masks(trimap: np.ndarray):
    """Flat index arrays ``(fg, bg, unknown)`` for each trimap region.

    Indices are row-major and sorted ascending, which downstream code relies
    on for reproducible orderings.
    """
    flat = np.asarray(trimap).ravel()
    return (np.flatnonzero(flat == FOREGROUND),
            np.flatnonzero(flat == BACKGROUND),
            np.flatnonzero(flat == UNKNOWN))


def check_same_size(image: np.ndarray, trimap: np.ndarray):
    """Raise ``ValueError`` when image and trimap dimensions disagree."""
    if image.shape[:2] != trimap.shape[:2]:
        ih, iw = image.shape[:2]
        th, tw = trimap.shape[:2]
        raise ValueError(
            f"image is {iw}x{ih} but trimap is {tw}x{th}; sizes must match")
