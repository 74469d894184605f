"""Plain-text run reports and diagnostic figures.

Reports are flat ``key=value`` lines so shell scripts can grep them; the
figure helpers render overview images for a run into a directory next to
the report file.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .io import labels_to_grayscale


def format_value(value) -> str:
    """Render a report value so it parses back to the same Python value."""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def report_lines(entries: dict) -> list[str]:
    """``key=value`` lines in insertion order."""
    return [f"{key}={format_value(value)}" for key, value in entries.items()]


def write_report(path: str | Path, entries: dict) -> Path:
    path = Path(path)
    path.write_text("\n".join(report_lines(entries)) + "\n")
    return path


def parse_report(text: str) -> dict:
    """Inverse of :func:`report_lines` with values kept as strings."""
    entries = {}
    for line in text.splitlines():
        line = line.strip()
        if line and "=" in line:
            key, value = line.split("=", 1)
            entries[key] = value
    return entries


def _grid(panels, path: Path, columns: int = 2):
    """Lay panels out on a grid and save; each panel is (title, array, cmap)."""
    rows = (len(panels) + columns - 1) // columns
    fig, axes = plt.subplots(rows, columns,
                             figsize=(4.0 * columns, 3.2 * rows),
                             squeeze=False)
    for ax in axes.ravel():
        ax.set_axis_off()
    for ax, (title, array, cmap) in zip(axes.ravel(), panels):
        shown = ax.imshow(array, cmap=cmap, vmin=0.0, vmax=1.0,
                          interpolation="nearest")
        ax.set_title(title, fontsize=9)
        if cmap is not None:
            fig.colorbar(shown, ax=ax, fraction=0.046)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_matte_figures(directory: str | Path, image: np.ndarray,
                         trimap: np.ndarray, trimmed: np.ndarray,
                         matte: np.ndarray, ktou=None) -> list[Path]:
    """Overview figures for a matte run; returns the written paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []

    overview = directory / "overview.png"
    _grid([("input", image, None),
           ("trimap", labels_to_grayscale(trimap), "gray"),
           ("trimmed trimap", labels_to_grayscale(trimmed), "gray"),
           ("matte", matte, "gray")], overview)
    written.append(overview)

    if ktou is not None:
        estimate = np.full(trimap.shape, np.nan).ravel()
        confidence = np.full(trimap.shape, np.nan).ravel()
        estimate[ktou.pixels] = np.clip(ktou.fg_weight, 0.0, 1.0)
        confidence[ktou.pixels] = ktou.confidence
        path = directory / "known_to_unknown.png"
        _grid([("direct alpha estimate", estimate.reshape(trimap.shape),
                "viridis"),
               ("estimate confidence", confidence.reshape(trimap.shape),
                "magma")], path)
        written.append(path)
    return written


def render_color_figures(directory: str | Path, image: np.ndarray,
                         alpha: np.ndarray, fg: np.ndarray,
                         bg: np.ndarray) -> list[Path]:
    """Overview figures for a layer color run; returns the written paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    residual = np.abs(image - (alpha[..., None] * fg
                               + (1.0 - alpha[..., None]) * bg)).mean(axis=2)
    path = directory / "layer_colors.png"
    _grid([("input", image, None),
           ("alpha", alpha, "gray"),
           ("foreground", fg, None),
           ("background", bg, None),
           ("compositing residual", residual, "inferno")], path)
    return [path]


def render_regularize_figures(directory: str | Path, image: np.ndarray,
                              estimate: np.ndarray, loyalty: np.ndarray,
                              matte: np.ndarray) -> list[Path]:
    """Overview figures for a regularization run; returns the written paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / "regularization.png"
    _grid([("input", image, None),
           ("external estimate", estimate, "gray"),
           ("loyalty weights", loyalty, "magma"),
           ("regularized matte", matte, "gray")], path)
    return [path]
