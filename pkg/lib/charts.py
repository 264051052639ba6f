"""
SVG line charts and rasters for the plot tables.
"""

from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from lib.errors import ArtifactIOError  # noqa: E402

# fixed salt and no date keep re-emitted SVGs byte-identical
plt.rcParams["svg.hashsalt"] = "fairshare"


def _save(fig, path: Path) -> Path:
    try:
        fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as e:
        raise ArtifactIOError(path, f"cannot write chart: {e}") from e
    finally:
        plt.close(fig)
    return path


def line_chart(
    series: Dict[str, Tuple[Sequence[float], Sequence[float]]],
    path: Path,
    xlabel: str,
    ylabel: str,
) -> Path:
    """One line per named (x, y) series."""
    fig, ax = plt.subplots(figsize=(8, 4))
    for name, (xs, ys) in series.items():
        ax.plot(xs, ys, label=name, linewidth=1)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_ylim(-0.02, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower right", fontsize="small")
    fig.tight_layout()
    return _save(fig, path)


def heat_map(
    values: Dict[Tuple[int, int], float], path: Path, label: str
) -> Path:
    """Grid heat values with M on the y axis and N on the x axis."""
    agents = sorted({m for m, _ in values})
    bands = sorted({n for _, n in values})
    grid = np.full((len(agents), len(bands)), np.nan)
    for (m, n), value in values.items():
        grid[agents.index(m), bands.index(n)] = value
    fig, ax = plt.subplots(figsize=(6, 5))
    image = ax.imshow(grid, origin="lower", vmin=0.0, vmax=1.0, cmap="viridis")
    ax.set_xticks(range(len(bands)), [str(n) for n in bands])
    ax.set_yticks(range(len(agents)), [str(m) for m in agents])
    ax.set_xlabel("N")
    ax.set_ylabel("M")
    fig.colorbar(image, ax=ax, label=label)
    fig.tight_layout()
    return _save(fig, path)


def pattern_raster(slots: List[int], bands: np.ndarray, path: Path) -> Path:
    """Band chosen by each agent (rows) in each slot (columns); 0 is idle."""
    fig, ax = plt.subplots(figsize=(max(4, len(slots) * 0.6), 1 + bands.shape[0] * 0.4))
    ax.imshow(bands, aspect="auto", cmap="tab10", interpolation="nearest")
    for (row, col), band in np.ndenumerate(bands):
        ax.text(col, row, str(band) if band else "", ha="center", va="center", fontsize=8)
    ax.set_xticks(range(len(slots)), [str(t) for t in slots])
    ax.set_yticks(range(bands.shape[0]), [str(m + 1) for m in range(bands.shape[0])])
    ax.set_xlabel("slot")
    ax.set_ylabel("agent")
    fig.tight_layout()
    return _save(fig, path)
