"""Deterministic SVG line plots for sweep results.

Rendering is pinned down for byte-identical output on identical input: the
Agg backend (no display dependency), a fixed hash salt for SVG element ids,
and no embedded creation date. Tests diff the bytes directly.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

__all__ = ["line_plot"]

_SVG_SALT = "gnnattack-figures"


def line_plot(path: str | Path, series: list[tuple[str, list, list]],
              xlabel: str, ylabel: str, title: str | None = None) -> Path:
    """Write one SVG with a line per (label, xs, ys) triple; returns the path.

    Series are drawn in the given order with the default color cycle, so the
    same call produces the same bytes.
    """
    if not series:
        raise ValueError("nothing to plot: no series")
    for label, xs, ys in series:
        if len(xs) != len(ys):
            raise ValueError(f"series {label!r}: {len(xs)} x values vs {len(ys)} y values")
        if len(xs) == 0:
            raise ValueError(f"series {label!r} is empty")
    path = Path(path)
    with plt.rc_context({"svg.hashsalt": _SVG_SALT}):
        fig, ax = plt.subplots(figsize=(8, 6))
        try:
            for label, xs, ys in series:
                ax.plot(xs, ys, marker="o", label=str(label))
            ax.set_xlabel(xlabel)
            ax.set_ylabel(ylabel)
            if title:
                ax.set_title(title)
            if len(series) > 1 or series[0][0]:
                ax.legend(loc="upper right")
            ax.grid(True, alpha=0.3)
            fig.savefig(path, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)
    return path
