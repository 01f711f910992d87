"""CSV tables and single-panel SVG line charts."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Sequence

import numpy as np


def _fmt(v) -> str:
    v = float(v)
    if math.isnan(v):
        return "nan"
    return f"{v:.16e}"


def emit_csv(path, header: Sequence[str], columns: Sequence[Sequence[float]]) -> int:
    """Write columns under ``header`` with 17 significant digits.

    Returns the number of NaN cells written.
    """
    if len(header) != len(columns):
        raise ValueError("one header entry per column")
    lengths = {len(c) for c in columns}
    if len(lengths) > 1:
        raise ValueError(f"columns differ in length: {sorted(lengths)}")
    path = Path(path)
    rows = zip(*columns) if columns else []
    nans = 0
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            nans += sum(1 for v in row if math.isnan(float(v)))
            w.writerow([_fmt(v) for v in row])
    return nans


def emit_svg(path, x, series: dict, xlabel="t", ylabel="", title=""):
    """Polyline chart of ``series`` (label -> values) against ``x``.

    Output is byte-identical for identical input (fixed hash salt, no date).
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "varreg", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        for label, y in series.items():
            ax.plot(np.asarray(x), np.asarray(y), label=label, linewidth=1.2)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.legend()
        fig.tight_layout()
        fig.savefig(Path(path), format="svg", metadata={"Date": None})
        plt.close(fig)
