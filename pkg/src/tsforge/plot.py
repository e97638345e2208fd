"""Stacked per-variable SVG plot with anomaly windows shaded."""
from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")
from matplotlib.figure import Figure  # noqa: E402
import numpy as np  # noqa: E402

from .engine import GenerationResult  # noqa: E402


def emit_plot(
    result: GenerationResult,
    variables: Optional[Sequence[int]] = None,
    out_path: Union[str, Path] = "plot.svg",
) -> Path:
    """Write one panel per variable over the full timeline; label-1 spans are shaded red."""
    variables = list(range(result.d)) if not variables else [int(v) for v in variables]
    bad = [v for v in variables if not 0 <= v < result.d]
    if bad:
        raise ValueError(f"unknown variable ids {bad} (d={result.d})")

    series = np.vstack([result.train, result.test])
    t = np.arange(series.shape[0])
    with matplotlib.rc_context({"svg.hashsalt": "tsforge", "svg.fonttype": "none"}):
        fig = Figure(figsize=(10, 1.6 * len(variables) + 0.4))
        axes = fig.subplots(len(variables), 1, sharex=True, squeeze=False)[:, 0]
        for ax, v in zip(axes, variables):
            ax.plot(t, series[:, v], lw=0.8, color="tab:blue")
            ax.axvline(result.train_length, color="grey", lw=0.6, ls="--")
            for a in result.anomalies:
                if a.var == v:
                    ax.axvspan(a.t_start, a.t_end - 1, color="red", alpha=0.25, lw=0)
            ax.set_ylabel(f"x{v}")
        axes[-1].set_xlabel("t")
        fig.tight_layout()
        out_path = Path(out_path)
        fig.savefig(out_path, format="svg", metadata={"Date": None})
    return out_path
