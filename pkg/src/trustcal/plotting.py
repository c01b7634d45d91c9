"""Figures written next to replay reports.

Uses the object-oriented matplotlib API with the Agg canvas, so nothing here
touches pyplot state or needs a display.
"""

from __future__ import annotations

from contextlib import contextmanager
from pathlib import Path
from typing import Sequence

import matplotlib as mpl
import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from trustcal.replay import TEAM, ReplaySummary

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "lines.linewidth": 1.4,
    "savefig.dpi": 150,
}


@contextmanager
def _style():
    with mpl.rc_context(STYLE):
        yield


def _new_figure(width=5.5, height=3.4):
    fig = Figure(figsize=(width, height))
    FigureCanvasAgg(fig)
    return fig, fig.add_subplot(111)


def plot_trust_distance(summaries: Sequence[ReplaySummary], path) -> Path:
    """Mean cumulative trust calibration distance against trial position.

    Logged opinion streams are dashed; each algorithm's indicator is solid.
    """
    path = Path(path)
    first = summaries[0]
    with _style():
        fig, ax = _new_figure()
        trials = np.arange(1, first.n + 1)
        labels = [*first.info.opinion_labels(), TEAM]
        for label in labels:
            if label in first.curves:
                ax.plot(trials, first.curves[label], linestyle="--", label=f"{label} (logged)")
        for s in summaries:
            if "indicator" in s.curves:
                ax.plot(trials, s.curves["indicator"], label=s.algorithm.label)
        ax.set_xlabel("trial")
        ax.set_ylabel("cumulative trust distance T")
        ax.set_title(f"{first.dataset}: mean over {len(first.run_totals)} shuffled runs")
        ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path)
    return path


def plot_run_totals(summaries: Sequence[ReplaySummary], path) -> Path:
    """Distribution of per-run indicator totals with the logged totals and G marked."""
    path = Path(path)
    first = summaries[0]
    with _style():
        fig, ax = _new_figure()
        positions = np.arange(len(summaries))
        data = [np.asarray(s.run_totals) for s in summaries]
        ax.boxplot(data, positions=positions, widths=0.5)
        ax.set_xticks(positions, [s.algorithm.label for s in summaries])
        ax.axhline(first.G, color="k", linewidth=0.8, label="G (maximum)")
        for (label, g, _), style in zip(first.baseline_rows(), ["--", "-.", ":", "--", "-."]):
            ax.axhline(g, color="0.4", linestyle=style, linewidth=0.8, label=f"{label} (logged)")
        ax.set_ylabel("total reward g")
        ax.legend(frameon=False, loc="lower right")
        fig.tight_layout()
        fig.savefig(path)
    return path


def plot_regret(curves: dict, path, reward_range: float = 1.0) -> Path:
    """Average regret ``R(n) / n`` for one or more labelled cumulative-regret curves."""
    path = Path(path)
    with _style():
        fig, ax = _new_figure()
        for label, cum in curves.items():
            cum = np.asarray(cum)
            ax.plot(np.arange(1, len(cum) + 1), cum / np.arange(1, len(cum) + 1), label=label)
        ax.axhline(0.1 * reward_range, color="0.5", linestyle=":", linewidth=0.8,
                   label="10% of reward range")
        ax.set_xscale("log")
        ax.set_xlabel("round n")
        ax.set_ylabel("average regret")
        ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path)
    return path


def write_report_figures(summaries: Sequence[ReplaySummary], outdir, stem: str) -> list[Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = [plot_run_totals(summaries, outdir / f"{stem}_run_totals.png")]
    if summaries[0].curves:
        paths.insert(0, plot_trust_distance(summaries, outdir / f"{stem}_trust_distance.png"))
    return paths
