"""
charts.py - static SVG envelope charts (ensemble mean with a one-sigma band).
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from ensemble import MILESTONES, EnsembleResult  # noqa: E402
from errors import MissingVariable  # noqa: E402
from outputs import StagedOutput  # noqa: E402
from sectors import CONTROL_VARIABLES  # noqa: E402


logger = logging.getLogger(__name__)

DEFAULT_CHART_VARIABLES = CONTROL_VARIABLES


def chart_name(variable: str) -> str:
    return f"charts/{variable.replace('.', '_')}.svg"


def envelope_figure(ensembles: Sequence[EnsembleResult], variable: str, *, title: Optional[str] = None):
    """One line plus a shaded mean +/- 1 sigma band per ensemble."""
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    for ens in ensembles:
        if variable not in ens.variables:
            plt.close(fig)
            raise MissingVariable(f"Ensemble for {ens.pathway} has no envelope for '{variable}'.")
        mean, std = ens.envelope(variable)
        years = ens.grid.times
        line = ax.plot(years, mean, linewidth=1.6, label=f"{ens.pathway} (N={ens.n})")[0]
        ax.fill_between(years, mean - std, mean + std, color=line.get_color(), alpha=0.2, linewidth=0)
    for year in MILESTONES:
        ax.axvline(year, color="0.8", linewidth=0.8, linestyle="--", zorder=0)
    ax.set_title(title or variable)
    ax.set_xlabel("year")
    ax.set_ylabel(variable)
    ax.legend(loc="best", fontsize=8, frameon=False)
    ax.grid(True, color="0.92")
    fig.tight_layout()
    return fig


def write_envelope_charts(
    stage: StagedOutput,
    ensembles: Sequence[EnsembleResult],
    variables: Sequence[str] = DEFAULT_CHART_VARIABLES,
) -> List[Path]:
    written: List[Path] = []
    for variable in variables:
        fig = envelope_figure(ensembles, variable)
        try:
            path = stage.path(chart_name(variable))
            fig.savefig(path, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)
        written.append(path)
    logger.info("Rendered %d envelope chart(s)", len(written))
    return written
