"""Figure rendering for experiment outputs: ribbons, decay curves, masks."""

from .render import FIGURE_KINDS, PlotJob, SchemaError, read_results, render

__version__ = "0.1.0"
