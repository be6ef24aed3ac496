"""Static figure rendering for monoord run outputs."""

from .jobs import PLOT_KINDS, PlotJob, SchemaError, render

__version__ = "0.1.0"

__all__ = ["PLOT_KINDS", "PlotJob", "SchemaError", "render"]
