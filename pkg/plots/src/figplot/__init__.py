"""Renderers for the surrogate-benchmark CSV files.

One function per figure kind; all of them validate the documented CSV
schema up front and raise :class:`SchemaError` naming the offending column
rather than producing an empty or misleading image.
"""

from .schema import SchemaError, read_csv_columns
from .render import PlotSpec, render

__version__ = "0.1.0"

__all__ = ["PlotSpec", "render", "SchemaError", "read_csv_columns"]
