"""Figure rendering for estimation-harness CSV reports."""

from .render import FIGURE_KINDS, FigureSpec, REQUIRED_COLUMNS, SchemaError, render

__version__ = "0.1.0"

__all__ = [
    "FIGURE_KINDS",
    "FigureSpec",
    "REQUIRED_COLUMNS",
    "SchemaError",
    "render",
    "__version__",
]
