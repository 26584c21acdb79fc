"""Static figure rendering for mesonbell CSV outputs."""

from .render import FigureSpec, SchemaMismatchError, render

__version__ = "0.1.0"

__all__ = ["FigureSpec", "SchemaMismatchError", "render"]
