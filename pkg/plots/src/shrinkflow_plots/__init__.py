"""Read-only diagnostic figures for shrinkflow run directories."""

__version__ = "0.1.0"

from .render import (FIGURE_KINDS, MissingArtifact, MissingColumn, PlotSpec,
                     render)
