"""Figure rendering for simulator trajectory artifacts."""

from .plot import (
    KINDS,
    FigureSpec,
    SchemaError,
    Trajectory,
    build_figure,
    plot,
    read_sidecar,
    read_trajectory,
)

__all__ = [
    "KINDS",
    "FigureSpec",
    "SchemaError",
    "Trajectory",
    "build_figure",
    "plot",
    "read_sidecar",
    "read_trajectory",
]
