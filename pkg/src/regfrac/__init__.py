"""Numerical workbench for the regional fractional Laplacian on bounded domains."""

from .domain import (
    Disk,
    FracParams,
    Interval,
    boundary_layer,
    graded_mesh,
    make_disk,
    make_interval,
    normalization_constant,
)

__version__ = "0.1.0"
