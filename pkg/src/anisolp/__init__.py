"""Anisotropic Littlewood-Paley toolkit for 3-D incompressible flow on the torus."""

from .spectral import (
    Grid,
    SpectralField,
    make_grid,
    from_physical,
    to_physical,
    directional_derivative,
    leray_project,
    inv_laplacian,
    sobolev_norm,
    l2_norm,
    l2_inner,
    multiply,
    dealias,
)
from .frame import (
    UnitPath,
    Frame,
    FrameSample,
    partition_path,
    build_frame,
    frame_derivatives,
    constant_frame,
    random_unit_path,
)

__all__ = [
    "Grid",
    "SpectralField",
    "make_grid",
    "from_physical",
    "to_physical",
    "directional_derivative",
    "leray_project",
    "inv_laplacian",
    "sobolev_norm",
    "l2_norm",
    "l2_inner",
    "multiply",
    "dealias",
    "UnitPath",
    "Frame",
    "FrameSample",
    "partition_path",
    "build_frame",
    "frame_derivatives",
    "constant_frame",
    "random_unit_path",
]

__version__ = "0.1.0"
