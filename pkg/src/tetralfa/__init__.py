"""Local Fourier analysis of multigrid for P1 Laplacians on regularly refined tetrahedra."""

from .geometry import (
    GeometryError,
    LatticeBasis,
    TetGeometry,
    basis_from_tet,
    catalog_names,
    load_geometry,
    shape_catalog,
    tet_metrics,
)
from .stencil import Stencil15, StencilError, assemble_stencil, coarse_stencil
from .symbols import SmootherConfig

__version__ = "0.1.0"

__all__ = [
    "GeometryError",
    "LatticeBasis",
    "TetGeometry",
    "basis_from_tet",
    "catalog_names",
    "load_geometry",
    "shape_catalog",
    "tet_metrics",
    "Stencil15",
    "StencilError",
    "assemble_stencil",
    "coarse_stencil",
    "SmootherConfig",
]
