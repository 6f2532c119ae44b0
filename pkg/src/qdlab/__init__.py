"""Quadrature domains, algebraic Hele-Shaw droplets and Schwarz reflection dynamics."""

import os

# numba's TBB layer needs a newer TBB than the system one; prefer OpenMP/workqueue
os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

from .errors import QdlabError  # noqa: E402
from .numerics import INF, QuadNode, QuadratureData, RationalFunction, rational  # noqa: E402
from .raster import RasterDroplet  # noqa: E402

__all__ = ["INF", "QdlabError", "QuadNode", "QuadratureData", "RasterDroplet", "RationalFunction", "rational"]
__version__ = "0.1.0"
