"""High-order Lippmann-Schwinger solver for 2-D penetrable scatterers."""
from .errors import LS2DError
from .geometry import Scatterer, constant_contrast, gaussian_contrast, make_curve
from .grids import GridSpec
from .solver import LSOperator, SolverOptions, scatter_solve

__all__ = ["LS2DError", "Scatterer", "constant_contrast", "gaussian_contrast", "make_curve", "GridSpec",
           "LSOperator", "SolverOptions", "scatter_solve"]
__version__ = "0.1.0"
