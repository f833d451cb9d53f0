"""Hard-edge kernels, Gaussian perturbations and free convolution for random matrices."""

__version__ = "0.1.0"

from . import acceptance, ensembles, freeconv, kernels, quadrature, specfun  # noqa: E402,F401
from .errors import *  # noqa: E402,F401,F403
