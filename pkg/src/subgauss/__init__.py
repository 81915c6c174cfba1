"""Sub-Gaussian matrix concentration toolkit: psi-norms, sharpened Bernstein
and Hanson-Wright bounds, Monte-Carlo verification, and three applications
(Johnson-Lindenstrauss, sketched least squares, null space property)."""

from .errors import SubGaussError
from .laws import K0, DistributionSpec

__version__ = "0.1.0"
__all__ = ["DistributionSpec", "K0", "SubGaussError", "__version__"]
