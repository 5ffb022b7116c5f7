"""Monte Carlo gradient estimators built on slice-ratio importance sampling.

Submodules
----------
specfn         special functions (normal cdf/quantile, Lambert W) and truncated normals
distributions  densities and exact samplers for base and sampling distributions
estimators     likelihood-ratio, reparameterization and slice-ratio gradient estimators
analysis       accuracy/variance functions of the truncated-ratio family
bench          quadratic variance benchmarks and sampler conformance reports
es             evolution strategies, MLP policy and cart-pole swing-up
"""

from . import analysis, bench, distributions, errors, estimators, specfn
from .errors import ConfigError, DegenerateError, DomainError, NumericalError, SlicegradError
from .estimators import EstimatorKind, GradientEstimate, Kind, PhiOracle, estimate_gradient
from .streams import substream

__version__ = "0.1.0"

__all__ = [
    "analysis", "bench", "distributions", "errors", "estimators", "specfn",
    "ConfigError", "DegenerateError", "DomainError", "NumericalError", "SlicegradError",
    "EstimatorKind", "GradientEstimate", "Kind", "PhiOracle", "estimate_gradient", "substream",
]
