"""Occupancy counts, missing mass and Good-Turing estimation for the infinite urn scheme."""

from .models import parse_model
from .moments import Setting, moment_report, variance_proxies
from .sampler import OccupancyProfile, sample_binomial, sample_poisson

__version__ = "0.1.0"

__all__ = [
    "parse_model",
    "Setting",
    "moment_report",
    "variance_proxies",
    "OccupancyProfile",
    "sample_binomial",
    "sample_poisson",
    "__version__",
]
