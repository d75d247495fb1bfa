"""Finite-blocklength achievable rates for a two-user Gaussian broadcast channel
with staggered message arrivals and decoding deadlines."""
from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
