"""Thompson-sampled probit bandits planned by exact dynamic programming over multi-page flows."""

from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
