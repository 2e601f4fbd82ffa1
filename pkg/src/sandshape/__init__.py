"""Model-free shape servoing on a simulated plastic heightfield."""

from ._kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
