"""Depth likelihood volumes from light fields and Monte Carlo object pose localization."""
from ._kernels import BACKEND
from .camera import PlenopticCamera

__version__ = "0.1.0"
__all__ = ["BACKEND", "PlenopticCamera", "__version__"]
