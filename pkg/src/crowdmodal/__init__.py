"""Bridge modal frequencies from crowdsourced smartphone vehicle trips."""
from ._kernels import BACKEND

__version__ = "0.1.0"
