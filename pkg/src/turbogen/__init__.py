"""Classical emulation of a geometric quantum encoding of turbulent fields.

Pipeline: a shallow U3/CX circuit prepares each spinor component in spectral
space (:mod:`.circuit`, :mod:`.simulator`); bilinear convolutions give density
and momentum (:mod:`.madelung`); their ratio is the velocity whose statistics
are checked in :mod:`.diagnostics`.
"""
from .kernels import BACKEND
from .lattice import GridSpec

__version__ = "0.1.0"

__all__ = ["BACKEND", "GridSpec", "__version__"]
