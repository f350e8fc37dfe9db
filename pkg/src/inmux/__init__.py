"""Control analysis of square nonlinear systems with input multiplicity,
instantiated on a 2x2 CSTR benchmark: steady-state input instances, RGA and
integral-controllability pairing classification, nonlinear MPC simulation,
and basin-of-attraction mapping."""

from ._kernels import BACKEND, get_backend
from .model import DomainError, InputPair, PlantParams, StatePair

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DomainError",
    "InputPair",
    "PlantParams",
    "StatePair",
    "get_backend",
    "__version__",
]
