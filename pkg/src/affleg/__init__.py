"""Affine Legendrian submanifolds of Sasakian manifolds: phi-volume, variations, stability, calibration and moduli."""

import os

# thread count for BLAS pools, read before numpy is first imported
_threads = os.environ.get("AFFLEG_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

from .errors import (
    AffLegError,
    ContractError,
    ConvergenceError,
    DegeneracyError,
    DomainError,
    NotAffineLegendrian,
    OrientationError,
    ResolutionError,
)
from .immersion import AffineFrame, Immersion
from .models import HeisenbergModel, SphereModel, make_model
from .spectral import PeriodicGrid

__version__ = "0.1.0"

__all__ = [
    "AffLegError",
    "AffineFrame",
    "ContractError",
    "ConvergenceError",
    "DegeneracyError",
    "DomainError",
    "HeisenbergModel",
    "Immersion",
    "NotAffineLegendrian",
    "OrientationError",
    "PeriodicGrid",
    "ResolutionError",
    "SphereModel",
    "make_model",
]
