"""Pseudo-spectral simulator for the hydrostatic primitive equations in a periodic channel.

The prognostic variable is the horizontal velocity, expanded in Fourier
modes horizontally and cosine modes vertically.  Three viscosity models are
available: classical, partial (high modes only) and spectral eddy
(classical plus extra dissipation on the high modes).
"""

from .dynamics import ModelConfig, ModelKind, tendency
from .fields import State
from .spectral_basis import FilterSpec, GridSpec, Parity, SpectralField
from .timestepper import Scheme, StepperConfig, run, step

__version__ = "0.1.0"

__all__ = [
    "FilterSpec",
    "GridSpec",
    "ModelConfig",
    "ModelKind",
    "Parity",
    "Scheme",
    "SpectralField",
    "State",
    "StepperConfig",
    "__version__",
    "run",
    "step",
    "tendency",
]
