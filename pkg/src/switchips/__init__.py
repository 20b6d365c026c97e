"""Two-layer interacting particle systems with switching: lattice
simulation, duality, exact stationary profiles and the continuum limit."""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import (
    DomainError,
    HaltedError,
    NonterminationError,
    QuadratureError,
    SimulationError,
    SingularError,
    SwitchIPSError,
    ValidationError,
)
from .macro import MacroParams, boundary_layer, macro_current, macro_profile, resolvent_kernel, uphill
from .model import (
    Configuration,
    DualConfiguration,
    ModelParams,
    ReservoirDensities,
    make_stream,
    sample_equilibrium_marginal,
    single_site_dual,
    validate,
)
from .stationary import absorption_closed, absorption_linear, c_vectors, micro_profile, roots

__all__ = [
    "Configuration", "DomainError", "DualConfiguration", "HaltedError", "MacroParams",
    "ModelParams", "NonterminationError", "QuadratureError", "ReservoirDensities",
    "SimulationError", "SingularError", "SwitchIPSError", "ValidationError",
    "absorption_closed", "absorption_linear", "boundary_layer", "c_vectors", "macro_current",
    "macro_profile", "make_stream", "micro_profile", "resolvent_kernel", "roots",
    "sample_equilibrium_marginal", "single_site_dual", "uphill", "validate",
]
