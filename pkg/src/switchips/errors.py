"""Exception hierarchy shared by every module."""

from __future__ import annotations


class SwitchIPSError(Exception):
    """Base class for all package errors."""

    code = "ERROR"


class ValidationError(SwitchIPSError, ValueError):
    code = "VALIDATION"


class DomainError(SwitchIPSError, ValueError):
    code = "DOMAIN"


class SingularError(SwitchIPSError, ArithmeticError):
    code = "SINGULAR"


class HaltedError(SwitchIPSError, RuntimeError):
    """Total jump rate vanished: the chain sits in an absorbing state."""

    code = "HALTED"


class NonterminationError(SwitchIPSError, RuntimeError):
    """Event budget exhausted; indicates a rate bug rather than bad luck."""

    code = "NONTERMINATION"


class QuadratureError(SwitchIPSError, ArithmeticError):
    code = "QUADRATURE"


class SimulationError(SwitchIPSError, RuntimeError):
    """Internal consistency check failed during a simulation."""

    code = "SIMULATION"
