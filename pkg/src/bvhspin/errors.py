"""Exception types raised across the package."""


class BVHError(Exception):
    """Base class for all package errors."""


class KernelDomainError(BVHError, ValueError):
    """Argument outside the domain where a kernel quantity is defined."""


class SingularityError(BVHError, ArithmeticError):
    """Evaluation too close to a pole of a transform."""


class DivergentMomentError(BVHError):
    """Requested a moment the kernel does not have."""


class InsufficientMomentsError(BVHError, ValueError):
    """Moment table too short for the requested order."""


class DegeneratePoleError(BVHError, ArithmeticError):
    """The slow pole expansion is undefined because the zeroth moment vanishes."""


class SolverError(BVHError, RuntimeError):
    """Time integration failed."""


class NodeSingularityError(BVHError, ArithmeticError):
    """Division by x(t) at (or near) a node of x."""


class ConfigError(BVHError, ValueError):
    """Invalid scenario configuration."""
