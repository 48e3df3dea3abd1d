# resolab/errors.py
"""Exception hierarchy shared by the core modules and the CLI."""


class ResolabError(Exception):
    """Base class for every error raised by resolab."""


class DomainError(ResolabError, ValueError):
    """An evaluator was called outside its domain (e.g. r <= 0)."""


class ParameterError(ResolabError, ValueError):
    """A derived-constant parameter (eta, s, delta, ...) is out of range."""


class OneSidedDerivativeError(ResolabError):
    """V' was requested at a declared breakpoint where it jumps."""

    def __init__(self, r: float, left: float, right: float):
        self.r = r
        self.left = left
        self.right = right
        super().__init__(
            f"V' has a jump at r={r:g}: left={left:.12g}, right={right:.12g}"
        )


class PoleAtTError(ResolabError, ValueError):
    """t lies in the pole set T, so Upsilon(t) is infinite."""

    def __init__(self, t: float, j: int):
        self.t = t
        self.j = j
        super().__init__(f"t={t!r} is a pole (t^2 - t = lambda_{j})")


class ContourError(ResolabError, ValueError):
    """A Mellin contour passes through, or too close to, a pole."""


class ConfigurationError(ResolabError, ValueError):
    """A discretization is inconsistent with the requested parameters."""


class NearSingularError(ResolabError, ArithmeticError):
    """The shifted operator is (numerically) singular."""

    def __init__(self, distance: float, message: str = ""):
        self.distance = distance
        super().__init__(message or f"operator is near-singular (distance {distance:.3e})")


class ConfigError(ResolabError):
    """The experiment config failed to parse or validate (exit status 2)."""


class GateFailure(ResolabError):
    """A numerical check ran but did not pass (exit status 1)."""


EXIT_OK = 0
EXIT_GATE_FAILURE = 1
EXIT_CONFIG_ERROR = 2
