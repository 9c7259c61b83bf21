"""Exception hierarchy.

Every error carries the CLI exit code it maps to, so the command layer can
translate failures without a lookup table.
"""


class SpectraceError(Exception):
    exit_code = 1


class SpecError(SpectraceError, ValueError):
    """Invalid operator, potential or run configuration."""

    exit_code = 2


class NumericalError(SpectraceError, ArithmeticError):
    """A numerical procedure could not deliver its contract."""

    exit_code = 3


class PoleProximityError(NumericalError):
    pass


class NoSignChangeError(NumericalError):
    pass


class NonConvergenceError(NumericalError):
    pass


class BracketError(NumericalError):
    """Bracket capture failed: zero or several sign changes, or a pole straddle."""


class PairingError(NumericalError):
    pass


class InvariantError(SpectraceError):
    """A checked invariant failed."""

    exit_code = 4
