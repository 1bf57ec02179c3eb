"""Exception hierarchy shared across the package.

Every numerical failure mode raises a subclass of :class:`NumericalError`;
the CLI maps those to exit code 3 and configuration problems
(:class:`ValidationError`) to exit code 2.
"""


class BandgapError(Exception):
    """Base class for all package errors."""


class ValidationError(BandgapError):
    """Invalid configuration or arguments (CLI exit code 2)."""


class NumericalError(BandgapError):
    """Numerical failure during a computation (CLI exit code 3)."""


class DomainError(NumericalError):
    """Input outside the mathematical domain of an operation."""


class SingularMatrixError(NumericalError):
    """Linear solve on an (effectively) singular matrix."""


class ConvergenceError(NumericalError):
    """An iterative routine failed to converge."""


class NoBracketError(NumericalError):
    """Root bracketing failed: f(lo) and f(hi) do not change sign."""


class QuadratureBudgetError(NumericalError):
    """Adaptive quadrature exceeded its panel budget before reaching tol."""


class SingularDenominatorError(NumericalError):
    """A lattice-sum denominator vanished; the Green's function is not defined.

    Carries the offending reciprocal-lattice point in ``q``.
    """

    def __init__(self, message, q=None):
        super().__init__(message)
        self.q = q


class SingularLeadingTermError(SingularDenominatorError):
    """The q = 0 leading term of the Kummer representation is singular."""


class CancellationRegimeError(NumericalError):
    """beta-difference kernel evaluated where |alpha| ~ k (catastrophic
    cancellation between two singular sums)."""


class NoKernelError(NumericalError):
    """No near-kernel singular vector at the requested parameter point."""


class AliasingError(NumericalError):
    """Inverse Floquet transform requested beyond the aliasing guard."""


class CancellationRegimeWarning(UserWarning):
    """The beta-difference kernel is close to its artificial singularity."""


class DiluteTruncationWarning(UserWarning):
    """Exterior-field evaluation with a very small resonator needs a larger
    lattice truncation; the default was raised."""


class FloquetOverflowWarning(UserWarning):
    """Complex Floquet transform applied with |beta| well beyond the measured
    decay of the input mode."""
