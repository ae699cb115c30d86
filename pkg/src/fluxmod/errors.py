"""Exception hierarchy shared across the package.

Three branches, one per failure family, so callers (and the CLI exit-code
mapping) can catch a whole family at once:

* ``ValidationError``   -- the request itself is malformed or out of range.
* ``InfeasibleError``   -- the request is well formed but has no solution.
* ``NumericalError``    -- a solver or series failed to converge.
"""

from __future__ import annotations


class FluxmodError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(FluxmodError, ValueError):
    """Inputs violate a documented precondition."""


class InfeasibleError(FluxmodError):
    """Inputs are valid but no solution exists for them."""


class NumericalError(FluxmodError):
    """An iterative method failed to converge or lost accuracy."""


# -- validation ---------------------------------------------------------

class AliasingRisk(ValidationError):
    """Sample rate below ten samples per period of the fastest tone."""


class InsufficientWindow(ValidationError):
    """Analysis window shorter than the required number of whole periods."""


class OutOfBand(ValidationError):
    """Frequency outside the table backing a transfer function."""


class NonMonotoneRegion(ValidationError):
    """Amplitude request outside the invertible part of a response curve."""


class NonPositiveCoupling(ValidationError):
    """Pair coupling must be a positive rate."""


# -- infeasible ---------------------------------------------------------

class NoRoot(InfeasibleError):
    """No stationary point of the average frequency in the search window."""


class WrongSideband(InfeasibleError):
    """Requested sideband order cannot reach the target from this point."""


class NoFeasiblePoint(InfeasibleError):
    """Every candidate operating point violated a constraint."""


class FlatResponse(InfeasibleError):
    """Measured sweep has no usable contrast to fit."""


# -- numerical ----------------------------------------------------------

class DiagonalizationFailure(NumericalError):
    """Eigenvalue solver did not converge on the qubit Hamiltonian."""


class FitDivergence(NumericalError):
    """Parameter fit left the physical domain or exceeded max iterations."""


class TruncationTooCoarse(NumericalError):
    """Charge-basis cutoff too small for the requested junction energies."""


class CutoffTooSmall(NumericalError):
    """Harmonic cutoff too small: the series tail is still significant."""
