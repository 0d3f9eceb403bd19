"""Exception types shared across the package.

Plain ``ValueError`` is used for contract violations (bad shapes, invalid
parameters); the classes below mark *numerical* failures that a caller may
want to retry with different discretization settings.
"""


class SusygateError(Exception):
    """Base class for numerical failures raised by this package."""


class OracleConvergenceError(SusygateError):
    """Time-ordered product did not meet its Cauchy criterion within the
    refinement cap."""


class CutoffError(SusygateError):
    """Truncated spectra did not converge under the cutoff used."""


class StepSizeError(SusygateError):
    """Integrator state left the physical set further than tolerated;
    reduce the step size."""


#: Failures that the CLI maps to exit code 3.
NUMERICAL_ERRORS = (OracleConvergenceError, CutoffError, StepSizeError)
