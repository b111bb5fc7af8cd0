"""Exception hierarchy shared by all hdprior modules.

Two broad families matter to callers: problems a user can fix by editing
the model file or request (ValidationError and subclasses), and numerical
failures inside the kernel (NumericalError and subclasses).  The CLI maps
them to exit codes 1 and 2; the HTTP server maps them to 422 and 500.
"""


class HDPriorError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(HDPriorError):
    """Invalid user input: model file, tree structure, effect spec, request."""


class CalibrationError(ValidationError):
    """A requested hyperparameter target is unattainable (e.g. a median
    above the attainable supremum of a singular-case split)."""


class ImproperPriorError(ValidationError):
    """An operation that requires a proper prior was requested under the
    improper Jeffreys total-variance mode (e.g. sampling the total)."""


class NumericalError(HDPriorError):
    """A numerical routine failed to converge or lost its preconditions."""


class BracketingError(NumericalError):
    """Root finder was called without a sign change on the bracket."""


class RankDeficiencyError(NumericalError):
    """Constraints do not span the null space of a singular matrix."""
