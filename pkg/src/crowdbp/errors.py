"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: parameter/validation problems
exit 2, malformed data files exit 3, and numeric degeneracies exit 4.
"""


class CrowdBPError(Exception):
    """Base class for all package-specific errors."""


class ParameterError(CrowdBPError, ValueError):
    """An argument or configuration value is invalid."""


class SizeError(ParameterError):
    """An input exceeds an enumeration or safety guard."""


class GenerationError(CrowdBPError, RuntimeError):
    """Random-instance generation exhausted its retry budget."""


class DataFormatError(CrowdBPError, ValueError):
    """A dataset file is malformed."""


class NumericDegeneracyError(CrowdBPError, ArithmeticError):
    """A message, belief, or posterior lost all probability mass."""
