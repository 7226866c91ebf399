"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: contract/config problems exit 1,
I/O problems exit 2.
"""


class PasadError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(PasadError):
    """Tensor shapes are incompatible for the requested operation."""


class ContractError(PasadError):
    """A documented precondition was violated by the caller."""


class ConfigError(PasadError):
    """A configuration value is outside its permitted range."""


class DoubleBackwardError(PasadError):
    """backward() was called twice on the same tape without a reset."""


class NonFiniteError(PasadError):
    """A NaN or Inf appeared where only finite values are allowed."""


class CheckpointError(PasadError):
    """A parameter file is malformed or has an unsupported version."""
