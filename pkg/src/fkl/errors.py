"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, SolverError -> 2,
CertificateError -> 3.
"""


class ConfigError(ValueError):
    """Invalid parameters or configuration detected before any compute."""


class SolverError(RuntimeError):
    """An iterative solver failed to converge or produced unusable output."""


class CertificateError(RuntimeError):
    """A computed certificate (decay, monotonicity, uniqueness...) failed."""


class FieldFormatError(ValueError):
    """A field file could not be parsed."""
