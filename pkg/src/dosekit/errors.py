"""Exception hierarchy shared across the package.

Data-shaped failures (bad geometry, units, configs, files) and numerical
failures (NaN, divergence) are kept apart so the CLI can map them to
distinct exit codes.
"""


class DosekitError(Exception):
    """Base class for all package errors."""


class DataError(DosekitError):
    """Invalid input data, configuration, or file contents."""


class GeometryError(DataError):
    """Grid geometries are invalid or do not match."""


class UnitError(DataError):
    """A grid carries the wrong unit tag for the requested operation."""


class ConfigError(DataError):
    """A configuration object or file is inconsistent."""


class BoundsError(DataError):
    """An index window falls outside the volume."""


class CropInfeasibleError(DataError):
    """Structures do not fit inside the requested crop window."""


class NormalizationError(DataError):
    """Dose normalization is undefined (empty target or zero mean)."""


class NumericalError(DosekitError):
    """NaN or other numerical breakdown during computation."""


class DivergenceError(NumericalError):
    """Optimization loss blew up past the divergence threshold."""
