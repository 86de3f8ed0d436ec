"""Exceptions for defective data, failed fits and failed calibrations.

Configuration mistakes (bad orders, factors outside (0, 1), unknown test
names) raise plain ``ValueError``; everything the *data* can cause derives
from :class:`DataError` so callers can tell the two apart.
"""


class DataError(Exception):
    """The input data cannot be processed (as opposed to a bad configuration)."""


class InvalidDataError(DataError):
    """Input contains non-finite values or malformed records."""


class DegenerateDataError(DataError):
    """A required covariance matrix is singular or numerically unusable."""


class RankDeficiencyError(DataError):
    """A least squares design matrix does not have full column rank."""


class NumericOverflowError(DataError):
    """A recursive update produced non-finite state."""


class CsvFormatError(InvalidDataError):
    """A series file does not parse to the expected layout."""


class SchemaError(DataError):
    """A parsed file disagrees with the declared shape or keys."""


class CalibrationError(Exception):
    """Bootstrap calibration of null moments failed (e.g. unstable fit)."""


class DesignError(Exception):
    """A filter design request could not produce a usable model."""
