"""Exception types shared across the toolkit.

Plain bad arguments (k out of range, invalid grid step, df <= 0) raise
ValueError; the classes here mark data-level failures that callers may
want to distinguish, e.g. to map them to a dedicated CLI exit code.
"""


class RotalignError(Exception):
    """Base class for all data and format errors raised by rotalign."""


class ValidationError(RotalignError):
    """An embedding set violates its invariants (non-finite values, zero-norm rows, bad shape)."""


class FormatError(RotalignError):
    """A file is not a valid EMB1 file (bad magic, version, or metadata)."""


class CorruptFileError(FormatError):
    """An EMB1 file has a valid header but a truncated or oversized payload."""


class PairingError(RotalignError):
    """Two embedding sets that must correspond row-by-row do not match."""


class IncompleteManifestError(RotalignError):
    """A manifest entry lacks an embedding file for a required angle."""


class GroupingError(RotalignError):
    """A group split left one side empty, so no comparison is possible."""


class DegenerateInputError(RotalignError):
    """Test statistic is undefined: both groups constant with equal means."""


class AggregationError(RotalignError):
    """A model's per-angle scores are incomplete and cannot be averaged."""
