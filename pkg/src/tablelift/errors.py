"""Exception types shared by every tablelift module."""


class TableLiftError(Exception):
    """Base class for all errors raised by this package."""


# --- tablecore ---------------------------------------------------------------


class MalformedCsv(TableLiftError):
    """Query CSV is empty, header-only, or has ragged rows."""


class UnknownColumn(TableLiftError):
    """A named column does not exist in the table header."""


class KeyEqualsTask(TableLiftError):
    """Key column and task column resolve to the same column."""


class EmptyCorpus(TableLiftError):
    """Corpus directory yielded zero valid tables."""


class IoError(TableLiftError):
    """Corpus directory or file could not be read."""


# --- textenc -----------------------------------------------------------------


class DimensionMismatch(TableLiftError):
    """Vectors from different dimensions were combined."""


class UnknownToken(TableLiftError):
    """word_vector_file mode: no query token is in the vocabulary and fallback is off."""


# --- lakeindex / enrich ------------------------------------------------------


class EmptyQuery(TableLiftError):
    """Query string normalized to zero tokens."""


class IndexEmpty(TableLiftError):
    """Search requested against an index with no documents."""


class InvalidClusterCount(TableLiftError):
    pass


class InvalidThreshold(TableLiftError):
    pass


# --- mlkit -------------------------------------------------------------------


class NoFeatures(TableLiftError):
    """Vectorization produced zero usable features."""


class DegenerateTarget(TableLiftError):
    """Target has a single class or zero variance, or is not numeric for regression."""


class InvalidCount(TableLiftError):
    pass


class TooFewRows(TableLiftError):
    pass


class LengthMismatch(TableLiftError):
    pass


class UnsupportedTask(TableLiftError):
    """Operation is defined for classification tasks only."""


# --- pipeline ----------------------------------------------------------------


class InvalidSpec(TableLiftError):
    """Synthetic lake specification fails validation."""
