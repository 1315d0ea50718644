"""Exception types shared across the toolkit.

Every error the library raises on bad input derives from RigorbenchError so
the command line can map them to a stable exit code.
"""


class RigorbenchError(Exception):
    """Base class for all toolkit errors."""


class UndecodableImage(RigorbenchError):
    """An image file exists but cannot be decoded."""


class UnknownId(RigorbenchError):
    """A referenced record id does not exist in the manifest."""


class UnstampedManifest(RigorbenchError):
    """Manifest has not been through exclusion cleaning, refusing to split."""


class EmptyClass(RigorbenchError):
    """A class has no records, so stratification is impossible."""


class BadK(RigorbenchError):
    """Fold count must be at least 2."""


class ForeignId(RigorbenchError):
    """A split references an id that is not in the manifest."""


class MissingHash(RigorbenchError):
    """A record lacks the hash required by the requested scan."""


class DimMismatch(RigorbenchError):
    """Array dimensions disagree with the declared header or peer array."""


class BadDims(RigorbenchError):
    """Tensor rank is outside the supported set."""


class IdMismatch(RigorbenchError):
    """Two artifacts that must describe the same image disagree on its id."""


class UnknownLabel(RigorbenchError):
    """A prediction refers to a label outside the agreed label set."""


class TooFewFolds(RigorbenchError):
    """Fold aggregation needs at least two fold reports."""


class ConstantInput(RigorbenchError):
    """A correlation input vector is constant, so the coefficient is undefined."""


class LengthMismatch(RigorbenchError):
    """Paired vectors differ in length or are too short to correlate."""


class BadDf(RigorbenchError):
    """Degrees of freedom must be a positive integer."""


class MalformedLog(RigorbenchError):
    """A training run log is structurally invalid."""


class SchemaError(RigorbenchError):
    """A document does not conform to its declared schema."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class StoreIO(RigorbenchError):
    """The run store file cannot be read or written."""


class DigestMismatch(RigorbenchError):
    """A stored record's digest does not match its payload."""


class MissingArtifact(RigorbenchError):
    """A report input artifact is absent."""


class RefusesEvalAugmentation(RigorbenchError):
    """Augmentation plans may only ever target the training partition."""
