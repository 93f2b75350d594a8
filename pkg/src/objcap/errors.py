"""Exception types shared across the package."""


class ObjcapError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(ObjcapError):
    """Invalid configuration value."""


class DataError(ObjcapError):
    """Malformed or inconsistent input data."""


class EmptyCorpus(DataError):
    """No token survived vocabulary construction."""


class NonFiniteUpdate(ObjcapError):
    """A training update produced a non-finite parameter."""

    def __init__(self, step: int):
        self.step = step
        super().__init__(f"non-finite update at training step {step}")


class OutOfVocabulary(ObjcapError):
    """A requested token is not in the trained vocabulary."""

    def __init__(self, token: str):
        self.token = token
        super().__init__(f"token not in vocabulary: {token!r}")


class PairOutOfVocabulary(OutOfVocabulary):
    """A noun-pair token never occurred in the training corpus."""


class ZeroVector(ObjcapError):
    """Cosine similarity is undefined for a zero vector."""


class DegenerateLabels(DataError):
    """Calibration requires at least one positive and one negative label."""


class EmptyCandidates(DataError):
    """Candidate filtering produced no images to search."""


class LengthMismatch(DataError):
    """Hypothesis and reference lists differ in length."""


class EmptyCaption(DataError):
    """A caption with no tokens cannot be scored."""
