"""Exception hierarchy shared by all engine modules.

Every error raised on a documented failure path derives from EngineError so
the CLI can map any of them to a nonzero exit code in one place.
"""


class EngineError(Exception):
    """Base class for all documented engine failures."""


class ZeroSeed(EngineError):
    """LFSR seed state was all zeros."""


class DegenerateSequence(EngineError):
    """LFSR taps gave a period shorter than 2^degree - 1."""


class ShiftCollision(EngineError):
    """Two stimuli were assigned the same effective code shift."""


class BadStimulusId(EngineError):
    """Stimulus id outside the codebook."""


class ShapeMismatch(EngineError):
    """Array arguments disagree on shape."""


class OutOfRange(EngineError):
    """Requested window extends past the end of the segment."""


class DegenerateLabels(EngineError):
    """Training labels contain a single class."""


class AlreadyDecided(EngineError):
    """Prediction pushed into a decoder that has already decided."""


class EmptyInput(EngineError):
    """Operation requires at least one element."""


class EmptyQuestion(EngineError):
    """Question text was empty; caller should ask the partner to repeat."""


class InvalidIndex(EngineError):
    """Keyword index not valid on the current page."""


class Ended(EngineError):
    """Selection applied to a conversation that has ended."""


class ProviderUnavailable(EngineError):
    """Language-model provider did not answer within the timeout."""


class EmptyCompletion(EngineError):
    """Provider returned no usable text."""


class EmptyCorpus(EngineError):
    """Dataset build invoked on an empty conversation corpus."""


class EmptyGroup(EngineError):
    """Statistics requested for an empty rating group."""


class ParseError(EngineError):
    """Input file does not follow its documented format."""


class ConfigError(EngineError):
    """Config file contains an unknown key or a malformed value."""


class BindFailure(EngineError):
    """Serve endpoint could not bind its port."""
