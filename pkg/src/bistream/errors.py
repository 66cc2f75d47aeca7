"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid shapes, parameters, or model configuration."""


class CompileError(ConfigError):
    """A network definition cannot be turned into a stream pipeline."""


class StateError(RuntimeError):
    """A stream was stepped or flushed after it was already drained."""


class FormatError(ValueError):
    """Base class for on-disk format problems."""


class BadMagicError(FormatError):
    pass


class BadVersionError(FormatError):
    pass


class TruncatedFileError(FormatError):
    pass


class MissingTensorError(FormatError):
    """A weight file lacks a tensor required by the network definition."""


class TensorMismatchError(FormatError):
    """A stored tensor's dimensions disagree with the network definition."""
