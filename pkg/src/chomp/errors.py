"""Exception hierarchy shared across the pipeline."""


class ChompError(Exception):
    """Base class; the CLI maps any subclass to exit code 1."""


class FormatError(ChompError):
    pass


class MissingChannel(ChompError):
    pass


class CorruptData(ChompError):
    pass


class InsufficientData(ChompError):
    pass


class DegenerateSignal(ChompError):
    pass


class ConfigError(ChompError):
    pass
