"""Exception hierarchy shared across the package."""


class SitkitError(Exception):
    """Base class for all package errors."""


class DimensionError(SitkitError):
    """Operand shapes do not conform."""


class ConfigError(SitkitError):
    """Invalid argument, configuration value, or label out of range."""


class NumericError(SitkitError):
    """Non-finite value or diverging optimization."""


class CorpusFormatError(SitkitError):
    """Corpus file has a malformed magic/version/header."""


class CorpusTruncatedError(SitkitError):
    """Corpus file payload is shorter than the header promises."""


class CorpusChecksumError(SitkitError):
    """Corpus file payload does not match its CRC32."""


class CheckpointError(SitkitError):
    """Model checkpoint file is malformed or inconsistent."""
