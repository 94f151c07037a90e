"""Error taxonomy shared across the toolkit.

The CLI maps these onto exit codes: configuration problems exit 2,
missing pipeline prerequisites exit 3, bad data exits 4.
"""


class GenreSelectError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(GenreSelectError):
    """Invalid or missing configuration (registry entries, config files)."""


class DataError(GenreSelectError):
    """Input data violates a documented precondition or invariant."""


class FormatError(DataError):
    """A serialized artifact (CoNLL-U, embedding file, manifest) is malformed."""


class MissingArtifactError(GenreSelectError):
    """A pipeline step requires an artifact that has not been produced yet."""
