"""Errors raised by the quality-diversity components."""


class QDError(Exception):
    """Base class for every error raised by the ``dcg`` app."""


class DimensionMismatchError(QDError, ValueError):
    pass


class EmptyArchiveError(QDError):
    pass


class EmptyBufferError(QDError):
    pass


class EpisodeFinishedError(QDError):
    pass


class IncompleteEpisodeError(QDError):
    pass


class ArchiveFormatError(QDError, ValueError):
    """An archive directory or ParamVector file could not be decoded."""


class ConfigError(QDError, ValueError):
    """Configuration rejected by validation.

    ``errors`` keeps the nested serializer error tree; ``str()`` flattens it
    into ``path: message`` lines.
    """

    def __init__(self, errors):
        self.errors = errors
        super().__init__('\n'.join(_flatten(errors)))


class RunFailedError(QDError):
    def __init__(self, run_index, cause):
        self.run_index = run_index
        super().__init__(f'replication {run_index} failed: {cause}')


def _flatten(errors, prefix=''):
    if isinstance(errors, dict):
        for key, value in errors.items():
            path = f'{prefix}.{key}' if prefix else str(key)
            yield from _flatten(value, path)
    elif isinstance(errors, (list, tuple)):
        for item in errors:
            yield from _flatten(item, prefix)
    else:
        yield f'{prefix}: {errors}' if prefix else str(errors)
