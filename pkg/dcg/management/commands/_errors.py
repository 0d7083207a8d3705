from contextlib import contextmanager

from django.core.management.base import CommandError

from dcg.exceptions import ConfigError, QDError

CONFIG_ERROR = 1
RUNTIME_ERROR = 2


@contextmanager
def exit_codes():
    """Translate domain failures into command exit codes."""
    try:
        yield
    except ConfigError as exc:
        raise CommandError(f'invalid configuration:\n{exc}', returncode=CONFIG_ERROR) from exc
    except (QDError, OSError) as exc:
        raise CommandError(str(exc), returncode=RUNTIME_ERROR) from exc
