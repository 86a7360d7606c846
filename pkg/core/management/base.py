import logging

from django.core.management.base import BaseCommand, CommandError

from core.exceptions import ToolkitError

logger = logging.getLogger(__name__)


class ToolkitCommand(BaseCommand):
    """Maps toolkit errors onto CommandError with the error's exit code."""

    def execute(self, *args, **options):
        try:
            return super().execute(*args, **options)
        except ToolkitError as exc:
            logger.error('%s: %s', type(exc).__name__, exc)
            raise CommandError(str(exc), returncode=exc.exit_code) from exc

    def report(self, manifest, output_dir):
        self.stdout.write(
            self.style.SUCCESS(
                f'{manifest.figure or manifest.task}: {len(manifest.files)} files written to {output_dir} '
                f'in {manifest.duration_s:.2f} s'
            )
        )
        for entry in manifest.files:
            self.stdout.write(f'  {entry["name"]}  {entry["sha256"][:12]}')
