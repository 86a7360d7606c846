from pathlib import Path

from core.config import default_config, serialize_config
from core.exceptions import OutputError
from core.management.base import ToolkitCommand
from core.serializers import TASKS


class Command(ToolkitCommand):
    help = 'Write the canonical default configuration for a task'

    def add_arguments(self, parser):
        parser.add_argument('task', choices=TASKS)
        parser.add_argument('--out', help='File to write; prints to stdout when omitted')

    def handle(self, *args, **options):
        text = serialize_config(default_config(options['task']))
        if not options['out']:
            self.stdout.write(text)
            return
        path = Path(options['out'])
        try:
            path.write_text(text + '\n', encoding='utf-8')
        except OSError as exc:
            raise OutputError(f'Cannot write {path}: {exc}') from exc
        self.stdout.write(self.style.SUCCESS(f'Wrote {options["task"]} configuration to {path}'))
