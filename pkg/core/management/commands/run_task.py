from pathlib import Path

from core.config import config_snapshot, default_config, load_config, parse_config
from core.exceptions import ConfigValidationError
from core.management.base import ToolkitCommand
from core.serializers import TASKS
from core.tasks import resolve_output_dir, record_run, run_task


class Command(ToolkitCommand):
    help = 'Run one simulation task from a JSON configuration and write CSV/JSON outputs with a manifest'

    def add_arguments(self, parser):
        parser.add_argument('--config', help='Path to a JSON run configuration')
        parser.add_argument('--task', choices=TASKS, help='Task to run (overrides the configured task)')
        parser.add_argument('--out', help='Output directory')
        parser.add_argument('--seed', type=int)
        parser.add_argument('--workers', type=int)
        parser.add_argument('--tolerance', type=float)

    def handle(self, *args, **options):
        if not options['config'] and not options['task']:
            raise ConfigValidationError({'task': ['Give --config or --task.']})

        if options['config']:
            data = config_snapshot(load_config(options['config']))
            if options['task'] and options['task'] != data['task']:
                data['task'], data['options'] = options['task'], {}
        else:
            data = config_snapshot(default_config(options['task']))
        for key in ('seed', 'workers', 'tolerance'):
            if options[key] is not None:
                data[key] = options[key]
        config = parse_config(data)

        output_dir = resolve_output_dir(config, options['out'], config.task)
        self.stdout.write(f'Running {config.task} (seed {config.seed}, {config.workers} worker(s))...')
        try:
            manifest = run_task(config, output_dir)
        except Exception as exc:
            record_run(config=config, error=exc, output_dir=output_dir)
            raise
        record_run(manifest, output_dir=Path(output_dir))
        self.report(manifest, output_dir)
