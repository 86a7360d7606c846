from pathlib import Path

from django.conf import settings

from core.management.base import ToolkitCommand
from core.tasks import FIGURES, record_run, reproduce_figure


class Command(ToolkitCommand):
    help = 'Produce the plot-ready theory data behind one figure'

    def add_arguments(self, parser):
        parser.add_argument('--figure', required=True, help=f'One of {", ".join(FIGURES)}')
        parser.add_argument('--out', help='Output directory')
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument('--workers', type=int)

    def handle(self, *args, **options):
        figure = options['figure']
        output_dir = Path(options['out'] or Path(settings.SIM_DEFAULT_OUTPUT_DIR) / f'{figure}-seed{options["seed"]}')
        self.stdout.write(f'Reproducing {figure}...')
        try:
            manifest = reproduce_figure(figure, output_dir, seed=options['seed'], workers=options['workers'])
        except Exception as exc:
            record_run(figure=figure, error=exc, output_dir=output_dir)
            raise
        record_run(manifest, output_dir=output_dir)
        self.report(manifest, output_dir)
