from django.core.management.base import BaseCommand

from dcg.plotting import plot_archive

from ._errors import exit_codes


class Command(BaseCommand):
    help = 'Render a saved 2-D archive as an SVG heatmap.'

    def add_arguments(self, parser):
        parser.add_argument('archive', help='archive directory written by a run')
        parser.add_argument('-o', '--output', required=True, help='SVG file to write')

    def handle(self, *args, **options):
        with exit_codes():
            output = plot_archive(options['archive'], options['output'])
        self.stdout.write(self.style.SUCCESS(f'Wrote {output}'))
