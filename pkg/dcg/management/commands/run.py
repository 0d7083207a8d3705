from pathlib import Path

from django.core.management.base import BaseCommand

from dcg.experiment import run_experiment
from dcg.serializers import parse_config

from ._errors import exit_codes


class Command(BaseCommand):
    help = 'Run a replicated quality-diversity experiment from a JSON config file.'

    def add_arguments(self, parser):
        parser.add_argument('config', help='path to the experiment config (JSON)')
        parser.add_argument('--output-dir', help='override the output_dir of the config')

    def handle(self, *args, **options):
        with exit_codes():
            config = parse_config(Path(options['config']).read_text())
            if options['output_dir']:
                config.output_dir = options['output_dir']
            output_dir = run_experiment(config)
        self.stdout.write(self.style.SUCCESS(
            f'{config.replications} run(s) of {config.algorithm} written to {output_dir}'
        ))
