from django.core.management.base import BaseCommand

from dcg.experiment import report_run

from ._errors import exit_codes


class Command(BaseCommand):
    help = 'Recompute the distillation report of a finished dcg_me run.'

    def add_arguments(self, parser):
        parser.add_argument('run_dir', help='a run_<r> directory')

    def handle(self, *args, **options):
        with exit_codes():
            report = report_run(options['run_dir'])
        self.stdout.write(f'archive qd_score: {report.archive_qd_score:.6g}')
        self.stdout.write(f'dc qd_score:      {report.dc_qd_score:.6g}')
        self.stdout.write(f'archive DEM:      {report.archive_dem:.6g}')
        self.stdout.write(f'policy DEM:       {report.policy_dem:.6g}')
        self.stdout.write(self.style.SUCCESS(f"Report written to {options['run_dir']}"))
