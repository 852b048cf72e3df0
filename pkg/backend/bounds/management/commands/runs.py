from bounds.models import ExperimentRun

from ._base import BoundsCommand


class Command(BoundsCommand):
    help = 'List recorded experiment runs'

    def add_arguments(self, parser):
        parser.add_argument('--model-hash', default=None, help='Model fingerprint or a prefix of it')
        parser.add_argument('--mode', choices=['interval', 'candidates'], default=None)
        parser.add_argument('--status', default=None)

    def run(self, *args, **options):
        runs = ExperimentRun.search(model_hash=options['model_hash'], mode=options['mode'],
                                    status=options['status'])
        for run in runs:
            widths = ','.join(repr(w) for w in run.widths)
            self.stdout.write(f"{run.id} {run.created_at:%Y-%m-%d %H:%M:%S} {run.status} {run.mode} "
                              f"widths={widths} model={run.model_hash[:12]} {run.output_dir}")
