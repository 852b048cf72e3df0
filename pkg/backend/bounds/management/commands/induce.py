from bounds.abstraction import CredalMode, refinement_sequence
from bounds.conf import bounds_setting
from bounds.emdp import load_model

from ._base import BoundsCommand, logger, width_tag


class Command(BoundsCommand):
    help = 'Build induced IMDP files for one or more nested grid widths'

    def add_arguments(self, parser):
        parser.add_argument('--model', required=True, help='Walker model JSON file')
        parser.add_argument('--width', type=float, action='append', dest='widths',
                            help='Grid width; repeat for a refinement sequence (default: IMDP_BOUNDS WIDTHS)')
        parser.add_argument('--mode', choices=[m.value for m in CredalMode], default=CredalMode.INTERVAL.value)
        parser.add_argument('--samples-per-axis', type=int, default=None,
                            help='Lattice points per axis and cell in candidates mode')
        self.add_threads_argument(parser)
        self.add_output_argument(parser)

    def run(self, *args, **options):
        self.stage = 'induce'
        model = load_model(options['model'])
        widths = options['widths'] or bounds_setting('WIDTHS')
        samples = options['samples_per_axis'] or bounds_setting('SAMPLES_PER_AXIS')
        threads = options['threads'] or bounds_setting('THREADS')
        storage = self.storage(options)
        sequence = refinement_sequence(model, widths, options['mode'], samples, threads)
        for induced in sequence:
            name = f"imdp_{width_tag(induced.partition.widths[0])}.json"
            path = storage.write_json(name, induced.to_document())
            logger.info(f"Wrote {path} ({induced.n_regions} region states)")
            self.stdout.write(path)
