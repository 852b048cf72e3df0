import os

import numpy as np

from bounds.abstraction import solve_bounds
from bounds.analysis import extract_section, import_external_strategy, section_plot_script, section_rows
from bounds.conf import bounds_setting

from ._base import BoundsCommand, load_induced, logger


class Command(BoundsCommand):
    help = 'Write one-dimensional sections of the lower and upper bounds'

    def add_arguments(self, parser):
        parser.add_argument('imdp', help='Induced IMDP JSON file')
        parser.add_argument('--dim', type=int, default=1, help='Index of the fixed coordinate (default: 1, time)')
        parser.add_argument('--value', type=float, action='append', dest='values',
                            help='Fixed coordinate value; repeatable (default: IMDP_BOUNDS SECTION_TIMES)')
        parser.add_argument('--external', default=None, help='External strategy CSV with a value column')
        self.add_solver_arguments(parser)
        self.add_output_argument(parser)

    def run(self, *args, **options):
        self.stage = 'section'
        induced = load_induced(options['imdp'])
        bounds = solve_bounds(induced, **self.solver_options(options))
        external = None
        if options['external']:
            external = import_external_strategy(options['external'], induced).values
        storage = self.storage(options)
        stem = os.path.splitext(os.path.basename(options['imdp']))[0]
        for value in options['values'] or bounds_setting('SECTION_TIMES'):
            section = extract_section(bounds, (options['dim'], value), external)
            csv_name = f"{stem}_section_{options['dim']}_{value!r}.csv"
            header, rows = section_rows(section, induced.partition)
            storage.write_csv(csv_name, header, rows)
            storage.write_text(csv_name[:-4] + '.gp', section_plot_script(csv_name, f"{stem} at x{options['dim']}={value}"))
            widths = section.widths
            self.stdout.write(f"{csv_name}: {len(section.samples)} samples, mean width {np.mean(widths):.6f}")
        logger.info(f"Sections for {stem} written to {storage.location}")
