import os

from bounds.abstraction import solve_bounds
from bounds.analysis import agreement_map, agreement_plot_script, agreement_rows, import_external_strategy

from ._base import BoundsCommand, load_induced, logger


class Command(BoundsCommand):
    help = 'Extract lower and upper strategies of an induced IMDP and map where they agree'

    def add_arguments(self, parser):
        parser.add_argument('imdp', help='Induced IMDP JSON file')
        parser.add_argument('--external', default=None, help='External strategy CSV to compare against')
        self.add_solver_arguments(parser)
        self.add_output_argument(parser)

    def run(self, *args, **options):
        self.stage = 'strategy'
        induced = load_induced(options['imdp'])
        bounds = solve_bounds(induced, **self.solver_options(options))
        external = None
        if options['external']:
            external = import_external_strategy(options['external'], induced).strategy
        agreement = agreement_map(induced, bounds.lower.strategy, bounds.upper.strategy, external)

        storage = self.storage(options)
        stem = os.path.splitext(os.path.basename(options['imdp']))[0]
        partition = induced.partition
        rows = []
        for flat in range(induced.n_regions):
            region = partition.region_id(flat)
            rows.append([flat, *region, bounds.lower.strategy.action(flat) or '',
                         bounds.upper.strategy.action(flat) or ''])
        header = ['region'] + [f'i_{d}' for d in range(partition.dimension)] + ['sigma_min', 'sigma_max']
        storage.write_csv(f"{stem}_strategies.csv", header, rows)
        header, rows = agreement_rows(agreement, partition)
        csv_name = f"{stem}_agreement.csv"
        storage.write_csv(csv_name, header, rows)
        storage.write_text(f"{stem}_agreement.gp", agreement_plot_script(csv_name, f"strategy agreement {stem}"))
        logger.info(f"Strategy maps for {stem} written to {storage.location}")
        for label, count in agreement.counts.items():
            self.stdout.write(f"{label}: {count}")
