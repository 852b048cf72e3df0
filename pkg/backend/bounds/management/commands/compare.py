import os

from bounds.abstraction import solve_bounds
from bounds.analysis import agreement_map, agreement_rows, count_out_of_bounds, import_external_strategy

from ._base import BoundsCommand, load_induced, logger


class Command(BoundsCommand):
    help = 'Compare an external (learned) strategy and cost table with the computed bounds'

    def add_arguments(self, parser):
        parser.add_argument('imdp', help='Induced IMDP JSON file')
        parser.add_argument('external', help='External strategy CSV')
        self.add_solver_arguments(parser)
        self.add_output_argument(parser)

    def run(self, *args, **options):
        self.stage = 'compare'
        induced = load_induced(options['imdp'])
        external = import_external_strategy(options['external'], induced)
        bounds = solve_bounds(induced, **self.solver_options(options))
        agreement = agreement_map(induced, bounds.lower.strategy, bounds.upper.strategy, external.strategy)
        result = {
            'uncovered': [list(r) for r in external.uncovered],
            'agreement': agreement.counts,
        }
        if external.values is not None:
            count, checked = count_out_of_bounds(external.values, bounds, tol=2 * bounds.lower.report.tol)
            result['values'] = {'out_of_bounds': count, 'checked': checked}
        storage = self.storage(options)
        stem = os.path.splitext(os.path.basename(options['imdp']))[0]
        header, rows = agreement_rows(agreement, induced.partition)
        storage.write_csv(f"{stem}_compare_agreement.csv", header, rows)
        path = storage.write_json(f"{stem}_compare.json", result)
        logger.info(f"Comparison written to {path}")
        self.stdout.write(f"{len(external.uncovered)} uncovered cells; agreement {agreement.counts}")
        if 'values' in result:
            self.stdout.write(f"{result['values']['out_of_bounds']} of {result['values']['checked']} "
                              f"external values outside the bounds")
