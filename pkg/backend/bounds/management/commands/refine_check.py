from bounds.abstraction import check_refinement_monotonicity, nest_bounds, solve_bounds

from ._base import BoundsCommand, load_induced, logger


class Command(BoundsCommand):
    help = 'Check that a finer induced IMDP tightens the bounds of a coarser one'

    def add_arguments(self, parser):
        parser.add_argument('coarse', help='Induced IMDP JSON file of the coarse partition')
        parser.add_argument('fine', help='Induced IMDP JSON file of the fine partition')
        parser.add_argument('--slack', type=float, default=None, help='Tolerance (default: twice the solver tol)')
        parser.add_argument('--raw', action='store_true',
                            help='Compare the solver values without intersecting the fine bounds with the coarse ones')
        self.add_solver_arguments(parser)
        self.add_output_argument(parser)

    def run(self, *args, **options):
        self.stage = 'refine_check'
        solver = self.solver_options(options)
        coarse = solve_bounds(load_induced(options['coarse']), **solver)
        fine = solve_bounds(load_induced(options['fine']), **solver)
        if not options['raw']:
            fine = nest_bounds(coarse, fine)
        report = check_refinement_monotonicity(coarse, fine, options['slack'])
        path = self.storage(options).write_json('refine_check.json', report.to_document())
        logger.info(f"Refinement check written to {path}")
        self.stdout.write(f"{len(report.violations)} violations ({report.raw_violations} before nesting) "
                          f"over {report.checked} cells"
                          + ('' if report.sound else ' (non-sound credal mode)'))
