import os

from bounds.exceptions import ConvergenceError
from bounds.imdp import Mode, value_iteration

from ._base import BoundsCommand, load_imdp, logger, strategy_rows, value_rows


class Command(BoundsCommand):
    help = 'Run robust value iteration on an IMDP file'

    def add_arguments(self, parser):
        parser.add_argument('imdp', help='IMDP JSON file')
        parser.add_argument('--mode', choices=[m.value for m in Mode], action='append', dest='modes',
                            help='min, max or both when repeated (default: both)')
        self.add_solver_arguments(parser)
        self.add_output_argument(parser)

    def run(self, *args, **options):
        self.stage = 'vi'
        imdp = load_imdp(options['imdp'])
        storage = self.storage(options)
        stem = os.path.splitext(os.path.basename(options['imdp']))[0]
        not_converged = []
        for mode in options['modes'] or [Mode.MIN.value, Mode.MAX.value]:
            solution = value_iteration(imdp, mode, **self.solver_options(options))
            prefix = f"{stem}_{mode}"
            storage.write_csv(f"{prefix}_values.csv", ['state', 'value'], value_rows(imdp, solution.values))
            storage.write_csv(f"{prefix}_strategy.csv", ['state', 'action'], strategy_rows(imdp, solution.strategy))
            storage.write_json(f"{prefix}_adversary.json", solution.adversary.to_document(imdp))
            storage.write_json(f"{prefix}_report.json", solution.report.to_document())
            report = solution.report
            self.stdout.write(f"{mode}: {report.iterations} iterations, residual {report.residual:.3e}, "
                              f"{report.infinite_states} infinite states")
            if not report.converged:
                not_converged.append(mode)
        logger.info(f"Value iteration outputs for {stem} written to {storage.location}")
        if not_converged:
            raise ConvergenceError(f"value iteration did not converge for mode(s) {', '.join(not_converged)}")
