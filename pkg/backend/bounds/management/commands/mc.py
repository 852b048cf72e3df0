import json

from bounds.abstraction import solve_bounds
from bounds.conf import bounds_setting
from bounds.emdp import ConstantPolicy, load_model, mc_expected_cost
from bounds.exceptions import InvalidArgumentError

from ._base import BoundsCommand, load_induced


class Command(BoundsCommand):
    help = 'Monte-Carlo estimate of the expected cost of a strategy from a start state'

    def add_arguments(self, parser):
        parser.add_argument('--model', required=True, help='Walker model JSON file')
        parser.add_argument('--start', type=float, nargs='+', required=True, help='Start state coordinates')
        group = parser.add_mutually_exclusive_group(required=True)
        group.add_argument('--action', help='Play this action everywhere')
        group.add_argument('--imdp', help='Induced IMDP file; play its extracted strategy')
        parser.add_argument('--strategy-mode', choices=['min', 'max'], default='max',
                            help='Which extracted strategy to play with --imdp')
        parser.add_argument('--horizon', type=int, default=None)
        parser.add_argument('--runs', type=int, default=None)
        parser.add_argument('--seed', type=int, default=None)
        self.add_solver_arguments(parser)

    def run(self, *args, **options):
        self.stage = 'mc'
        model = load_model(options['model'])
        if options['action']:
            policy = ConstantPolicy(model, options['action'])
        else:
            induced = load_induced(options['imdp'])
            if induced.provenance.get('model_hash') != model.fingerprint():
                raise InvalidArgumentError("The IMDP file was induced from a different model")
            bounds = solve_bounds(induced, **self.solver_options(options))
            solution = bounds.upper if options['strategy_mode'] == 'max' else bounds.lower
            policy = induced.policy(model, solution.strategy)
        estimate = mc_expected_cost(
            model, policy, options['start'],
            options['horizon'] or bounds_setting('MC_HORIZON'),
            options['runs'] or bounds_setting('MC_RUNS'),
            bounds_setting('MC_SEED') if options['seed'] is None else options['seed'],
        )
        self.stdout.write(json.dumps(estimate.to_document(), sort_keys=True))
