import hashlib
import json
import os

import numpy as np
from django.conf import settings

from bounds import __version__
from bounds.abstraction import (
    bounded_horizon_gap,
    check_refinement_monotonicity,
    nested_levels,
    refinement_sequence,
    solve_bounds,
)
from bounds.analysis import (
    agreement_map,
    agreement_plot_script,
    agreement_rows,
    count_out_of_bounds,
    extract_section,
    import_external_strategy,
    sandwich_probes,
    section_plot_script,
    section_rows,
)
from bounds.emdp import load_model
from bounds.exceptions import ConvergenceError
from bounds.models import ExperimentRun
from bounds.serializers import RunConfigSerializer

from ._base import BoundsCommand, logger, read_json, width_tag

DEFAULT_CONFIG = os.path.join(settings.BASE_DIR, 'experiments', 'default.json')

# Options that change where or how fast results are produced, not the results.
NON_SEMANTIC = ('output_dir', 'threads')


def config_hash(config):
    canonical = {k: v for k, v in config.items() if k not in NON_SEMANTIC}
    return hashlib.sha256(json.dumps(canonical, sort_keys=True).encode('utf-8')).hexdigest()


def strictly_decreasing(values):
    return all(b < a for a, b in zip(values, values[1:]))


def non_increasing(values):
    return all(b <= a for a, b in zip(values, values[1:]))


class Command(BoundsCommand):
    help = 'Run the full bounds experiment: induce, solve, check, sections, agreement maps, Monte-Carlo probes'

    def add_arguments(self, parser):
        parser.add_argument('--config', default=DEFAULT_CONFIG, help='Experiment config JSON file')
        parser.add_argument('--width', type=float, action='append', dest='widths', help='Override the widths')
        parser.add_argument('--mode', choices=['interval', 'candidates'], default=None)
        parser.add_argument('--seed', type=int, default=None, help='Override the Monte-Carlo seed')
        parser.add_argument('--runs', type=int, default=None, help='Override the Monte-Carlo run count')
        parser.add_argument('--probes', type=int, default=None, help='Override the number of probe states')
        parser.add_argument('--external', default=None, help='External strategy CSV')
        self.add_threads_argument(parser)
        self.add_output_argument(parser)

    def run(self, *args, **options):
        self.stage = 'config'
        config_path = options['config']
        raw = read_json(config_path)
        overrides = {
            'widths': options['widths'], 'mode': options['mode'], 'mc_seed': options['seed'],
            'mc_runs': options['runs'], 'mc_probes': options['probes'], 'external': options['external'],
            'threads': options['threads'], 'output_dir': options['output'],
        }
        serializer = RunConfigSerializer(data={**raw, **{k: v for k, v in overrides.items() if v is not None}})
        serializer.is_valid(raise_exception=True)
        config = dict(serializer.validated_data)
        base_dir = os.path.dirname(os.path.abspath(config_path))
        for key in ('model', 'external'):
            if config.get(key) and not os.path.isabs(config[key]) and key not in overrides_given(overrides):
                config[key] = os.path.join(base_dir, config[key])

        self.stage = 'model'
        model = load_model(config['model'])
        storage = self.storage({'output': config['output_dir']})
        record = ExperimentRun.objects.create(
            config_hash=config_hash({**config, 'model': model.fingerprint(), 'external': None}),
            model_hash=model.fingerprint(), widths=list(config['widths']), mode=config['mode'],
            output_dir=str(storage.location),
        )
        try:
            summary = self.pipeline(model, config, storage)
        except Exception:
            record.finish('failed')
            raise
        summary['config_hash'] = record.config_hash
        path = storage.write_json('summary.json', summary)
        converged = summary['converged']
        record.finish('completed' if converged else 'not-converged', summary)
        self.stdout.write(path)
        if not converged:
            self.stage = 'vi'
            raise ConvergenceError("value iteration stopped at max_iter for at least one width")

    def pipeline(self, model, config, storage):
        self.stage = 'induce'
        sequence = refinement_sequence(model, config['widths'], config['mode'],
                                       config['samples_per_axis'], config['threads'])
        for induced in sequence:
            storage.write_json(f"imdp_{width_tag(induced.partition.widths[0])}.json", induced.to_document())

        self.stage = 'vi'
        solver = {'tol': config['tol'], 'max_iter': config['max_iter'], 'divergence_cap': config['divergence_cap']}
        levels = nested_levels([solve_bounds(induced, **solver) for induced in sequence])
        for bounds in levels:
            tag = width_tag(bounds.induced.partition.widths[0])
            partition = bounds.induced.partition
            rows = [[f, *partition.region_id(f), lo, hi, raw_lo, raw_hi]
                    for f, (lo, hi, raw_lo, raw_hi) in enumerate(zip(bounds.e_min, bounds.e_max,
                                                                     bounds.raw_e_min, bounds.raw_e_max))]
            storage.write_csv(f"values_{tag}.csv", ['region', 'i', 'j', 'e_min', 'e_max', 'raw_e_min', 'raw_e_max'],
                              rows)

        self.stage = 'refine_check'
        monotonicity = []
        for coarse, fine in zip(levels, levels[1:]):
            report = check_refinement_monotonicity(coarse, fine)
            monotonicity.append({'coarse': list(coarse.induced.partition.widths),
                                 'fine': list(fine.induced.partition.widths),
                                 'checked': report.checked, 'violations': len(report.violations),
                                 'raw_violations': report.raw_violations})
            storage.write_json(f"refine_check_{width_tag(coarse.induced.partition.widths[0])}_"
                               f"{width_tag(fine.induced.partition.widths[0])}.json", report.to_document())

        self.stage = 'bounded_horizon'
        gaps = [bounded_horizon_gap(bounds, config['bounded_horizon_steps']) for bounds in levels]

        finest = levels[-1]
        external = None
        if config.get('external'):
            self.stage = 'external'
            external = import_external_strategy(config['external'], finest.induced)

        self.stage = 'section'
        for bounds in levels:
            tag = width_tag(bounds.induced.partition.widths[0])
            values = external.values if external is not None and bounds is finest else None
            for t in config['section_times']:
                section = extract_section(bounds, (1, t), values)
                csv_name = f"section_{tag}_t{t!r}.csv"
                header, rows = section_rows(section, bounds.induced.partition)
                storage.write_csv(csv_name, header, rows)
                storage.write_text(csv_name[:-4] + '.gp', section_plot_script(csv_name, f"width {tag}, t = {t}"))

        self.stage = 'agreement'
        agreements = []
        for bounds in levels:
            tag = width_tag(bounds.induced.partition.widths[0])
            ext = external.strategy if external is not None and bounds is finest else None
            agreement = agreement_map(bounds.induced, bounds.lower.strategy, bounds.upper.strategy, ext)
            agreements.append(agreement)
            header, rows = agreement_rows(agreement, bounds.induced.partition)
            storage.write_csv(f"agreement_{tag}.csv", header, rows)
            storage.write_text(f"agreement_{tag}.gp", agreement_plot_script(f"agreement_{tag}.csv", f"width {tag}"))

        mc = None
        if config['mc_probes'] > 0:
            self.stage = 'mc'
            probes = sandwich_probes(model, finest, config['mc_probes'], config['mc_runs'],
                                     config['mc_horizon'], config['mc_seed'])
            storage.write_json('mc_probes.json', probes.to_document())
            mc = {'probes': len(probes.probes), 'contained': probes.contained, 'rate': probes.rate,
                  'runs': config['mc_runs'], 'horizon': config['mc_horizon'], 'seed': config['mc_seed']}

        mean_widths = [b.mean_width for b in levels]
        summary = {
            'version': __version__,
            'model_hash': model.fingerprint(),
            'mode': config['mode'],
            'sound': all(b.induced.sound for b in levels),
            'converged': all(b.converged for b in levels),
            'levels': [{
                **bounds.summary(),
                'bounded_horizon_gap': gap,
                'agreement': agreement.counts,
                'agreeing_fraction': agreement.fraction_agreeing(),
                'infinite_cells': int(np.count_nonzero(~np.isfinite(bounds.e_max))),
            } for bounds, gap, agreement in zip(levels, gaps, agreements)],
            'mean_width_strictly_decreasing': strictly_decreasing(mean_widths),
            'bounded_horizon_steps': config['bounded_horizon_steps'],
            'bounded_horizon_gap_non_increasing': non_increasing(gaps),
            'monotonicity': monotonicity,
            'mc': mc,
        }
        if external is not None:
            summary['external'] = {'uncovered': len(external.uncovered)}
            if external.values is not None:
                count, checked = count_out_of_bounds(external.values, finest, tol=2 * config['tol'])
                summary['external'].update({'out_of_bounds': count, 'checked': checked})
        if not summary['sound']:
            logger.warning("Experiment used candidates credal sets; the bounds are not guaranteed")
        logger.info(f"Experiment finished: mean widths {mean_widths}, bounded-horizon gaps {gaps}")
        return summary


def overrides_given(overrides):
    return {k for k, v in overrides.items() if v is not None}
