import csv
import json
import os
import shutil
import tempfile
import time
from io import StringIO

from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import TestCase

from ..exceptions import EXIT_NONCONVERGENCE
from ..models import ExperimentRun

EXPERIMENTS = os.path.join(settings.BASE_DIR, 'experiments')
WALKER = os.path.join(EXPERIMENTS, 'walker.json')


def read_rows(path):
    with open(path, newline='', encoding='utf-8') as handle:
        return list(csv.DictReader(handle))


def write_config(directory, **fields):
    path = os.path.join(directory, 'config.json')
    with open(path, 'w', encoding='utf-8') as handle:
        json.dump({'model': WALKER, **fields}, handle)
    return path


class TestWalkerExperiment(TestCase):
    """The default experiment: three nested widths in interval mode with 20 Monte-Carlo probes."""

    @classmethod
    def setUpTestData(cls):
        cls.output = tempfile.mkdtemp()
        start_time = time.time()
        call_command('experiment', output=cls.output, stdout=StringIO())
        cls.duration = time.time() - start_time
        with open(os.path.join(cls.output, 'summary.json'), encoding='utf-8') as handle:
            cls.summary = json.load(handle)

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.output)
        super().tearDownClass()

    def test_levels(self):
        """Test one summary entry per width, all converged"""
        self.assertEqual([level['regions'] for level in self.summary['levels']], [144, 576, 2304])
        self.assertTrue(self.summary['converged'])
        self.assertTrue(self.summary['sound'])
        for level in self.summary['levels']:
            self.assertEqual(level['infinite_cells'], 0)

    def test_refinement_monotone(self):
        """Test no fine cell loosens the bounds of its parent"""
        self.assertEqual(len(self.summary['monotonicity']), 2)
        for entry in self.summary['monotonicity']:
            self.assertEqual(entry['violations'], 0)
            self.assertEqual(entry['raw_violations'], 0, entry)
        with open(os.path.join(self.output, 'refine_check_0.05_0.025.json'), encoding='utf-8') as handle:
            self.assertEqual(json.load(handle)['checked'], 2304)

    def test_mean_width_decreases(self):
        """Test bounds narrow with each refinement"""
        widths = [level['mean_width'] for level in self.summary['levels']]
        self.assertTrue(self.summary['mean_width_strictly_decreasing'], widths)
        self.assertLess(widths[2], widths[1])
        self.assertLess(widths[1], widths[0])

    def test_monte_carlo_sandwich(self):
        """Test Monte-Carlo estimates of the max strategy fall inside their cell bounds"""
        mc = self.summary['mc']
        self.assertEqual((mc['probes'], mc['runs'], mc['horizon']), (20, 10000, 200))
        self.assertGreaterEqual(mc['contained'], 19)

    def test_bounded_horizon_gap(self):
        """Test the five-step gap does not grow with refinement"""
        gaps = [level['bounded_horizon_gap'] for level in self.summary['levels']]
        self.assertEqual(self.summary['bounded_horizon_steps'], 5)
        self.assertTrue(self.summary['bounded_horizon_gap_non_increasing'], gaps)

    def test_terminal_cells_zero(self):
        """Test goal and failure cells have zero bounds at the finest width"""
        rows = read_rows(os.path.join(self.output, 'values_0.025.csv'))
        self.assertEqual(len(rows), 2304)
        terminal = [r for r in rows if int(r['i']) >= 40 or int(r['j']) >= 40]
        self.assertEqual(len(terminal), 2304 - 1600)
        for row in terminal:
            self.assertEqual((float(row['e_min']), float(row['e_max'])), (0.0, 0.0))

    def test_section_narrows(self):
        """Test the t = 0.7 section of the finest width lies inside the coarsest one"""
        coarse = read_rows(os.path.join(self.output, 'section_0.1_t0.7.csv'))
        fine = read_rows(os.path.join(self.output, 'section_0.025_t0.7.csv'))
        self.assertEqual((len(coarse), len(fine)), (12, 48))
        for row in fine:
            parent = coarse[int(row['i']) // 4]
            self.assertGreaterEqual(float(row['e_min']), float(parent['e_min']) - 1e-9)
            self.assertLessEqual(float(row['e_max']), float(parent['e_max']) + 1e-9)
        self.assertTrue(os.path.exists(os.path.join(self.output, 'section_0.025_t0.0.gp')))

    def test_artifacts(self):
        """Test the bundle holds every per-width artifact"""
        for tag in ('0.1', '0.05', '0.025'):
            for name in (f'imdp_{tag}.json', f'values_{tag}.csv', f'agreement_{tag}.csv', f'agreement_{tag}.gp'):
                self.assertTrue(os.path.exists(os.path.join(self.output, name)), name)
        self.assertTrue(os.path.exists(os.path.join(self.output, 'mc_probes.json')))

    def test_run_recorded(self):
        """Test the registry entry of the run"""
        run = ExperimentRun.objects.get(output_dir=self.output)
        self.assertEqual(run.status, 'completed')
        self.assertEqual(run.widths, [0.1, 0.05, 0.025])
        self.assertEqual(run.summary['config_hash'], self.summary['config_hash'])

    def test_duration(self):
        """Test the full experiment completes in reasonable time"""
        self.assertLess(self.duration, 600.0)


class TestExperimentVariants(TestCase):
    def setUp(self):
        self.test_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.test_dir)

    def run_experiment(self, config, name, **options):
        output = os.path.join(self.test_dir, name)
        call_command('experiment', config=config, output=output, stdout=StringIO(), **options)
        return output

    def test_byte_identical_reruns(self):
        """Test two runs of one configuration write identical summaries and tables"""
        config = write_config(self.test_dir, widths=[0.1, 0.05], mc_runs=200, mc_probes=3, mc_horizon=100)
        first = self.run_experiment(config, 'first')
        second = self.run_experiment(config, 'second', threads=2)
        for name in ('summary.json', 'values_0.05.csv', 'mc_probes.json', 'agreement_0.1.csv'):
            with open(os.path.join(first, name), 'rb') as a, open(os.path.join(second, name), 'rb') as b:
                self.assertEqual(a.read(), b.read(), name)

    def test_candidates_mode(self):
        """Test candidates mode is reported as not sound"""
        config = write_config(self.test_dir, widths=[0.1], mode='candidates', mc_probes=0)
        output = self.run_experiment(config, 'candidates')
        with open(os.path.join(output, 'summary.json'), encoding='utf-8') as handle:
            summary = json.load(handle)
        self.assertFalse(summary['sound'])
        self.assertIsNone(summary['mc'])
        self.assertEqual(summary['monotonicity'], [])

    def test_external_strategy(self):
        """Test an external strategy is compared on the finest width"""
        external = os.path.join(self.test_dir, 'external.csv')
        with open(external, 'w', encoding='utf-8') as handle:
            handle.write('lo_0,lo_1,hi_0,hi_1,action,value\n0.0,0.0,1.0,1.0,fast,\n')
        config = write_config(self.test_dir, widths=[0.1], mc_probes=0)
        output = self.run_experiment(config, 'external', external=external)
        with open(os.path.join(output, 'summary.json'), encoding='utf-8') as handle:
            summary = json.load(handle)
        self.assertEqual(summary['external'], {'uncovered': 0})

    def test_not_converged(self):
        """Test a sweep budget that is too small"""
        config = write_config(self.test_dir, widths=[0.1], max_iter=2, mc_probes=0)
        with self.assertRaises(CommandError) as ctx:
            self.run_experiment(config, 'short')
        self.assertEqual(ctx.exception.returncode, EXIT_NONCONVERGENCE)
        run = ExperimentRun.objects.get()
        self.assertEqual(run.status, 'not-converged')
        self.assertFalse(run.summary['converged'])

    def test_invalid_config(self):
        """Test widths that do not nest abort before any work"""
        config = write_config(self.test_dir, widths=[0.1, 0.04])
        with self.assertRaises(CommandError):
            self.run_experiment(config, 'invalid')
        self.assertFalse(ExperimentRun.objects.exists())
