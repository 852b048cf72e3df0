import os
import shutil
import tempfile
import unittest

import numpy as np
from django.test import SimpleTestCase

from ..abstraction import induce, solve_bounds
from ..analysis import (
    agreement_map,
    agreement_rows,
    check_dtv_lemma,
    count_out_of_bounds,
    dtv,
    expectation_gap,
    extract_section,
    import_external_strategy,
    mixture_gap,
    sandwich_probes,
    section_rows,
    tight_case_ratio,
)
from ..emdp import ActionSpec, WalkerModel
from ..exceptions import DomainViolationError, InvalidArgumentError, ParseError
from ..geometry import GridPartition
from ..imdp import Strategy


class TestTotalVariation(unittest.TestCase):
    def test_examples(self):
        """Test total variation on small vectors"""
        self.assertAlmostEqual(dtv([0.5, 0.5], [0.7, 0.3]), 0.2)
        self.assertEqual(dtv([0.2, 0.8], [0.2, 0.8]), 0.0)
        self.assertEqual(dtv([1, 0, 0], [0, 0, 1]), 1.0)

    def test_rejects_non_distributions(self):
        """Test inputs must be probability vectors of equal length"""
        with self.assertRaises(InvalidArgumentError):
            dtv([0.5, 0.6], [0.5, 0.5])
        with self.assertRaises(InvalidArgumentError):
            dtv([0.5, 0.5], [1.0, 0.0, 0.0])

    def test_metric_axioms(self):
        """Test symmetry and the triangle inequality on random vectors"""
        rng = np.random.default_rng(0)
        for _ in range(200):
            p, q, r = rng.dirichlet(np.ones(6), size=3)
            self.assertAlmostEqual(dtv(p, q), dtv(q, p))
            self.assertLessEqual(dtv(p, r), dtv(p, q) + dtv(q, r) + 1e-12)

    def test_zero_perturbation(self):
        """Test both sides vanish without perturbation"""
        p = np.array([0.3, 0.7])
        f = np.array([1.0, 4.0])
        self.assertEqual(expectation_gap(p, p, f, f), (0.0, 0.0))
        kernels = np.array([[0.5, 0.5], [0.1, 0.9]])
        self.assertEqual(mixture_gap(p, p, kernels, kernels), (0.0, 0.0))

    def test_randomised_lemma(self):
        """Test ten thousand random trials without violations"""
        report = check_dtv_lemma(10000, np.random.default_rng(2024))
        self.assertEqual(report.trials, 10000)
        self.assertTrue(report.ok)
        self.assertLessEqual(report.max_ratio_a, 1.0)
        self.assertLessEqual(report.max_ratio_b, 1.0)

    def test_tight_case(self):
        """Test the constructed two-point instance nearly attains the bound"""
        self.assertGreaterEqual(tight_case_ratio(0.1), 0.99)
        self.assertLessEqual(tight_case_ratio(0.1), 1.0)


class BoundsFixture(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.model = WalkerModel.default()
        cls.partition = GridPartition.uniform(cls.model.domain, 0.1)
        cls.induced = induce(cls.model, cls.partition)
        cls.bounds = solve_bounds(cls.induced)


class TestSections(BoundsFixture):
    def test_bottom_row(self):
        """Test the section at t = 0 has one sample per column"""
        section = extract_section(self.bounds, (1, 0.0))
        self.assertEqual(len(section.samples), 12)
        self.assertEqual(section.free_axis, 0)
        xs = [s.x for s in section.samples]
        self.assertEqual(xs, sorted(xs))
        self.assertTrue(np.all(section.widths >= -1e-9))

    def test_goal_column_zero(self):
        """Test goal cells of a section have zero bounds"""
        section = extract_section(self.bounds, (1, 0.7))
        goal = [s for s in section.samples if s.region[0] >= 10]
        self.assertEqual(len(goal), 2)
        for sample in goal:
            self.assertEqual((sample.e_min, sample.e_max), (0.0, 0.0))

    def test_vertical_section(self):
        """Test fixing x gives a section along t"""
        section = extract_section(self.bounds, (0, 0.55))
        self.assertEqual(section.free_axis, 1)
        self.assertTrue(all(s.region[0] == 5 for s in section.samples))

    def test_outside_domain(self):
        """Test a section line outside the domain"""
        with self.assertRaises(DomainViolationError):
            extract_section(self.bounds, (1, 1.5))

    def test_rows(self):
        """Test section CSV rows"""
        external = np.full(self.partition.n_regions, np.nan)
        external[self.partition.flat_index((3, 0))] = 4.0
        section = extract_section(self.bounds, (1, 0.0), external)
        header, rows = section_rows(section, self.partition)
        self.assertEqual(header[-1], 'external')
        self.assertEqual(rows[3][-1], 4.0)
        self.assertIsNone(rows[4][-1])


class TestAgreement(BoundsFixture):
    def test_identical_strategies(self):
        """Test identical strategies agree everywhere"""
        sigma = self.bounds.lower.strategy
        agreement = agreement_map(self.induced, sigma, sigma, sigma)
        self.assertEqual(agreement.fraction_agreeing(), 1.0)
        self.assertEqual(len(agreement.regions), 100)
        self.assertTrue(all(c.startswith('both-') for c in agreement.classes))

    def test_disagreement_classes(self):
        """Test the labels of disagreeing cells"""
        states, actions = self.induced.imdp.states, self.induced.imdp.actions
        goal = self.induced.imdp.goal_mask
        fast = Strategy(states, actions, np.where(goal, -1, 0))
        slow = Strategy(states, actions, np.where(goal, -1, 1))
        agreement = agreement_map(self.induced, fast, slow)
        self.assertEqual(agreement.counts, {'low-fast-high-slow': 100})
        agreement = agreement_map(self.induced, fast, fast, slow)
        self.assertEqual(agreement.counts, {'external-disagrees-slow': 100})
        self.assertEqual(agreement.fraction_agreeing(), 0.0)
        header, rows = agreement_rows(agreement, self.partition)
        self.assertEqual(len(rows), 100)
        self.assertEqual(rows[0][header.index('class_id')], 0)


class TestExternalStrategy(BoundsFixture):
    def setUp(self):
        self.test_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.test_dir)

    def open_regions(self):
        return [self.partition.region_id(f) for f in np.flatnonzero(~self.induced.terminal_cells)]

    def write(self, rows, header='lo_0,lo_1,hi_0,hi_1,action,value'):
        path = os.path.join(self.test_dir, 'external.csv')
        with open(path, 'w', encoding='utf-8') as handle:
            handle.write(header + '\n')
            for row in rows:
                handle.write(','.join(str(v) for v in row) + '\n')
        return path

    def row(self, region, action='slow', value=''):
        box = self.partition.region_box(region)
        return [*box.lo, *box.hi, action, value]

    def test_full_cover(self):
        """Test a strategy covering every non-terminal cell"""
        rows = []
        for region in self.open_regions():
            flat = self.partition.flat_index(region)
            middle = (self.bounds.e_min[flat] + self.bounds.e_max[flat]) / 2
            rows.append(self.row(region, value=repr(float(middle))))
        external = import_external_strategy(self.write(rows), self.induced)
        self.assertTrue(external.total)
        self.assertEqual(external.strategy.action(self.partition.flat_index((0, 0))), 'slow')
        self.assertEqual(count_out_of_bounds(external.values, self.bounds), (0, 100))

    def test_values_outside_bounds(self):
        """Test learned values outside the bounds are counted"""
        rows = [self.row(region, value='1000.0') for region in self.open_regions()]
        external = import_external_strategy(self.write(rows), self.induced)
        self.assertEqual(count_out_of_bounds(external.values, self.bounds), (100, 100))

    def test_coarse_region(self):
        """Test one row may cover several aligned cells"""
        rows = [[0.0, 0.0, 1.0, 1.0, 'fast', '']]
        external = import_external_strategy(self.write(rows), self.induced)
        self.assertTrue(external.total)
        self.assertIsNone(external.values)

    def test_missing_cell(self):
        """Test uncovered cells are reported"""
        rows = [self.row(region) for region in self.open_regions()[1:]]
        external = import_external_strategy(self.write(rows), self.induced)
        self.assertEqual(external.uncovered, ((0, 0),))
        self.assertFalse(external.total)

    def test_overlap(self):
        """Test overlapping regions are rejected with their line"""
        rows = [self.row((0, 0)), self.row((0, 1)), self.row((0, 0), action='fast')]
        with self.assertRaises(ParseError) as ctx:
            import_external_strategy(self.write(rows), self.induced)
        self.assertEqual(ctx.exception.line, 4)

    def test_unknown_action(self):
        """Test actions must exist in the IMDP"""
        with self.assertRaises(ParseError) as ctx:
            import_external_strategy(self.write([self.row((0, 0), action='crawl')]), self.induced)
        self.assertEqual(ctx.exception.line, 2)

    def test_unaligned_region(self):
        """Test regions must be unions of cells"""
        with self.assertRaises(ParseError):
            import_external_strategy(self.write([[0.0, 0.0, 0.15, 0.1, 'slow', '']]), self.induced)

    def test_missing_columns(self):
        """Test the header must name the box columns"""
        with self.assertRaises(ParseError):
            import_external_strategy(self.write([], header='x,t,action'), self.induced)


class TestSandwichProbes(BoundsFixture):
    def test_probe_report(self):
        """Test probes land in non-terminal cells and are reproducible"""
        first = sandwich_probes(self.model, self.bounds, 3, 200, 100, seed=5)
        again = sandwich_probes(self.model, self.bounds, 3, 200, 100, seed=5)
        self.assertEqual(first.to_document(), again.to_document())
        self.assertEqual(len(first.probes), 3)
        for probe in first.probes:
            self.assertIsNone(self.model.terminal_kind(probe.point))
            self.assertEqual(self.partition.region_of(probe.point), probe.region)
            self.assertLessEqual(probe.e_min, probe.e_max)

    def test_other_model_rejected(self):
        """Test bounds of a different model are refused"""
        other = WalkerModel(self.model.domain, self.model.goal, self.model.failure,
                            (ActionSpec('fast', (0.2, 0.05), 0.1, 3.0),
                             ActionSpec('slow', (0.1, 0.1), 0.1, 1.0)))
        with self.assertRaises(InvalidArgumentError):
            sandwich_probes(other, self.bounds, 1, 10, 10, seed=1)
