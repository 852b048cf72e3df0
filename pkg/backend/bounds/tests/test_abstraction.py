import numpy as np
from django.test import SimpleTestCase

from ..abstraction import (
    FAILURE_LABEL,
    GOAL_LABEL,
    CredalMode,
    InducedImdp,
    bounded_horizon_gap,
    check_refinement_monotonicity,
    induce,
    nest_bounds,
    nested_levels,
    refinement_sequence,
    solve_bounds,
)
from ..emdp import WalkerModel
from ..exceptions import ConsistencyError, InvalidSequenceError
from ..geometry import GridPartition
from ..imdp import IntervalCredal


class TestInduce(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.model = WalkerModel.default()
        cls.partition = GridPartition.uniform(cls.model.domain, 0.1)
        cls.interval = induce(cls.model, cls.partition, CredalMode.INTERVAL)
        cls.candidates = induce(cls.model, cls.partition, CredalMode.CANDIDATES, samples_per_axis=5)

    def test_region_states(self):
        """Test one state per cell plus the named terminals"""
        self.assertEqual(self.interval.n_regions, 144)
        self.assertEqual(self.interval.imdp.n_states, 146)
        self.assertEqual(self.interval.imdp.states[-2:], (GOAL_LABEL, FAILURE_LABEL))
        self.assertEqual(self.interval.imdp.states[13], 'r1_1')

    def test_terminal_cells_absorbing(self):
        """Test goal and failure cells loop on themselves at zero cost"""
        goal_cell = self.partition.flat_index((10, 3))
        fail_cell = self.partition.flat_index((4, 11))
        self.assertTrue(self.interval.goal_cells[goal_cell])
        self.assertTrue(self.interval.failure_cells[fail_cell])
        for cell in (goal_cell, fail_cell):
            self.assertIn(cell, self.interval.imdp.goal)
            credal, cost = self.interval.imdp.entry(cell, 0)
            self.assertEqual(credal.support.tolist(), [cell])
            self.assertEqual(cost.c_max, 0.0)

    def test_interval_rows_feasible(self):
        """Test every interval row admits a distribution"""
        for (s, a), (credal, cost) in self.interval.imdp.table.items():
            if s in self.interval.imdp.goal:
                continue
            self.assertIsInstance(credal, IntervalCredal)
            self.assertLessEqual(credal.p_low.sum(), 1.0 + 1e-9)
            self.assertGreaterEqual(credal.p_high.sum(), 1.0 - 1e-9)
            self.assertGreaterEqual(cost.c_min, self.model.actions[a].cost)

    def test_interval_contains_candidates(self):
        """Test interval bounds enclose every lattice candidate"""
        rng = np.random.default_rng(17)
        open_cells = np.flatnonzero(~self.interval.terminal_cells)
        n = self.interval.imdp.n_states
        for _ in range(50):
            cell = int(rng.choice(open_cells))
            action = int(rng.integers(0, 2))
            outer, outer_cost = self.interval.imdp.entry(cell, action)
            inner, inner_cost = self.candidates.imdp.entry(cell, action)
            for vector in inner.dense(n):
                self.assertTrue(outer.contains(vector, tol=1e-9))
            self.assertLessEqual(outer_cost.c_min, inner_cost.c_min + 1e-9)
            self.assertGreaterEqual(outer_cost.c_max, inner_cost.c_max - 1e-9)

    def test_provenance(self):
        """Test the provenance header and soundness flag"""
        self.assertTrue(self.interval.sound)
        self.assertFalse(self.candidates.sound)
        provenance = self.candidates.provenance
        self.assertEqual(provenance['mode'], 'candidates')
        self.assertEqual(provenance['samples_per_axis'], 5)
        self.assertEqual(provenance['model_hash'], self.model.fingerprint())

    def test_document_round_trip(self):
        """Test induced IMDP documents keep partition and terminal cells"""
        again = InducedImdp.from_document(self.interval.to_document())
        self.assertEqual(again.partition.counts, (12, 12))
        np.testing.assert_array_equal(again.goal_cells, self.interval.goal_cells)
        np.testing.assert_array_equal(again.failure_cells, self.interval.failure_cells)
        self.assertEqual(again.imdp.states, self.interval.imdp.states)
        self.assertEqual(again.mode, CredalMode.INTERVAL)

    def test_inconsistent_partition(self):
        """Test cells straddling the goal boundary are rejected"""
        with self.assertRaises(ConsistencyError) as ctx:
            induce(self.model, GridPartition.uniform(self.model.domain, 0.07))
        self.assertIsNotNone(ctx.exception.cell)

    def test_thread_count_does_not_change_result(self):
        """Test parallel induction gives the same document"""
        parallel = induce(self.model, self.partition, CredalMode.INTERVAL, threads=2)
        self.assertEqual(parallel.to_document(), self.interval.to_document())


class TestRefinement(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.model = WalkerModel.default()
        cls.sequence = refinement_sequence(cls.model, [0.1, 0.05])
        cls.raw = [solve_bounds(induced) for induced in cls.sequence]
        cls.bounds = nested_levels(cls.raw)

    def test_sequence_sizes(self):
        """Test region counts of nested widths"""
        self.assertEqual([s.n_regions for s in self.sequence], [144, 576])
        self.assertIsNone(self.sequence[0].provenance['nested_in'])
        self.assertEqual(self.sequence[1].provenance['nested_in'], [0.1, 0.1])

    def test_single_width(self):
        """Test a one-element sequence"""
        self.assertEqual(len(refinement_sequence(self.model, [0.1])), 1)

    def test_invalid_sequences(self):
        """Test widths that do not nest"""
        with self.assertRaises(InvalidSequenceError):
            refinement_sequence(self.model, [0.1, 0.04])
        with self.assertRaises(InvalidSequenceError):
            refinement_sequence(self.model, [])

    def test_lower_below_upper(self):
        """Test E^min never exceeds E^max"""
        for bounds in self.bounds:
            self.assertTrue(bounds.converged)
            self.assertTrue(np.all(bounds.e_min <= bounds.e_max + 1e-9))
            self.assertTrue(np.all(np.isfinite(bounds.e_max)))

    def test_goal_cells_zero(self):
        """Test terminal cells have zero cost"""
        for bounds in self.bounds:
            terminal = bounds.induced.terminal_cells
            self.assertTrue(np.all(bounds.e_min[terminal] == 0.0))
            self.assertTrue(np.all(bounds.e_max[terminal] == 0.0))

    def test_identical_partitions(self):
        """Test a bound pair is monotone against itself"""
        report = check_refinement_monotonicity(self.bounds[0], self.bounds[0])
        self.assertTrue(report.ok)
        self.assertEqual(report.checked, 144)

    def test_refinement_monotone(self):
        """Test finer cells never widen the bounds of their parent"""
        report = check_refinement_monotonicity(self.bounds[0], self.bounds[1])
        self.assertEqual(report.checked, 576)
        self.assertEqual(report.violations, ())
        self.assertTrue(report.sound)
        self.assertEqual(report.raw_violations, 0)
        self.assertIn('raw_violations', report.to_document())

    def test_nesting_only_tightens(self):
        """Test nested bounds lie inside the solver bounds"""
        self.assertIs(self.bounds[0], self.raw[0])
        fine = self.bounds[1]
        self.assertTrue(np.all(fine.e_min >= fine.raw_e_min))
        self.assertTrue(np.all(fine.e_max <= fine.raw_e_max))
        self.assertLessEqual(fine.mean_width, fine.raw_mean_width)

    def test_nesting_skips_candidates(self):
        """Test candidates-mode pairs are returned unchanged"""
        sequence = refinement_sequence(self.model, [0.1, 0.05], CredalMode.CANDIDATES, samples_per_axis=1)
        coarse, fine = (solve_bounds(induced) for induced in sequence)
        self.assertIs(nest_bounds(coarse, fine), fine)
        self.assertFalse(check_refinement_monotonicity(coarse, fine).sound)

    def test_mean_width_shrinks(self):
        """Test refinement narrows the bounds on average"""
        self.assertLess(self.bounds[1].mean_width, self.bounds[0].mean_width)

    def test_bounded_horizon_gap(self):
        """Test the bounded-horizon gap is non-negative and finite"""
        gap = bounded_horizon_gap(self.bounds[0], 5)
        self.assertGreaterEqual(gap, 0.0)
        self.assertTrue(np.isfinite(gap))

    def test_summary(self):
        """Test the per-level summary"""
        summary = self.bounds[0].summary()
        self.assertEqual(summary['regions'], 144)
        self.assertEqual(summary['widths'], [0.1, 0.1])
        self.assertTrue(summary['min_report']['converged'])
