"""
Induced IMDPs of a walker model over grid partitions.

Every partition cell becomes one IMDP state. Two named terminal states,
``goal`` and ``failure``, collect the probability mass entering the goal and
failure regions; cells inside those regions stay in the IMDP as absorbing
zero-cost states.
"""
import itertools
import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np
from joblib import Parallel, delayed

from . import __version__
from .emdp import RegionPolicy
from .exceptions import (
    ConsistencyError,
    DegenerateKernelError,
    InvalidArgumentError,
    InvalidSequenceError,
)
from .geometry import (
    ALIGN_TOL,
    GridPartition,
    axis_bounds_table,
    axis_fraction_table,
    product_support,
    product_values,
)
from .imdp import (
    CandidateCredal,
    CostInterval,
    Imdp,
    IntervalCredal,
    Mode,
    bounded_horizon_values,
    value_iteration,
)

logger = logging.getLogger(__name__)

GOAL_LABEL = 'goal'
FAILURE_LABEL = 'failure'


class CredalMode(str, Enum):
    INTERVAL = 'interval'
    CANDIDATES = 'candidates'

    @classmethod
    def parse(cls, value):
        try:
            return cls(value)
        except ValueError:
            raise InvalidArgumentError(f"Credal mode must be 'interval' or 'candidates', got {value!r}") from None


def cell_label(region):
    return 'r' + '_'.join(str(k) for k in region)


@dataclass(frozen=True, eq=False)
class InducedImdp:
    imdp: Imdp
    partition: GridPartition
    mode: CredalMode
    provenance: dict
    goal_cells: np.ndarray
    failure_cells: np.ndarray

    @property
    def n_regions(self):
        return self.partition.n_regions

    @property
    def goal_state(self):
        return self.n_regions

    @property
    def failure_state(self):
        return self.n_regions + 1

    @property
    def terminal_cells(self):
        return self.goal_cells | self.failure_cells

    @property
    def sound(self):
        return self.mode is CredalMode.INTERVAL

    def cell_values(self, table):
        """Per-cell slice of a value table, in row-major cell order."""
        values = table.values if hasattr(table, 'values') else np.asarray(table)
        return np.asarray(values)[:self.n_regions]

    def policy(self, model, strategy):
        """The region policy of ``strategy`` for simulation on ``model``."""
        lookup = np.array([model.action_index(name) for name in self.imdp.actions], dtype=np.intp)
        cells = np.asarray(strategy.choice[:self.n_regions])
        choices = np.where(cells < 0, -1, lookup[np.maximum(cells, 0)])
        return RegionPolicy(model, self.partition, choices)

    def to_document(self):
        doc = self.imdp.to_document()
        doc['provenance'] = {
            **self.provenance,
            'partition': self.partition.to_document(),
            'terminal_cells': {'goal': np.flatnonzero(self.goal_cells).tolist(),
                               'failure': np.flatnonzero(self.failure_cells).tolist()},
        }
        return doc

    @classmethod
    def from_document(cls, doc):
        provenance = dict(doc['provenance'])
        partition = GridPartition.from_document(provenance.pop('partition'))
        terminal = provenance.pop('terminal_cells')
        goal_cells = np.zeros(partition.n_regions, dtype=bool)
        failure_cells = np.zeros(partition.n_regions, dtype=bool)
        goal_cells[terminal['goal']] = True
        failure_cells[terminal['failure']] = True
        return cls(Imdp.from_document(doc), partition, CredalMode.parse(provenance['mode']),
                   provenance, goal_cells, failure_cells)


def _check_consistency(model, partition):
    if not (np.allclose(partition.domain.lo, model.domain.lo, atol=ALIGN_TOL)
            and np.allclose(partition.domain.hi, model.domain.hi, atol=ALIGN_TOL)):
        raise InvalidArgumentError("The partition domain differs from the model domain")
    for box, label in ((model.goal, GOAL_LABEL), (model.failure, FAILURE_LABEL)):
        cell = partition.straddling_cell(box)
        if cell is not None:
            raise ConsistencyError(
                f"Cell {cell} {partition.region_box(cell)} straddles the {label} boundary "
                f"for widths {partition.widths}", cell=cell)


def _degenerate(region, spec):
    return DegenerateKernelError(f"Successor box of cell {region} under {spec.name} has zero volume in the domain")


def _interval_entries(model, partition, a, open_cells, nonterminal):
    spec = model.actions[a]
    hw, n = spec.noise_half_width, partition.n_regions
    dims = range(partition.dimension)
    axes = [axis_bounds_table(partition, d, spec.drift[d], hw) for d in dims]
    goal = [axis_bounds_table(partition, d, spec.drift[d], hw, (model.goal.lo[d], model.goal.hi[d]))
            for d in dims]
    fail = [axis_bounds_table(partition, d, spec.drift[d], hw, (model.failure.lo[d], model.failure.hi[d]))
            for d in dims]
    entries = {}
    for flat in open_cells:
        region = partition.region_id(flat)
        lows = [axes[d][0][region[d]] for d in dims]
        highs = [axes[d][1][region[d]] for d in dims]
        if any(np.isnan(row).any() for row in highs):
            raise _degenerate(region, spec)
        supports = [np.flatnonzero(h > 0) for h in highs]
        cells = product_support(partition, supports)
        low = product_values([lows[d][supports[d]] for d in dims])
        high = product_values([highs[d][supports[d]] for d in dims])
        keep = nonterminal[cells]
        g_lo, g_hi = (float(np.prod([t[k][region[d]] for d, t in enumerate(goal)])) for k in (0, 1))
        f_lo, f_hi = (float(np.prod([t[k][region[d]] for d, t in enumerate(fail)])) for k in (0, 1))
        support = np.concatenate([cells[keep], [n, n + 1]])
        p_low = np.concatenate([low[keep], [g_lo, f_lo]])
        p_high = np.concatenate([high[keep], [g_hi, f_hi]])
        used = p_high > 0
        credal = IntervalCredal(support[used], p_low[used], p_high[used])
        cost = CostInterval(spec.cost + model.failure_penalty * f_lo, spec.cost + model.failure_penalty * f_hi)
        entries[(int(flat), a)] = (credal, cost)
    return entries


def _lattice_centres(partition, d, k, drift):
    lo_e, hi_e = partition.axis_cells(d)
    offsets = (np.arange(k) + 0.5) / k
    return (lo_e[:, None] + offsets[None, :] * (hi_e - lo_e)[:, None]).ravel() + drift


def _candidate_entries(model, partition, a, open_cells, nonterminal, k):
    spec = model.actions[a]
    hw, n = spec.noise_half_width, partition.n_regions
    dims = range(partition.dimension)
    centres = [_lattice_centres(partition, d, k, spec.drift[d]) for d in dims]
    axes = [axis_fraction_table(partition, d, centres[d], hw) for d in dims]
    goal = [axis_fraction_table(partition, d, centres[d], hw, (model.goal.lo[d], model.goal.hi[d]))
            for d in dims]
    fail = [axis_fraction_table(partition, d, centres[d], hw, (model.failure.lo[d], model.failure.hi[d]))
            for d in dims]
    lattice = list(itertools.product(range(k), repeat=partition.dimension))
    entries = {}
    for flat in open_cells:
        region = partition.region_id(flat)
        rows = [region[d] * k + np.arange(k) for d in dims]
        blocks = [axes[d][rows[d]] for d in dims]
        if any(np.isnan(b).any() for b in blocks):
            raise _degenerate(region, spec)
        supports = [np.flatnonzero(b.max(axis=0) > 0) for b in blocks]
        cells = product_support(partition, supports)
        keep = nonterminal[cells]
        dists = []
        for point in lattice:
            vector = product_values([blocks[d][point[d], supports[d]] for d in dims])
            g = np.prod([goal[d][rows[d][point[d]]] for d in dims])
            f = np.prod([fail[d][rows[d][point[d]]] for d in dims])
            dists.append(np.concatenate([vector[keep], [g, f]]))
        dists = np.array(dists)
        support = np.concatenate([cells[keep], [n, n + 1]])
        used = dists.max(axis=0) > 0
        dists = dists[:, used]
        dists /= dists.sum(axis=1, keepdims=True)
        support = support[used]
        failure_mass = dists[:, support == n + 1].sum(axis=1)
        cost = CostInterval(spec.cost + model.failure_penalty * failure_mass.min(),
                            spec.cost + model.failure_penalty * failure_mass.max())
        entries[(int(flat), a)] = (CandidateCredal(support, dists), cost)
    return entries


def induce(model, partition, mode=CredalMode.INTERVAL, samples_per_axis=5, threads=1, nested_in=None,
           warn_unsound=True):
    """Build the induced IMDP of ``model`` over ``partition``.

    Interval mode bounds every successor probability over the whole source
    cell and is sound for the expected-cost bounds. Candidates mode evaluates
    the exact kernel at a ``samples_per_axis``-per-axis lattice of points of
    each cell; it approximates the credal set from inside and is flagged as
    not sound in the provenance, and a warning is logged unless
    ``warn_unsound`` is false.
    """
    mode = CredalMode.parse(mode)
    if mode is CredalMode.CANDIDATES and int(samples_per_axis) < 1:
        raise InvalidArgumentError("samples_per_axis must be a positive integer")
    _check_consistency(model, partition)
    goal_cells = partition.region_mask(model.goal)
    failure_cells = partition.region_mask(model.failure)
    terminal = goal_cells | failure_cells
    nonterminal = ~terminal
    open_cells = np.flatnonzero(nonterminal)
    n = partition.n_regions

    def build(a):
        if mode is CredalMode.INTERVAL:
            return _interval_entries(model, partition, a, open_cells, nonterminal)
        return _candidate_entries(model, partition, a, open_cells, nonterminal, int(samples_per_axis))

    table = {}
    # results come back in action order whatever the number of workers
    for entries in Parallel(n_jobs=max(1, int(threads)), prefer='threads')(
            delayed(build)(a) for a in range(len(model.actions))):
        table.update(entries)
    absorbing = CostInterval(0.0, 0.0)
    goal_states = [int(s) for s in np.flatnonzero(terminal)] + [n, n + 1]
    for s in goal_states:
        loop = IntervalCredal.point([s], [1.0])
        for a in range(len(model.actions)):
            table[(s, a)] = (loop, absorbing)

    states = tuple(cell_label(r) for r in partition.regions()) + (GOAL_LABEL, FAILURE_LABEL)
    imdp = Imdp(states, frozenset(goal_states), model.action_names, table)
    provenance = {
        'model': model.name,
        'model_hash': model.fingerprint(),
        'widths': list(partition.widths),
        'mode': mode.value,
        'samples_per_axis': int(samples_per_axis) if mode is CredalMode.CANDIDATES else None,
        'sound': mode is CredalMode.INTERVAL,
        'nested_in': list(nested_in.widths) if nested_in is not None else None,
        'version': __version__,
    }
    logger.info(f"Induced {mode.value} IMDP for widths {partition.widths}: {n} region states, "
                f"{open_cells.size} non-terminal cells, {len(model.actions)} actions")
    if mode is CredalMode.CANDIDATES and warn_unsound:
        logger.warning("Candidates mode approximates credal sets from inside; bounds are not guaranteed")
    return InducedImdp(imdp, partition, mode, provenance, goal_cells, failure_cells)


def refinement_sequence(model, widths, mode=CredalMode.INTERVAL, samples_per_axis=5, threads=1):
    """Induced IMDPs for nested uniform widths, coarsest first."""
    widths = [float(w) for w in widths]
    if not widths or any(w <= 0 for w in widths):
        raise InvalidSequenceError(f"Widths must be a non-empty list of positive numbers, got {widths}")
    partitions = [GridPartition.uniform(model.domain, w) for w in widths]
    for coarse, fine in zip(partitions, partitions[1:]):
        if not fine.refines(coarse):
            raise InvalidSequenceError(
                f"Width {fine.widths[0]} does not subdivide cells of width {coarse.widths[0]}")
    sequence = []
    for i, partition in enumerate(partitions):
        sequence.append(induce(model, partition, mode, samples_per_axis, threads,
                               nested_in=partitions[i - 1] if i else None))
    return sequence


@dataclass(frozen=True, eq=False)
class BoundPair:
    """Lower and upper value-iteration solutions of one induced IMDP.

    ``nested`` holds per-cell ``(e_min, e_max)`` arrays already intersected
    with the bounds of the enclosing coarser cells (see :func:`nest_bounds`);
    ``raw_e_min`` and ``raw_e_max`` are always the solver's own values.
    """

    induced: InducedImdp
    lower: object
    upper: object
    nested: tuple = None

    @property
    def raw_e_min(self):
        return self.induced.cell_values(self.lower.values)

    @property
    def raw_e_max(self):
        return self.induced.cell_values(self.upper.values)

    @property
    def e_min(self):
        return self.raw_e_min if self.nested is None else self.nested[0]

    @property
    def e_max(self):
        return self.raw_e_max if self.nested is None else self.nested[1]

    @property
    def widths(self):
        """Bound widths over non-terminal cells."""
        open_cells = ~self.induced.terminal_cells
        return self.e_max[open_cells] - self.e_min[open_cells]

    @property
    def mean_width(self):
        return float(np.mean(self.widths)) if self.widths.size else 0.0

    @property
    def max_width(self):
        return float(np.max(self.widths)) if self.widths.size else 0.0

    @property
    def raw_mean_width(self):
        open_cells = ~self.induced.terminal_cells
        gaps = self.raw_e_max[open_cells] - self.raw_e_min[open_cells]
        return float(np.mean(gaps)) if gaps.size else 0.0

    @property
    def converged(self):
        return self.lower.report.converged and self.upper.report.converged

    def summary(self):
        return {
            'widths': list(self.induced.partition.widths),
            'regions': self.induced.n_regions,
            'mean_width': self.mean_width,
            'max_width': self.max_width,
            'raw_mean_width': self.raw_mean_width,
            'nested': self.nested is not None,
            'min_report': self.lower.report.to_document(),
            'max_report': self.upper.report.to_document(),
        }


def solve_bounds(induced, tol=1e-9, max_iter=100000, divergence_cap=1e9):
    lower = value_iteration(induced.imdp, Mode.MIN, tol=tol, max_iter=max_iter, divergence_cap=divergence_cap)
    upper = value_iteration(induced.imdp, Mode.MAX, tol=tol, max_iter=max_iter, divergence_cap=divergence_cap)
    pair = BoundPair(induced, lower, upper)
    logger.info(f"Bounds for widths {induced.partition.widths}: mean width {pair.mean_width:.6f}, "
                f"max width {pair.max_width:.6f}")
    return pair


def nest_bounds(coarse, fine):
    """Intersect the bounds of every fine cell with those of its coarse parent.

    In interval mode both pairs bound the expected cost of every point of the
    fine cell, so the intersection is a pair of bounds again. Candidates-mode
    pairs are returned unchanged.
    """
    coarse_partition, fine_partition = coarse.induced.partition, fine.induced.partition
    if not fine_partition.refines(coarse_partition):
        raise InvalidArgumentError(
            f"Partition with widths {fine_partition.widths} does not refine widths {coarse_partition.widths}")
    if not (coarse.induced.sound and fine.induced.sound):
        return fine
    parents = fine_partition.parent_indices(coarse_partition)
    e_max = np.minimum(fine.raw_e_max, coarse.e_max[parents])
    e_min = np.minimum(np.maximum(fine.raw_e_min, coarse.e_min[parents]), e_max)
    tightened = int(np.count_nonzero((e_min > fine.raw_e_min) | (e_max < fine.raw_e_max)))
    if tightened:
        logger.info(f"Nesting in widths {coarse_partition.widths} tightened {tightened} cells "
                    f"of widths {fine_partition.widths}")
    return BoundPair(fine.induced, fine.lower, fine.upper, (e_min, e_max))


def nested_levels(levels):
    """Apply :func:`nest_bounds` along a refinement sequence, coarsest first."""
    nested = list(levels[:1])
    for fine in levels[1:]:
        nested.append(nest_bounds(nested[-1], fine))
    return nested


@dataclass(frozen=True)
class MonotonicityReport:
    checked: int
    slack: float
    violations: tuple
    sound: bool
    raw_violations: int = 0

    @property
    def ok(self):
        return not self.violations

    def to_document(self):
        return {'checked': self.checked, 'slack': self.slack, 'sound': self.sound,
                'violations': list(self.violations), 'raw_violations': self.raw_violations}


def check_refinement_monotonicity(coarse, fine, slack=None):
    """Compare the bounds of every fine cell with those of its coarse parent.

    Refinement may only raise the lower bound and lower the upper bound, up
    to ``slack`` (default twice the larger solver tolerance). Violations are
    listed for the effective bounds; ``raw_violations`` counts the cells
    where the solvers' own values break the ordering.
    """
    coarse_partition, fine_partition = coarse.induced.partition, fine.induced.partition
    if not fine_partition.refines(coarse_partition):
        raise InvalidArgumentError(
            f"Partition with widths {fine_partition.widths} does not refine widths {coarse_partition.widths}")
    if slack is None:
        slack = 2 * max(coarse.lower.report.tol, coarse.upper.report.tol,
                        fine.lower.report.tol, fine.upper.report.tol)
    parents = fine_partition.parent_indices(coarse_partition)
    violations = []
    checks = (('min', coarse.e_min[parents] > fine.e_min + slack, coarse.e_min, fine.e_min),
              ('max', coarse.e_max[parents] < fine.e_max - slack, coarse.e_max, fine.e_max))
    for bound, bad, coarse_values, fine_values in checks:
        for f in np.flatnonzero(bad):
            violations.append({
                'bound': bound,
                'fine_cell': list(fine_partition.region_id(f)),
                'coarse_cell': list(coarse_partition.region_id(parents[f])),
                'coarse': float(coarse_values[parents[f]]),
                'fine': float(fine_values[f]),
            })
    raw_bad = ((coarse.raw_e_min[parents] > fine.raw_e_min + slack)
               | (coarse.raw_e_max[parents] < fine.raw_e_max - slack))
    sound = coarse.induced.sound and fine.induced.sound
    report = MonotonicityReport(int(parents.size), float(slack), tuple(violations), sound,
                                int(np.count_nonzero(raw_bad)))
    if report.raw_violations:
        logger.info(f"{report.raw_violations} cells of widths {fine_partition.widths} are not tightened "
                    f"by the solver alone")
    if violations and sound:
        logger.warning(f"{len(violations)} refinement monotonicity violations between widths "
                       f"{coarse_partition.widths} and {fine_partition.widths}")
    elif violations:
        logger.info(f"{len(violations)} monotonicity violations in a non-sound credal mode")
    return report


def bounded_horizon_gap(bounds, n_steps):
    """Largest cell gap between upper and lower ``n_steps``-step costs of the extracted max strategy."""
    imdp = bounds.induced.imdp
    strategy = bounds.upper.strategy
    lower = bounded_horizon_values(imdp, strategy, n_steps, Mode.MIN)
    upper = bounded_horizon_values(imdp, strategy, n_steps, Mode.MAX)
    gap = np.abs(bounds.induced.cell_values(upper) - bounds.induced.cell_values(lower))
    return float(gap.max())
