"""
Post-processing of bound tables: total variation utilities, one-dimensional
sections, strategy agreement maps, external (learned) strategies and
Monte-Carlo soundness probes.
"""
import csv
import logging
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .emdp import mc_expected_cost
from .exceptions import DomainViolationError, InvalidArgumentError, ParseError
from .geometry import TOL, Box
from .imdp import Strategy
from .serializers import ExternalRegionSerializer

logger = logging.getLogger(__name__)

SIMPLEX_TOL = 1e-12


def _simplex(p, label):
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise InvalidArgumentError(f"{label} must be a non-empty probability vector")
    if np.any(p < 0) or abs(p.sum() - 1.0) > SIMPLEX_TOL * max(1, p.size):
        raise InvalidArgumentError(f"{label} is not a probability vector (sum {p.sum():.17g})")
    return p


def dtv(p, q):
    """Total variation distance ``0.5 * sum(|p - q|)``."""
    p, q = _simplex(p, 'p'), _simplex(q, 'q')
    if p.shape != q.shape:
        raise InvalidArgumentError(f"Length mismatch: {p.size} vs {q.size}")
    return float(0.5 * np.sum(np.abs(p - q)))


def expectation_gap(p, p2, f, f2):
    """Both sides of ``|E_p[f] - E_p2[f2]| <= eps * (1 + 2 max f)`` for non-negative ``f``.

    ``eps`` is the larger of ``dtv(p, p2)`` and ``max |f - f2|``.
    """
    f, f2 = np.asarray(f, dtype=float), np.asarray(f2, dtype=float)
    if np.any(f < 0):
        raise InvalidArgumentError("f must be non-negative")
    eps = max(dtv(p, p2), float(np.max(np.abs(f - f2))))
    lhs = abs(float(np.dot(p, f)) - float(np.dot(p2, f2)))
    return lhs, eps * (1.0 + 2.0 * float(np.max(f)))


def mixture_gap(p, p2, kernels, kernels2):
    """Both sides of ``dtv(p @ Q, p2 @ Q2) <= 3 eps`` with ``eps`` bounding every component distance."""
    kernels, kernels2 = np.asarray(kernels, dtype=float), np.asarray(kernels2, dtype=float)
    eps = max([dtv(p, p2)] + [dtv(a, b) for a, b in zip(kernels, kernels2)])
    lhs = dtv(np.asarray(p) @ kernels, np.asarray(p2) @ kernels2)
    return lhs, 3.0 * eps


@dataclass(frozen=True)
class LemmaReport:
    trials: int
    violations_a: int
    violations_b: int
    max_ratio_a: float
    max_ratio_b: float

    @property
    def ok(self):
        return self.violations_a == 0 and self.violations_b == 0

    def to_document(self):
        return {'trials': self.trials, 'violations_a': self.violations_a, 'violations_b': self.violations_b,
                'max_ratio_a': self.max_ratio_a, 'max_ratio_b': self.max_ratio_b}


def _ratio(lhs, rhs):
    return lhs / rhs if rhs > 0 else 0.0


def _perturb(p, eps, rng):
    return (1.0 - eps) * p + eps * rng.dirichlet(np.ones(p.shape[-1]), size=p.shape[:-1] or None)


def check_dtv_lemma(trials, rng, max_dimension=8, max_eps=0.25):
    """Randomised check of the expectation-gap and mixture-gap inequalities."""
    if int(trials) < 1:
        raise InvalidArgumentError("trials must be a positive integer")
    violations_a = violations_b = 0
    ratio_a = ratio_b = 0.0
    for _ in range(int(trials)):
        n = int(rng.integers(2, max_dimension + 1))
        eps = float(rng.uniform(0.0, max_eps))
        p = rng.dirichlet(np.ones(n))
        p2 = _perturb(p, eps, rng)
        f = rng.uniform(0.0, rng.uniform(0.1, 10.0), size=n)
        f2 = f + rng.uniform(-eps, eps, size=n)
        lhs, rhs = expectation_gap(p, p2, f, f2)
        violations_a += lhs > rhs + SIMPLEX_TOL
        ratio_a = max(ratio_a, _ratio(lhs, rhs))

        m = int(rng.integers(2, max_dimension + 1))
        kernels = rng.dirichlet(np.ones(m), size=n)
        kernels2 = _perturb(kernels, eps, rng)
        lhs, rhs = mixture_gap(p, p2, kernels, kernels2)
        violations_b += lhs > rhs + SIMPLEX_TOL
        ratio_b = max(ratio_b, _ratio(lhs, rhs))
    report = LemmaReport(int(trials), int(violations_a), int(violations_b), ratio_a, ratio_b)
    logger.info(f"Total variation lemma: {trials} trials, {violations_a}+{violations_b} violations, "
                f"max ratios {ratio_a:.6f} / {ratio_b:.6f}")
    return report


def tight_case_ratio(eps, peak=1e-9):
    """Ratio of the two sides of the expectation gap on a two-point instance where it is nearly attained."""
    p = np.array([1.0, 0.0])
    p2 = np.array([1.0 - eps, eps])
    f = np.array([0.0, peak])
    lhs, rhs = expectation_gap(p, p2, f, f + eps)
    return _ratio(lhs, rhs)


@dataclass(frozen=True)
class SectionSample:
    region: tuple
    x: float
    e_min: float
    e_max: float
    external: float = None


@dataclass(frozen=True)
class SectionData:
    fixed_coordinate: tuple
    free_axis: int
    samples: tuple

    @property
    def widths(self):
        return np.array([s.e_max - s.e_min for s in self.samples])


def extract_section(bounds, fixed, external=None):
    """Cells crossed by the line where coordinate ``fixed[0]`` equals ``fixed[1]``.

    ``external`` is an optional per-cell value array (NaN where missing).
    """
    partition = bounds.induced.partition
    if partition.dimension != 2:
        raise InvalidArgumentError("Sections are defined for two-dimensional partitions")
    dim, value = int(fixed[0]), float(fixed[1])
    if dim not in (0, 1):
        raise InvalidArgumentError(f"Fixed dimension must be 0 or 1, got {dim}")
    if value < partition.domain.lo[dim] - TOL or value > partition.domain.hi[dim] + TOL:
        raise DomainViolationError(f"Section value {value} lies outside the domain on axis {dim}")
    k = int(np.searchsorted(partition.edges(dim), value + TOL, side='right')) - 1
    k = min(max(k, 0), partition.counts[dim] - 1)
    free = 1 - dim
    e_min, e_max = bounds.e_min, bounds.e_max
    samples = []
    for j in range(partition.counts[free]):
        region = (k, j) if dim == 0 else (j, k)
        flat = partition.flat_index(region)
        ext = None
        if external is not None and np.isfinite(external[flat]):
            ext = float(external[flat])
        samples.append(SectionSample(region, float(partition.midpoint(region)[free]),
                                     float(e_min[flat]), float(e_max[flat]), ext))
    samples.sort(key=lambda s: s.x)
    return SectionData((dim, value), free, tuple(samples))


def section_rows(section, partition):
    header = ['region', 'i', 'j', 'x', 'e_min', 'e_max', 'external']
    rows = [[partition.flat_index(s.region), s.region[0], s.region[1], s.x, s.e_min, s.e_max, s.external]
            for s in section.samples]
    return header, rows


def section_plot_script(csv_name, title):
    return (f"# gnuplot script for {csv_name}\n"
            "set datafile separator ','\n"
            "set key top left\n"
            "set xlabel 'free coordinate'\n"
            "set ylabel 'expected cost'\n"
            f"set title '{title}'\n"
            f"plot '{csv_name}' skip 1 using 4:5 with steps title 'lower bound', \\\n"
            f"     '' skip 1 using 4:6 with steps title 'upper bound', \\\n"
            f"     '' skip 1 using 4:7 with points title 'external'\n")


@dataclass(frozen=True)
class AgreementMap:
    regions: tuple
    classes: tuple

    @property
    def counts(self):
        return dict(sorted(Counter(self.classes).items()))

    def fraction_agreeing(self):
        if not self.classes:
            return 0.0
        return sum(c.startswith('both-') for c in self.classes) / len(self.classes)


def _classify(low, high, ext):
    if low == high:
        if ext is not None and ext != low:
            return f'external-disagrees-{ext}'
        return f'both-{low}'
    return f'low-{low}-high-{high}'


def agreement_map(induced, sigma_low, sigma_high, external=None):
    """Classify every non-terminal cell by the actions of the lower, upper and external strategies."""
    states = induced.imdp.states
    strategies = [sigma_low, sigma_high] + ([external] if external is not None else [])
    if any(tuple(s.states) != states for s in strategies):
        raise InvalidArgumentError("Strategies were computed on a different partition")
    regions, classes = [], []
    for flat in np.flatnonzero(~induced.terminal_cells):
        low, high = sigma_low.action(int(flat)), sigma_high.action(int(flat))
        if low is None or high is None:
            raise InvalidArgumentError(f"Strategy undefined on cell {induced.partition.region_id(flat)}")
        ext = external.action(int(flat)) if external is not None else None
        regions.append(induced.partition.region_id(flat))
        classes.append(_classify(low, high, ext))
    result = AgreementMap(tuple(regions), tuple(classes))
    logger.info(f"Agreement map for widths {induced.partition.widths}: {result.counts}")
    return result


def agreement_rows(agreement, partition):
    names = sorted(set(agreement.classes))
    header = ['region', 'i', 'j', 'x', 't', 'class', 'class_id']
    rows = []
    for region, label in zip(agreement.regions, agreement.classes):
        mid = partition.midpoint(region)
        rows.append([partition.flat_index(region), region[0], region[1], mid[0], mid[1],
                     label, names.index(label)])
    return header, rows


def agreement_plot_script(csv_name, title):
    return (f"# gnuplot script for {csv_name}\n"
            "set datafile separator ','\n"
            "set xlabel 'x'\n"
            "set ylabel 't'\n"
            f"set title '{title}'\n"
            "set palette maxcolors 8\n"
            f"plot '{csv_name}' skip 1 using 4:5:7 with points pt 5 palette notitle\n")


@dataclass(frozen=True, eq=False)
class ExternalStrategy:
    strategy: Strategy
    values: np.ndarray
    uncovered: tuple

    @property
    def total(self):
        return not self.uncovered


def import_external_strategy(path, induced):
    """Read a cell-indexed external strategy CSV (columns ``lo_d``, ``hi_d``, ``action``, optional ``value``)."""
    partition = induced.partition
    k = partition.dimension
    lo_cols = [f'lo_{d}' for d in range(k)]
    hi_cols = [f'hi_{d}' for d in range(k)]
    actions = induced.imdp.actions
    choice = np.full(induced.imdp.n_states, -1, dtype=np.intp)
    values = np.full(partition.n_regions, np.nan)
    has_values = False
    with open(path, newline='', encoding='utf-8') as handle:
        reader = csv.DictReader(handle)
        missing = [c for c in lo_cols + hi_cols + ['action'] if c not in (reader.fieldnames or [])]
        if missing:
            raise ParseError(f"{path}: missing columns {missing}", line=1)
        for row in reader:
            line = reader.line_num
            raw_value = (row.get('value') or '').strip()
            serializer = ExternalRegionSerializer(data={
                'lo': [row[c] for c in lo_cols], 'hi': [row[c] for c in hi_cols],
                'action': (row['action'] or '').strip(), 'value': raw_value or None,
            })
            if not serializer.is_valid():
                raise ParseError(f"{path}: {serializer.errors}", line=line)
            data = serializer.validated_data
            if data['action'] not in actions:
                raise ParseError(f"{path}: unknown action {data['action']!r}", line=line)
            box = Box(data['lo'], data['hi'])
            if not box.issubset(partition.domain):
                raise ParseError(f"{path}: region {box.lo}-{box.hi} leaves the domain", line=line)
            cell = partition.straddling_cell(box)
            mask = partition.region_mask(box)
            if cell is not None or not mask.any():
                raise ParseError(f"{path}: region {box.lo}-{box.hi} is not a union of cells of widths "
                                 f"{partition.widths}" + (f" (cell {cell})" if cell is not None else ''),
                                 line=line)
            cells = np.flatnonzero(mask)
            if np.any(choice[cells] >= 0):
                raise ParseError(f"{path}: region {box.lo}-{box.hi} overlaps an earlier region", line=line)
            choice[cells] = actions.index(data['action'])
            if data['value'] is not None:
                values[cells] = data['value']
                has_values = True
    open_cells = np.flatnonzero(~induced.terminal_cells)
    uncovered = tuple(partition.region_id(f) for f in open_cells if choice[f] < 0)
    if uncovered:
        logger.warning(f"External strategy {path} leaves {len(uncovered)} cells uncovered, e.g. {uncovered[0]}")
    strategy = Strategy(induced.imdp.states, actions, choice)
    return ExternalStrategy(strategy, values if has_values else None, uncovered)


def count_out_of_bounds(values, bounds, tol=1e-9):
    """Cells whose value lies outside ``[e_min - tol, e_max + tol]``; returns ``(count, checked)``."""
    values = np.asarray(values, dtype=float)
    given = ~np.isnan(values)
    with np.errstate(invalid='ignore'):
        outside = given & ((values < bounds.e_min - tol) | (values > bounds.e_max + tol))
    count, checked = int(outside.sum()), int(given.sum())
    if count:
        logger.warning(f"{count} of {checked} external values lie outside the bounds")
    return count, checked


@dataclass(frozen=True)
class Probe:
    point: tuple
    region: tuple
    e_min: float
    e_max: float
    mean: float
    std_error: float
    contained: bool

    def to_document(self):
        return {'point': list(self.point), 'region': list(self.region), 'e_min': self.e_min,
                'e_max': self.e_max, 'mean': self.mean, 'std_error': self.std_error,
                'contained': self.contained}


@dataclass(frozen=True)
class ProbeReport:
    probes: tuple

    @property
    def contained(self):
        return sum(p.contained for p in self.probes)

    @property
    def rate(self):
        return self.contained / len(self.probes) if self.probes else 1.0

    def to_document(self):
        return {'contained': self.contained, 'rate': self.rate,
                'probes': [p.to_document() for p in self.probes]}


def sandwich_probes(model, bounds, n_probes, n_runs, horizon, seed, tol=1e-6):
    """Monte-Carlo cost of the extracted max strategy at random points against the bounds of their cells."""
    induced = bounds.induced
    if induced.provenance.get('model_hash') not in (None, model.fingerprint()):
        raise InvalidArgumentError("The bounds were computed for a different model")
    policy = induced.policy(model, bounds.upper.strategy)
    streams = np.random.SeedSequence(seed).spawn(int(n_probes) + 1)
    rng = np.random.Generator(np.random.PCG64(streams[0]))
    lo, hi = np.asarray(model.domain.lo), np.asarray(model.domain.hi)
    probes = []
    for stream in streams[1:]:
        point = lo + rng.random(lo.size) * (hi - lo)
        while model.is_terminal(point[None, :])[0]:
            point = lo + rng.random(lo.size) * (hi - lo)
        flat = int(induced.partition.regions_of(point[None, :])[0])
        estimate = mc_expected_cost(model, policy, point, horizon, n_runs, int(stream.generate_state(1)[0]))
        e_min, e_max = float(bounds.e_min[flat]), float(bounds.e_max[flat])
        margin = 3.0 * estimate.std_error + tol
        contained = e_min - margin <= estimate.mean <= e_max + margin
        probes.append(Probe(tuple(float(c) for c in point), induced.partition.region_id(flat),
                            e_min, e_max, estimate.mean, estimate.std_error, bool(contained)))
    report = ProbeReport(tuple(probes))
    logger.info(f"Sandwich probes: {report.contained}/{len(probes)} estimates inside their cell bounds")
    return report
