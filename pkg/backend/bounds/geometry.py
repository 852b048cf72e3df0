"""
Axis-aligned boxes, grid partitions of the state space, and exact overlap
probabilities of truncated uniform successor boxes.

Cells are half-open ``[a, b)`` along every axis, except on the domain's upper
faces, which are closed. Region ids are tuples of per-axis cell indices; flat
indices enumerate regions in row-major (C) order, last axis fastest.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    DegenerateKernelError,
    DomainViolationError,
    InvalidArgumentError,
)

logger = logging.getLogger(__name__)

TOL = 1e-12
ALIGN_TOL = 1e-9
MAX_DIMENSION = 8


def as_point(coords):
    """Convert a sequence of coordinates to a tuple of floats."""
    try:
        point = tuple(float(c) for c in coords)
    except TypeError as exc:
        raise InvalidArgumentError(f"Not a point: {coords!r}") from exc
    if not point:
        raise InvalidArgumentError("A point needs at least one coordinate")
    return point


@dataclass(frozen=True)
class Box:
    """Closed axis-aligned box ``[lo, hi]``; membership tests apply the cell convention."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo, hi = as_point(self.lo), as_point(self.hi)
        if len(lo) != len(hi):
            raise InvalidArgumentError(f"Box corners differ in dimension: {lo} vs {hi}")
        if len(lo) > MAX_DIMENSION:
            raise InvalidArgumentError(f"Dimension {len(lo)} exceeds {MAX_DIMENSION}")
        for d, (a, b) in enumerate(zip(lo, hi)):
            if a > b + TOL:
                raise InvalidArgumentError(f"Box lower corner exceeds upper corner on axis {d}: {a} > {b}")
        object.__setattr__(self, 'lo', lo)
        object.__setattr__(self, 'hi', tuple(max(a, b) for a, b in zip(lo, hi)))

    @property
    def dimension(self):
        return len(self.lo)

    @property
    def widths(self):
        return tuple(b - a for a, b in zip(self.lo, self.hi))

    @property
    def volume(self):
        return math.prod(self.widths)

    @property
    def center(self):
        return tuple((a + b) / 2 for a, b in zip(self.lo, self.hi))

    @property
    def diameter(self):
        return math.sqrt(sum(w * w for w in self.widths))

    def contains(self, point, domain=None):
        """Half-open membership; faces lying on ``domain``'s upper faces are closed."""
        point = as_point(point)
        if len(point) != self.dimension:
            raise InvalidArgumentError(f"Point {point} does not have dimension {self.dimension}")
        for d, x in enumerate(point):
            if x < self.lo[d] - TOL:
                return False
            closed = domain is not None and abs(self.hi[d] - domain.hi[d]) <= TOL
            if closed:
                if x > self.hi[d] + TOL:
                    return False
            elif x >= self.hi[d] - TOL:
                return False
        return True

    def mask(self, points, domain=None):
        """Vectorised :meth:`contains` over an ``(n, K)`` array of points."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        closed = np.zeros(self.dimension, dtype=bool)
        if domain is not None:
            closed = np.abs(hi - np.asarray(domain.hi)) <= TOL
        upper = np.where(closed, points <= hi + TOL, points < hi - TOL)
        return np.all((points >= lo - TOL) & upper, axis=1)

    def intersect(self, other):
        """The intersection box, or None when the boxes are disjoint."""
        lo = tuple(max(a, b) for a, b in zip(self.lo, other.lo))
        hi = tuple(min(a, b) for a, b in zip(self.hi, other.hi))
        if any(a > b for a, b in zip(lo, hi)):
            return None
        return Box(lo, hi)

    def issubset(self, other, tol=ALIGN_TOL):
        return all(a >= c - tol and b <= e + tol
                   for a, b, c, e in zip(self.lo, self.hi, other.lo, other.hi))

    def overlaps(self, other, tol=ALIGN_TOL):
        """True when the intersection has positive length on every axis."""
        return all(min(b, e) - max(a, c) > tol
                   for a, b, c, e in zip(self.lo, self.hi, other.lo, other.hi))

    def to_document(self):
        return {'lo': list(self.lo), 'hi': list(self.hi)}


@dataclass(frozen=True)
class GridPartition:
    """Uniform grid over ``domain``; the last cell of an axis may be narrower."""

    domain: Box
    widths: tuple
    counts: tuple = field(init=False)

    def __post_init__(self):
        widths = as_point(self.widths)
        if len(widths) != self.domain.dimension:
            raise InvalidArgumentError(
                f"{len(widths)} widths given for a {self.domain.dimension}-dimensional domain")
        if any(w <= 0 for w in widths):
            raise InvalidArgumentError(f"Cell widths must be positive, got {widths}")
        if any(s <= TOL for s in self.domain.widths):
            raise InvalidArgumentError("The partition domain must have positive volume")
        counts = tuple(max(1, math.ceil(span / w - ALIGN_TOL))
                       for span, w in zip(self.domain.widths, widths))
        edges = []
        for d, (w, n) in enumerate(zip(widths, counts)):
            axis = self.domain.lo[d] + w * np.arange(n + 1, dtype=float)
            axis[-1] = self.domain.hi[d]
            axis.flags.writeable = False
            edges.append(axis)
        object.__setattr__(self, 'widths', widths)
        object.__setattr__(self, 'counts', counts)
        object.__setattr__(self, '_edges', tuple(edges))

    @classmethod
    def uniform(cls, domain, width):
        """Partition with the same cell width along every axis."""
        return cls(domain, (float(width),) * domain.dimension)

    @property
    def dimension(self):
        return self.domain.dimension

    @property
    def n_regions(self):
        return math.prod(self.counts)

    def __len__(self):
        return self.n_regions

    def edges(self, axis):
        return self._edges[axis]

    def axis_cells(self, axis):
        """Lower and upper cell boundaries along ``axis``."""
        e = self._edges[axis]
        return e[:-1], e[1:]

    def region_of(self, s):
        """The region id of the cell containing ``s``."""
        s = as_point(s)
        if len(s) != self.dimension:
            raise InvalidArgumentError(f"Point {s} does not have dimension {self.dimension}")
        index = []
        for d, x in enumerate(s):
            if x < self.domain.lo[d] - TOL or x > self.domain.hi[d] + TOL:
                raise DomainViolationError(f"Point {s} lies outside the domain {self.domain.lo}-{self.domain.hi}")
            k = int(np.searchsorted(self._edges[d], x + TOL, side='right')) - 1
            index.append(min(max(k, 0), self.counts[d] - 1))
        return tuple(index)

    def regions_of(self, points):
        """Flat region indices for an ``(n, K)`` array of points."""
        points = np.asarray(points, dtype=float)
        lo = np.asarray(self.domain.lo)
        hi = np.asarray(self.domain.hi)
        if np.any(points < lo - TOL) or np.any(points > hi + TOL):
            raise DomainViolationError("Some points lie outside the partition domain")
        index = []
        for d in range(self.dimension):
            k = np.searchsorted(self._edges[d], points[:, d] + TOL, side='right') - 1
            index.append(np.clip(k, 0, self.counts[d] - 1))
        return np.ravel_multi_index(index, self.counts)

    def region_box(self, region):
        region = self._checked(region)
        return Box(tuple(self._edges[d][k] for d, k in enumerate(region)),
                   tuple(self._edges[d][k + 1] for d, k in enumerate(region)))

    def flat_index(self, region):
        return int(np.ravel_multi_index(self._checked(region), self.counts))

    def region_id(self, flat):
        return tuple(int(k) for k in np.unravel_index(int(flat), self.counts))

    def regions(self):
        """All region ids in row-major order."""
        return itertools.product(*(range(n) for n in self.counts))

    def midpoint(self, region):
        return self.region_box(region).center

    def granularity(self):
        """Largest cell diagonal."""
        return math.sqrt(sum(min(w, span) ** 2 for w, span in zip(self.widths, self.domain.widths)))

    def refine(self, factor):
        """Split every full cell into ``factor**K`` equal sub-cells."""
        if isinstance(factor, bool) or not isinstance(factor, (int, np.integer)) or factor < 1:
            raise InvalidArgumentError(f"Refinement factor must be a positive integer, got {factor!r}")
        return GridPartition(self.domain, tuple(w / factor for w in self.widths))

    def ratios(self, coarse):
        """Per-axis integer width ratios to ``coarse``, or None when this grid does not refine it."""
        if not (np.allclose(self.domain.lo, coarse.domain.lo, atol=ALIGN_TOL)
                and np.allclose(self.domain.hi, coarse.domain.hi, atol=ALIGN_TOL)):
            return None
        ratios = []
        for wc, wf in zip(coarse.widths, self.widths):
            r = wc / wf
            if round(r) < 1 or abs(r - round(r)) > ALIGN_TOL * max(1.0, r):
                return None
            ratios.append(int(round(r)))
        return tuple(ratios)

    def refines(self, coarse):
        return self.ratios(coarse) is not None

    def parent_of(self, coarse, region):
        """The cell of ``coarse`` containing fine cell ``region``."""
        ratios = self.ratios(coarse)
        if ratios is None:
            raise InvalidArgumentError("Partition does not refine the coarse partition")
        return tuple(min(k // r, n - 1) for k, r, n in zip(self._checked(region), ratios, coarse.counts))

    def parent_indices(self, coarse):
        """Flat coarse parent index of every fine region, in row-major order."""
        ratios = self.ratios(coarse)
        if ratios is None:
            raise InvalidArgumentError("Partition does not refine the coarse partition")
        grids = np.meshgrid(*(np.minimum(np.arange(n) // r, nc - 1)
                              for n, r, nc in zip(self.counts, ratios, coarse.counts)), indexing='ij')
        return np.ravel_multi_index([g.ravel() for g in grids], coarse.counts)

    def straddling_cell(self, box):
        """First cell that intersects ``box`` without lying inside it, or None."""
        clipped = box.intersect(self.domain)
        if clipped is None or clipped.volume <= TOL:
            return None
        inside = []
        straddle_axis = None
        for d in range(self.dimension):
            lo_e, hi_e = self.axis_cells(d)
            overlap = np.minimum(hi_e, clipped.hi[d]) - np.maximum(lo_e, clipped.lo[d])
            touching = overlap > ALIGN_TOL
            partial = touching & (overlap < (hi_e - lo_e) - ALIGN_TOL)
            inside.append(np.flatnonzero(touching))
            if straddle_axis is None and partial.any():
                straddle_axis = (d, int(np.flatnonzero(partial)[0]))
        if straddle_axis is None:
            return None
        d, k = straddle_axis
        return tuple(k if axis == d else int(idx[0]) for axis, idx in enumerate(inside))

    def region_mask(self, box):
        """Boolean mask over flat regions whose cell lies inside ``box``."""
        masks = []
        for d in range(self.dimension):
            lo_e, hi_e = self.axis_cells(d)
            masks.append((lo_e >= box.lo[d] - ALIGN_TOL) & (hi_e <= box.hi[d] + ALIGN_TOL))
        out = masks[0]
        for m in masks[1:]:
            out = np.logical_and.outer(out, m)
        return out.ravel()

    def to_document(self):
        return {'domain': self.domain.to_document(), 'widths': list(self.widths)}

    @classmethod
    def from_document(cls, doc):
        return cls(Box(doc['domain']['lo'], doc['domain']['hi']), tuple(doc['widths']))

    def _checked(self, region):
        region = tuple(int(k) for k in region)
        if len(region) != self.dimension or any(not 0 <= k < n for k, n in zip(region, self.counts)):
            raise InvalidArgumentError(f"Region {region} is not a cell of a {self.counts} grid")
        return region


def axis_fraction(center, half_width, lo, hi, dom_lo, dom_hi):
    """Share of the truncated interval ``[center ± half_width] ∩ [dom_lo, dom_hi]`` inside ``[lo, hi]``."""
    k_lo = max(center - half_width, dom_lo)
    k_hi = min(center + half_width, dom_hi)
    span = k_hi - k_lo
    if span <= TOL:
        raise DegenerateKernelError(
            f"Successor interval around {center} with half-width {half_width} misses [{dom_lo}, {dom_hi}]")
    return min(1.0, max(0.0, min(k_hi, hi) - max(k_lo, lo)) / span)


def axis_overlap_bounds(src_lo, src_hi, drift, half_width, lo, hi, dom_lo, dom_hi):
    """Minimum and maximum of :func:`axis_fraction` over centres ``[src_lo, src_hi] + drift``.

    The ratio is linear-fractional between consecutive breakpoints, so its
    extrema sit on the interval ends or on a breakpoint.
    """
    c_lo, c_hi = src_lo + drift, src_hi + drift
    breakpoints = (lo - half_width, lo + half_width, hi - half_width, hi + half_width,
                   dom_lo - half_width, dom_lo + half_width, dom_hi - half_width, dom_hi + half_width)
    centers = [c_lo, c_hi] + [b for b in breakpoints if c_lo < b < c_hi]
    values = [axis_fraction(c, half_width, lo, hi, dom_lo, dom_hi) for c in centers]
    return min(values), max(values)


def overlap_fraction(kernel_box, region, domain):
    """``vol(kernel ∩ region ∩ domain) / vol(kernel ∩ domain)``."""
    truncated = kernel_box.intersect(domain)
    if truncated is None or any(w <= TOL for w in truncated.widths):
        raise DegenerateKernelError(f"Kernel box {kernel_box} has zero volume inside the domain")
    part = truncated.intersect(region)
    if part is None:
        return 0.0
    return min(1.0, math.prod(p / t for p, t in zip(part.widths, truncated.widths)))


def overlap_bounds(source_region, drift, half_width, target_region, domain):
    """Exact ``(p_low, p_high)`` of the overlap fraction over kernel centres in ``source_region + drift``."""
    if half_width <= 0:
        raise InvalidArgumentError(f"Kernel half-width must be positive, got {half_width}")
    drift = as_point(drift)
    p_low, p_high = 1.0, 1.0
    for d in range(domain.dimension):
        a, b = axis_overlap_bounds(source_region.lo[d], source_region.hi[d], drift[d], half_width,
                                   target_region.lo[d], target_region.hi[d],
                                   domain.lo[d], domain.hi[d])
        p_low *= a
        p_high *= b
    return p_low, p_high


def axis_bounds_table(partition, axis, drift, half_width, target=None):
    """Per-axis ``(low, high)`` overlap bounds for every source cell.

    Without ``target`` the result has shape ``(n, n)`` (source cell, target
    cell); with a ``(lo, hi)`` target interval it has shape ``(n,)``. Rows of
    sources whose successor interval misses the domain are NaN.
    """
    lo_e, hi_e = partition.axis_cells(axis)
    dom_lo, dom_hi = partition.domain.lo[axis], partition.domain.hi[axis]
    n = partition.counts[axis]
    shape = (n,) if target is not None else (n, n)
    low, high = np.zeros(shape), np.zeros(shape)
    for i in range(n):
        reach_lo = lo_e[i] + drift - half_width
        reach_hi = hi_e[i] + drift + half_width
        try:
            if target is not None:
                low[i], high[i] = axis_overlap_bounds(lo_e[i], hi_e[i], drift, half_width,
                                                      target[0], target[1], dom_lo, dom_hi)
                continue
            for j in np.flatnonzero((hi_e > reach_lo) & (lo_e < reach_hi)):
                low[i, j], high[i, j] = axis_overlap_bounds(lo_e[i], hi_e[i], drift, half_width,
                                                            lo_e[j], hi_e[j], dom_lo, dom_hi)
        except DegenerateKernelError:
            low[i], high[i] = np.nan, np.nan
    return low, high


def axis_fraction_table(partition, axis, centers, half_width, target=None):
    """Exact fractions along ``axis`` for each kernel centre in ``centers``.

    Shape ``(len(centers), n)`` over target cells, or ``(len(centers),)`` for a
    ``(lo, hi)`` target interval; NaN rows for degenerate centres.
    """
    lo_e, hi_e = partition.axis_cells(axis)
    dom_lo, dom_hi = partition.domain.lo[axis], partition.domain.hi[axis]
    centers = np.asarray(centers, dtype=float)
    k_lo = np.maximum(centers - half_width, dom_lo)
    k_hi = np.minimum(centers + half_width, dom_hi)
    span = k_hi - k_lo
    if target is not None:
        t_lo, t_hi = np.array([target[0]]), np.array([target[1]])
    else:
        t_lo, t_hi = lo_e, hi_e
    overlap = np.minimum(k_hi[:, None], t_hi[None, :]) - np.maximum(k_lo[:, None], t_lo[None, :])
    with np.errstate(divide='ignore', invalid='ignore'):
        table = np.clip(np.maximum(overlap, 0.0) / span[:, None], 0.0, 1.0)
    table[span <= TOL] = np.nan
    return table[:, 0] if target is not None else table


def product_support(partition, axis_supports):
    """Flat indices of the product of per-axis cell index arrays (row-major)."""
    grids = np.meshgrid(*axis_supports, indexing='ij')
    return np.ravel_multi_index([g.ravel() for g in grids], partition.counts)


def product_values(axis_values):
    """Row-major outer product of per-axis factors, flattened."""
    out = np.asarray(axis_values[0], dtype=float)
    for v in axis_values[1:]:
        out = np.multiply.outer(out, np.asarray(v, dtype=float))
    return out.ravel()
