"""
Finite-state imprecise MDPs and robust value iteration.

An :class:`Imdp` attaches to every non-goal (state, action) pair a credal set
(interval bounds or a finite list of candidate distributions) and a cost
interval. Value iteration from the all-zero table computes the lower
(``Mode.MIN``) or upper (``Mode.MAX``) expected cost; the controller always
minimises over actions, the adversary minimises or maximises over the credal
set.
"""
import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np

from .exceptions import (
    InfeasibleCredalError,
    InvalidArgumentError,
    OversizeError,
    ParseError,
)

logger = logging.getLogger(__name__)

PROB_TOL = 1e-12
MONOTONE_SLACK = 1e-9
FORMAT = 'imdp-bounds/1'

BRUTE_FORCE_LIMITS = {'states': 6, 'actions': 3, 'candidates': 4, 'horizon': 12}


class Mode(str, Enum):
    MIN = 'min'
    MAX = 'max'

    @classmethod
    def parse(cls, value):
        try:
            return cls(value)
        except ValueError:
            raise InvalidArgumentError(f"Mode must be 'min' or 'max', got {value!r}") from None


def _sum_tol(n):
    return PROB_TOL * max(1, n)


def _frozen(array, dtype=float):
    array = np.array(array, dtype=dtype)
    array.flags.writeable = False
    return array


@dataclass(frozen=True)
class CostInterval:
    c_min: float
    c_max: float

    def __post_init__(self):
        c_min, c_max = float(self.c_min), float(self.c_max)
        if c_min < 0 or c_max < c_min - PROB_TOL:
            raise InvalidArgumentError(f"Invalid cost interval [{c_min}, {c_max}]")
        object.__setattr__(self, 'c_min', c_min)
        object.__setattr__(self, 'c_max', max(c_min, c_max))

    @classmethod
    def point(cls, cost):
        return cls(cost, cost)

    def endpoint(self, mode):
        return self.c_min if Mode.parse(mode) is Mode.MIN else self.c_max


@dataclass(frozen=True, eq=False)
class IntervalCredal:
    """Per-successor probability intervals; successors outside ``support`` get mass 0."""

    support: np.ndarray
    p_low: np.ndarray
    p_high: np.ndarray

    def __post_init__(self):
        support = np.asarray(self.support, dtype=np.intp)
        low = np.asarray(self.p_low, dtype=float)
        high = np.asarray(self.p_high, dtype=float)
        if support.ndim != 1 or low.shape != support.shape or high.shape != support.shape:
            raise InvalidArgumentError("Interval credal set needs equally long support, p_low and p_high")
        if support.size == 0 or len(np.unique(support)) != support.size:
            raise InvalidArgumentError("Interval credal support must be non-empty and free of duplicates")
        if np.any(low < -PROB_TOL) or np.any(high > 1 + PROB_TOL) or np.any(low > high + PROB_TOL):
            raise InfeasibleCredalError("Interval bounds must satisfy 0 <= p_low <= p_high <= 1")
        tol = _sum_tol(support.size)
        if low.sum() > 1 + tol or high.sum() < 1 - tol:
            raise InfeasibleCredalError(
                f"Infeasible interval credal set: sum(p_low)={low.sum():.17g}, sum(p_high)={high.sum():.17g}")
        low = np.clip(low, 0.0, 1.0)
        object.__setattr__(self, 'support', _frozen(support, np.intp))
        object.__setattr__(self, 'p_low', _frozen(low))
        object.__setattr__(self, 'p_high', _frozen(np.clip(high, low, 1.0)))

    @classmethod
    def from_dense(cls, p_low, p_high):
        p_low, p_high = np.asarray(p_low, dtype=float), np.asarray(p_high, dtype=float)
        support = np.flatnonzero(p_high > 0)
        return cls(support, p_low[support], p_high[support])

    @classmethod
    def point(cls, support, probabilities):
        """Degenerate set holding exactly one distribution."""
        return cls(support, probabilities, probabilities)

    def dense(self, n_states):
        low, high = np.zeros(n_states), np.zeros(n_states)
        low[self.support] = self.p_low
        high[self.support] = self.p_high
        return low, high

    def contains(self, vector, tol=1e-9):
        vector = np.asarray(vector, dtype=float)
        low, high = self.dense(vector.size)
        return bool(np.all(vector >= low - tol) and np.all(vector <= high + tol)
                    and abs(vector.sum() - 1.0) <= tol)

    def to_document(self):
        return {'interval': {'support': self.support.tolist(),
                             'low': self.p_low.tolist(), 'high': self.p_high.tolist()}}


@dataclass(frozen=True, eq=False)
class CandidateCredal:
    """Finite list of candidate distributions over a shared support."""

    support: np.ndarray
    dists: np.ndarray

    def __post_init__(self):
        support = np.asarray(self.support, dtype=np.intp)
        dists = np.atleast_2d(np.asarray(self.dists, dtype=float))
        if support.ndim != 1 or support.size == 0 or len(np.unique(support)) != support.size:
            raise InvalidArgumentError("Candidate support must be non-empty and free of duplicates")
        if dists.shape[0] == 0 or dists.shape[1] != support.size:
            raise InvalidArgumentError("Candidate distributions must match the support length")
        if np.any(dists < 0) or np.any(np.abs(dists.sum(axis=1) - 1.0) > _sum_tol(support.size)):
            raise InfeasibleCredalError("Every candidate must be a probability vector")
        object.__setattr__(self, 'support', _frozen(support, np.intp))
        object.__setattr__(self, 'dists', _frozen(dists))

    @classmethod
    def from_dense(cls, vectors):
        vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
        support = np.flatnonzero(np.any(vectors > 0, axis=0))
        return cls(support, vectors[:, support])

    @property
    def size(self):
        return self.dists.shape[0]

    def dense(self, n_states):
        out = np.zeros((self.size, n_states))
        out[:, self.support] = self.dists
        return out

    def contains(self, vector, tol=1e-9):
        vector = np.asarray(vector, dtype=float)
        return bool(np.any(np.all(np.abs(self.dense(vector.size) - vector) <= tol, axis=1)))

    def to_document(self):
        return {'candidates': {'support': self.support.tolist(), 'dists': self.dists.tolist()}}


@dataclass
class _ActionBlock:
    """Padded per-action arrays for vectorised sweeps."""

    cost_min: np.ndarray
    cost_max: np.ndarray
    interval_rows: np.ndarray
    interval_succ: np.ndarray
    interval_low: np.ndarray
    interval_high: np.ndarray
    cand_rows: np.ndarray
    cand_succ: np.ndarray
    cand_dists: np.ndarray


@dataclass(frozen=True, eq=False)
class Imdp:
    states: tuple
    goal: frozenset
    actions: tuple
    table: dict = field(repr=False)

    def __post_init__(self):
        states = tuple(str(s) for s in self.states)
        actions = tuple(str(a) for a in self.actions)
        if not states or len(set(states)) != len(states):
            raise InvalidArgumentError("IMDP states must be non-empty and unique")
        if not actions or len(set(actions)) != len(actions):
            raise InvalidArgumentError("IMDP actions must be non-empty and unique")
        goal = frozenset(int(g) for g in self.goal)
        n = len(states)
        if any(not 0 <= g < n for g in goal):
            raise InvalidArgumentError("Goal set refers to unknown states")
        table = dict(self.table)
        for (s, a), (credal, cost) in table.items():
            if not (0 <= s < n and 0 <= a < len(actions)):
                raise InvalidArgumentError(f"Table entry ({s}, {a}) is out of range")
            if credal.support.max() >= n:
                raise InvalidArgumentError(f"Credal set of ({states[s]}, {actions[a]}) refers to unknown states")
            if s in goal:
                if not set(credal.support.tolist()) <= goal:
                    raise InvalidArgumentError(f"Goal state {states[s]} is not absorbing under {actions[a]}")
                if cost.c_max != 0.0:
                    raise InvalidArgumentError(f"Goal state {states[s]} must have cost 0")
        missing = [(states[s], actions[a]) for s in range(n) if s not in goal
                   for a in range(len(actions)) if (s, a) not in table]
        if missing:
            raise InvalidArgumentError(f"Missing entries for non-goal pairs, e.g. {missing[:3]}")
        object.__setattr__(self, 'states', states)
        object.__setattr__(self, 'actions', actions)
        object.__setattr__(self, 'goal', goal)
        object.__setattr__(self, 'table', table)

    @property
    def n_states(self):
        return len(self.states)

    @property
    def n_actions(self):
        return len(self.actions)

    @cached_property
    def goal_mask(self):
        mask = np.zeros(self.n_states, dtype=bool)
        mask[list(self.goal)] = True
        mask.flags.writeable = False
        return mask

    def action_index(self, name):
        try:
            return self.actions.index(name)
        except ValueError:
            raise InvalidArgumentError(f"Unknown action {name!r}") from None

    def entry(self, state, action):
        return self.table[(state, action)]

    @cached_property
    def blocks(self):
        return [self._compile(a) for a in range(self.n_actions)]

    def _compile(self, a):
        n = self.n_states
        cost_min, cost_max = np.zeros(n), np.zeros(n)
        intervals, candidates = [], []
        for s in range(n):
            if s in self.goal:
                continue
            credal, cost = self.table[(s, a)]
            cost_min[s], cost_max[s] = cost.c_min, cost.c_max
            (intervals if isinstance(credal, IntervalCredal) else candidates).append((s, credal))

        width = max((c.support.size for _, c in intervals), default=0)
        rows = np.array([s for s, _ in intervals], dtype=np.intp)
        succ = np.repeat(rows[:, None], width, axis=1) if width else np.zeros((0, 0), dtype=np.intp)
        low, high = np.zeros(succ.shape), np.zeros(succ.shape)
        for r, (_, c) in enumerate(intervals):
            k = c.support.size
            succ[r, :k], low[r, :k], high[r, :k] = c.support, c.p_low, c.p_high

        width = max((c.support.size for _, c in candidates), default=0)
        depth = max((c.size for _, c in candidates), default=0)
        c_rows = np.array([s for s, _ in candidates], dtype=np.intp)
        c_succ = np.repeat(c_rows[:, None], width, axis=1) if width else np.zeros((0, 0), dtype=np.intp)
        dists = np.zeros((len(candidates), depth, width))
        for r, (_, c) in enumerate(candidates):
            k = c.support.size
            c_succ[r, :k] = c.support
            dists[r, :c.size, :k] = c.dists
            dists[r, c.size:, :k] = c.dists[0]
        return _ActionBlock(cost_min, cost_max, rows, succ, low, high, c_rows, c_succ, dists)

    def to_document(self):
        entries = []
        for (s, a) in sorted(self.table):
            credal, cost = self.table[(s, a)]
            entries.append({'state': self.states[s], 'action': self.actions[a],
                            'cost': [cost.c_min, cost.c_max], **credal.to_document()})
        return {'format': FORMAT, 'states': list(self.states),
                'goal': [self.states[g] for g in sorted(self.goal)],
                'actions': list(self.actions), 'entries': entries}

    @classmethod
    def from_document(cls, doc):
        try:
            if doc.get('format', FORMAT) != FORMAT:
                raise ParseError(f"Unsupported IMDP format {doc.get('format')!r}")
            states = list(doc['states'])
            actions = list(doc['actions'])
            index = {label: i for i, label in enumerate(states)}
            goal = {index[label] for label in doc['goal']}
            table = {}
            for entry in doc['entries']:
                key = (index[entry['state']], actions.index(entry['action']))
                if key in table:
                    raise ParseError(f"Duplicate entry for ({entry['state']}, {entry['action']})")
                cost = CostInterval(*entry['cost'])
                if 'interval' in entry:
                    part = entry['interval']
                    credal = IntervalCredal(part['support'], part['low'], part['high'])
                elif 'candidates' in entry:
                    part = entry['candidates']
                    credal = CandidateCredal(part['support'], part['dists'])
                else:
                    raise ParseError(f"Entry ({entry['state']}, {entry['action']}) has no credal set")
                table[key] = (credal, cost)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InvalidArgumentError):
                raise
            raise ParseError(f"Malformed IMDP document: {exc!r}") from exc
        return cls(tuple(states), frozenset(goal), tuple(actions), table)


@dataclass(frozen=True, eq=False)
class ValueTable:
    states: tuple
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (len(self.states),):
            raise InvalidArgumentError("Value table length does not match the state list")
        if np.any(np.isnan(values)) or np.any(values < -PROB_TOL):
            raise InvalidArgumentError("Values must be non-negative (or +inf)")
        values.flags.writeable = False
        object.__setattr__(self, 'values', values)

    @classmethod
    def bottom(cls, imdp):
        return cls(imdp.states, np.zeros(imdp.n_states))

    def __getitem__(self, label):
        return float(self.values[self.states.index(label)])

    def __len__(self):
        return len(self.states)


@dataclass(frozen=True, eq=False)
class Strategy:
    """Action index per state; -1 where no action is chosen (goal states)."""

    states: tuple
    actions: tuple
    choice: np.ndarray

    def __post_init__(self):
        choice = np.array(self.choice, dtype=np.intp)
        if choice.shape != (len(self.states),) or np.any(choice >= len(self.actions)) or np.any(choice < -1):
            raise InvalidArgumentError("Strategy choices do not match the states and actions")
        choice.flags.writeable = False
        object.__setattr__(self, 'choice', choice)

    def action(self, state):
        idx = self.states.index(state) if isinstance(state, str) else int(state)
        a = int(self.choice[idx])
        return None if a < 0 else self.actions[a]

    def undefined(self, goal_mask):
        """Indices of non-goal states without an action."""
        return np.flatnonzero((self.choice < 0) & ~np.asarray(goal_mask))

    def require_total(self, imdp):
        if tuple(imdp.states) != tuple(self.states) or tuple(imdp.actions) != tuple(self.actions):
            raise InvalidArgumentError("Strategy was built for a different IMDP")
        missing = self.undefined(imdp.goal_mask)
        if missing.size:
            raise InvalidArgumentError(
                f"Strategy undefined on {missing.size} non-goal states, e.g. {self.states[missing[0]]}")


@dataclass(frozen=True, eq=False)
class Adversary:
    """Chosen distribution per (state, action), stored on its support."""

    n_states: int
    mode: Mode
    choice: dict = field(repr=False)

    def vector(self, state, action):
        support, probabilities = self.choice[(state, action)]
        out = np.zeros(self.n_states)
        out[support] = probabilities
        return out

    def to_document(self, imdp):
        return {'mode': self.mode.value, 'choices': [
            {'state': imdp.states[s], 'action': imdp.actions[a],
             'support': support.tolist(), 'probabilities': probabilities.tolist()}
            for (s, a), (support, probabilities) in sorted(self.choice.items())]}


@dataclass(frozen=True)
class ConvergenceReport:
    mode: Mode
    iterations: int
    residual: float
    converged: bool
    tol: float
    divergence_cap: float
    infinite_states: int

    @property
    def note(self):
        return ('monotone convergence from below: reported values are lower bounds '
                'on the fixpoint for both modes')

    def to_document(self):
        return {'mode': self.mode.value, 'iterations': self.iterations, 'residual': self.residual,
                'converged': self.converged, 'tol': self.tol, 'divergence_cap': self.divergence_cap,
                'infinite_states': self.infinite_states, 'note': self.note}


@dataclass(frozen=True, eq=False)
class Solution:
    values: ValueTable
    strategy: Strategy
    adversary: Adversary
    report: ConvergenceReport


def _expect(mass, values):
    """Expectation where zero mass on an infinite value contributes nothing."""
    with np.errstate(invalid='ignore'):
        return np.where(mass > 0, mass * values, 0.0).sum(axis=-1)


def _interval_opt(vals, low, high, mode):
    """Ordered greedy assignment over rows of padded interval credal sets."""
    key = vals if mode is Mode.MIN else -vals
    order = np.argsort(key, axis=1, kind='stable')
    low_s = np.take_along_axis(low, order, axis=1)
    high_s = np.take_along_axis(high, order, axis=1)
    slack = high_s - low_s
    budget = 1.0 - low.sum(axis=1)
    before = np.cumsum(slack, axis=1) - slack
    extra = np.clip(budget[:, None] - before, 0.0, slack)
    mass = np.empty_like(low)
    np.put_along_axis(mass, order, np.minimum(low_s + extra, high_s), axis=1)
    return _expect(mass, vals), mass


def _candidate_opt(vals, dists, mode):
    expectations = _expect(dists, vals[:, None, :])
    pick = (np.argmin if mode is Mode.MIN else np.argmax)(expectations, axis=1)
    rows = np.arange(len(pick))
    return expectations[rows, pick], dists[rows, pick]


def inner_opt(credal, v, mode):
    """Optimal expectation of ``v`` over ``credal`` and a dense witness distribution."""
    mode = Mode.parse(mode)
    v = _values_array(v)
    vals = v[credal.support][None, :]
    if isinstance(credal, IntervalCredal):
        value, mass = _interval_opt(vals, credal.p_low[None, :], credal.p_high[None, :], mode)
    else:
        value, mass = _candidate_opt(vals, credal.dists[None, :, :], mode)
    witness = np.zeros(v.size)
    witness[credal.support] = mass[0]
    return float(value[0]), witness


def _values_array(v):
    return np.asarray(v.values if isinstance(v, ValueTable) else v, dtype=float)


def _bellman(imdp, v, mode, witnesses=None):
    """Q-values ``(n_actions, n_states)``; fills ``witnesses[(s, a)]`` when given a dict."""
    q = np.zeros((imdp.n_actions, imdp.n_states))
    for a, block in enumerate(imdp.blocks):
        inner = np.zeros(imdp.n_states)
        if block.interval_rows.size:
            value, mass = _interval_opt(v[block.interval_succ], block.interval_low, block.interval_high, mode)
            inner[block.interval_rows] = value
            if witnesses is not None:
                _collect(witnesses, a, block.interval_rows, block.interval_succ, mass)
        if block.cand_rows.size:
            value, mass = _candidate_opt(v[block.cand_succ], block.cand_dists, mode)
            inner[block.cand_rows] = value
            if witnesses is not None:
                _collect(witnesses, a, block.cand_rows, block.cand_succ, mass)
        cost = block.cost_min if mode is Mode.MIN else block.cost_max
        q[a] = cost + inner
    q[:, imdp.goal_mask] = 0.0
    return q


def _collect(witnesses, a, rows, succ, mass):
    for r, s in enumerate(rows):
        keep = mass[r] > 0
        support, probabilities = succ[r][keep], mass[r][keep]
        order = np.argsort(support)
        witnesses[(int(s), a)] = (support[order], probabilities[order])


def _select(q, choice=None):
    if choice is None:
        return q.min(axis=0)
    picked = q[np.maximum(choice, 0), np.arange(q.shape[1])]
    return np.where(choice < 0, 0.0, picked)


def vi_sweep(imdp, v, mode):
    """One application of the robust Bellman operator."""
    mode = Mode.parse(mode)
    values = _values_array(v)
    return ValueTable(imdp.states, _select(_bellman(imdp, values, mode)))


def value_iteration(imdp, mode, tol=1e-9, max_iter=100000, divergence_cap=1e9, strategy=None, callback=None):
    """Iterate :func:`vi_sweep` from the all-zero table.

    With ``strategy`` the controller is fixed and only the adversary optimises.
    ``callback(iteration, values)`` is invoked after every sweep.
    """
    mode = Mode.parse(mode)
    if tol <= 0 or divergence_cap <= 0:
        raise InvalidArgumentError("tol and divergence_cap must be positive")
    if int(max_iter) < 1:
        raise InvalidArgumentError("max_iter must be at least 1")
    choice = None
    if strategy is not None:
        strategy.require_total(imdp)
        choice = strategy.choice

    v = np.zeros(imdp.n_states)
    frozen = np.zeros(imdp.n_states, dtype=bool)
    residual, iterations = np.inf, 0
    for iterations in range(1, int(max_iter) + 1):
        new = _select(_bellman(imdp, v, mode), choice)
        new[frozen] = np.inf
        if __debug__:
            finite = np.isfinite(v)
            assert np.all(new[finite] >= v[finite] - MONOTONE_SLACK * np.maximum(1.0, v[finite])), \
                'value iteration sweep decreased a value'
        promote = np.isfinite(new) & (new > divergence_cap)
        if promote.any():
            logger.warning(f"{int(promote.sum())} states exceeded the divergence cap {divergence_cap:g}; set to +inf")
            new[promote] = np.inf
        frozen |= ~np.isfinite(new)
        both = np.isfinite(new) & np.isfinite(v)
        residual = float(np.max(np.abs(new[both] - v[both]), initial=0.0))
        v = new
        if callback is not None:
            callback(iterations, v.copy())
        if residual < tol:
            break

    witnesses = {}
    q = _bellman(imdp, v, mode, witnesses)
    if choice is None:
        choice = np.where(imdp.goal_mask, -1, np.argmin(q, axis=0))
    report = ConvergenceReport(mode, iterations, residual, residual < tol, float(tol),
                               float(divergence_cap), int(np.count_nonzero(~np.isfinite(v))))
    if report.converged:
        logger.info(f"Value iteration ({mode.value}) converged after {iterations} sweeps, "
                    f"residual {residual:.3e}, {report.infinite_states} infinite states")
    else:
        logger.warning(f"Value iteration ({mode.value}) stopped at max_iter={iterations} "
                       f"with residual {residual:.3e} >= tol {tol:g}")
    return Solution(ValueTable(imdp.states, v), Strategy(imdp.states, imdp.actions, choice),
                    Adversary(imdp.n_states, mode, witnesses), report)


def bounded_horizon_values(imdp, strategy, n_steps, mode):
    """Expected cost of the first ``n_steps`` steps under ``strategy`` and the stepwise greedy adversary."""
    mode = Mode.parse(mode)
    if int(n_steps) < 1:
        raise InvalidArgumentError("n_steps must be a positive integer")
    strategy.require_total(imdp)
    v = np.zeros(imdp.n_states)
    for _ in range(int(n_steps)):
        v = _select(_bellman(imdp, v, mode), strategy.choice)
    return ValueTable(imdp.states, v)


def _horizon_cost(transitions, costs, horizon):
    v = np.zeros(costs.size)
    for _ in range(horizon):
        v = costs + transitions @ v
    return v


def brute_force_values(imdp, horizon):
    """Exhaustive lower and upper horizon-bounded cost over stationary strategies and candidate adversaries."""
    limits = BRUTE_FORCE_LIMITS
    if int(horizon) < 1:
        raise InvalidArgumentError("horizon must be a positive integer")
    if (imdp.n_states > limits['states'] or imdp.n_actions > limits['actions']
            or horizon > limits['horizon']):
        raise OversizeError(f"Brute force is limited to {limits}; got {imdp.n_states} states, "
                            f"{imdp.n_actions} actions, horizon {horizon}")
    n = imdp.n_states
    open_states = [s for s in range(n) if s not in imdp.goal]
    options = {}
    for s in open_states:
        for a in range(imdp.n_actions):
            credal, cost = imdp.entry(s, a)
            if not isinstance(credal, CandidateCredal):
                raise InvalidArgumentError("Brute force needs candidate credal sets")
            if credal.size > limits['candidates']:
                raise OversizeError(f"({imdp.states[s]}, {imdp.actions[a]}) has {credal.size} candidates")
            options[(s, a)] = (credal.dense(n), cost)

    lower, upper = np.full(n, np.inf), np.full(n, np.inf)
    for actions in itertools.product(range(imdp.n_actions), repeat=len(open_states)):
        pairs = [options[(s, a)] for s, a in zip(open_states, actions)]
        best, worst = np.full(n, np.inf), np.full(n, -np.inf)
        for picks in itertools.product(*(range(len(dists)) for dists, _ in pairs)):
            transitions = np.zeros((n, n))
            c_min, c_max = np.zeros(n), np.zeros(n)
            for s, (dists, cost), k in zip(open_states, pairs, picks):
                transitions[s] = dists[k]
                c_min[s], c_max[s] = cost.c_min, cost.c_max
            best = np.minimum(best, _horizon_cost(transitions, c_min, horizon))
            worst = np.maximum(worst, _horizon_cost(transitions, c_max, horizon))
        lower = np.minimum(lower, best)
        upper = np.minimum(upper, worst)
    lower[imdp.goal_mask] = 0.0
    upper[imdp.goal_mask] = 0.0
    return ValueTable(imdp.states, lower), ValueTable(imdp.states, upper)
