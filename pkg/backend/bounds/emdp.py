"""
Euclidean MDP models: the semi-random walker, exact sampling of its truncated
uniform kernel, seeded Monte-Carlo strategy evaluation and a fine-grid
point-valued oracle.

Random streams: run ``i`` of an estimate with seed ``seed`` draws from
``Generator(PCG64(SeedSequence(seed).spawn(n)[i]))`` and consumes one
``(horizon, K)`` block of uniforms, row ``k`` at step ``k``.
"""
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    DegenerateKernelError,
    DomainViolationError,
    InvalidArgumentError,
    ParseError,
    UndefinedStrategyError,
)
from .geometry import TOL, Box, GridPartition, as_point

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ActionSpec:
    name: str
    drift: tuple
    noise_half_width: float
    cost: float

    def __post_init__(self):
        if not self.name:
            raise InvalidArgumentError("Action name must not be empty")
        object.__setattr__(self, 'drift', as_point(self.drift))
        if not self.noise_half_width > 0:
            raise InvalidArgumentError(f"Action {self.name}: noise half-width must be positive")
        if not self.cost >= 0:
            raise InvalidArgumentError(f"Action {self.name}: cost must be non-negative")
        object.__setattr__(self, 'noise_half_width', float(self.noise_half_width))
        object.__setattr__(self, 'cost', float(self.cost))

    def to_document(self):
        return {'name': self.name, 'drift': list(self.drift),
                'noise_half_width': self.noise_half_width, 'cost': self.cost}


@dataclass(frozen=True)
class WalkerModel:
    """Semi-random walker on a box with absorbing goal and failure regions."""

    domain: Box
    goal: Box
    failure: Box
    actions: tuple
    failure_penalty: float = 10.0
    name: str = 'walker'

    def __post_init__(self):
        actions = tuple(self.actions)
        if not actions:
            raise InvalidArgumentError("A model needs at least one action")
        names = [a.name for a in actions]
        if len(set(names)) != len(names):
            raise InvalidArgumentError(f"Duplicate action names: {names}")
        for box, label in ((self.goal, 'goal'), (self.failure, 'failure')):
            if box.dimension != self.domain.dimension or not box.issubset(self.domain, tol=TOL):
                raise InvalidArgumentError(f"The {label} box must lie inside the domain")
        if any(len(a.drift) != self.domain.dimension for a in actions):
            raise InvalidArgumentError("Action drifts must match the domain dimension")
        both = self.goal.intersect(self.failure)
        if both is not None and both.volume > TOL:
            raise InvalidArgumentError("Goal and failure regions overlap")
        if self.failure_penalty < 0:
            raise InvalidArgumentError("The failure penalty must be non-negative")
        object.__setattr__(self, 'actions', actions)
        object.__setattr__(self, 'failure_penalty', float(self.failure_penalty))

    @classmethod
    def default(cls):
        """The walker of the experiments: cross ``x = 1`` before ``t = 1``."""
        return cls(
            domain=Box((0.0, 0.0), (1.2, 1.2)),
            goal=Box((1.0, 0.0), (1.2, 1.0)),
            failure=Box((0.0, 1.0), (1.2, 1.2)),
            actions=(ActionSpec('fast', (0.25, 0.05), 0.1, 3.0),
                     ActionSpec('slow', (0.10, 0.10), 0.1, 1.0)),
            failure_penalty=10.0,
        )

    @property
    def dimension(self):
        return self.domain.dimension

    @property
    def action_names(self):
        return tuple(a.name for a in self.actions)

    def action_index(self, name):
        try:
            return self.action_names.index(name)
        except ValueError:
            raise InvalidArgumentError(f"Unknown action {name!r}; known: {list(self.action_names)}") from None

    def action(self, name):
        return self.actions[self.action_index(name)]

    def in_goal(self, points):
        return self.goal.mask(points, self.domain)

    def in_failure(self, points):
        return self.failure.mask(points, self.domain)

    def is_terminal(self, points):
        return self.in_goal(points) | self.in_failure(points)

    def terminal_kind(self, s):
        if self.in_goal([s])[0]:
            return 'goal'
        if self.in_failure([s])[0]:
            return 'failure'
        return None

    def to_document(self):
        return {'name': self.name, 'domain': self.domain.to_document(), 'goal': self.goal.to_document(),
                'failure': self.failure.to_document(), 'failure_penalty': self.failure_penalty,
                'actions': [a.to_document() for a in self.actions]}

    @classmethod
    def from_document(cls, doc):
        """Build a model from a validated model document."""
        try:
            return cls(
                domain=Box(doc['domain']['lo'], doc['domain']['hi']),
                goal=Box(doc['goal']['lo'], doc['goal']['hi']),
                failure=Box(doc['failure']['lo'], doc['failure']['hi']),
                actions=tuple(ActionSpec(a['name'], tuple(a['drift']), a['noise_half_width'], a['cost'])
                              for a in doc['actions']),
                failure_penalty=doc.get('failure_penalty', 10.0),
                name=doc.get('name', 'walker'),
            )
        except (KeyError, TypeError) as exc:
            raise ParseError(f"Malformed model document: {exc!r}") from exc

    def fingerprint(self):
        """SHA-256 of the canonical JSON document."""
        canonical = json.dumps(self.to_document(), sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def load_model(path):
    """Read and validate a JSON model file."""
    from .serializers import WalkerModelSerializer

    try:
        with open(path, encoding='utf-8') as handle:
            raw = json.load(handle)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc.msg}", line=exc.lineno) from exc
    serializer = WalkerModelSerializer(data=raw)
    if not serializer.is_valid():
        raise ParseError(f"{path}: invalid model: {serializer.errors}")
    model = WalkerModel.from_document(serializer.validated_data)
    logger.info(f"Loaded model {model.name} from {path} ({len(model.actions)} actions)")
    return model


def run_stream(seed, index, n_runs=None):
    """The random generator of run ``index`` among ``n_runs`` (default ``index + 1``)."""
    n_runs = index + 1 if n_runs is None else n_runs
    child = np.random.SeedSequence(seed).spawn(n_runs)[index]
    return np.random.Generator(np.random.PCG64(child))


def _successors(model, states, action_indices, uniforms):
    """Uniform successors on the truncated kernel boxes, one row per state."""
    drift = np.array([model.actions[a].drift for a in action_indices]).reshape(states.shape)
    half = np.array([model.actions[a].noise_half_width for a in action_indices])[:, None]
    center = states + drift
    lo = np.maximum(center - half, np.asarray(model.domain.lo))
    hi = np.minimum(center + half, np.asarray(model.domain.hi))
    if np.any(hi - lo <= 0):
        raise DegenerateKernelError("A successor box has zero extent inside the domain")
    return lo + uniforms * (hi - lo)


def _require_inside(model, s):
    s = np.asarray(as_point(s))
    if s.size != model.dimension:
        raise InvalidArgumentError(f"State {tuple(s)} does not have dimension {model.dimension}")
    if np.any(s < np.asarray(model.domain.lo) - TOL) or np.any(s > np.asarray(model.domain.hi) + TOL):
        raise DomainViolationError(f"State {tuple(s)} lies outside the model domain")
    return s


def kernel_sample(model, s, a, rng):
    """Draw one successor of ``s`` under action ``a``."""
    s = _require_inside(model, s)
    index = model.action_index(a)
    return tuple(_successors(model, s[None, :], [index], rng.random((1, model.dimension)))[0])


def step_cost(model, s, a, successor=None):
    """Cost of taking ``a`` in ``s``; the failure penalty is charged when ``successor`` enters failure."""
    spec = model.action(a)
    if model.is_terminal([s])[0]:
        return 0.0
    if successor is not None and model.in_failure([successor])[0]:
        return spec.cost + model.failure_penalty
    return spec.cost


class ConstantPolicy:
    """The same action everywhere."""

    def __init__(self, model, action):
        self.action = action
        self.index = model.action_index(action)

    def actions_at(self, points):
        return np.full(len(points), self.index, dtype=np.intp)


class RegionPolicy:
    """Action per partition cell; cells without an action are undefined."""

    def __init__(self, model, partition, choices):
        self.partition = partition
        self.choices = np.asarray(choices, dtype=np.intp)
        if self.choices.shape != (partition.n_regions,):
            raise InvalidArgumentError("One choice per partition cell is required")
        if np.any(self.choices >= len(model.actions)):
            raise InvalidArgumentError("Region policy refers to unknown actions")

    def actions_at(self, points):
        flat = self.partition.regions_of(points)
        chosen = self.choices[flat]
        if np.any(chosen < 0):
            region = self.partition.region_id(flat[np.flatnonzero(chosen < 0)[0]])
            raise UndefinedStrategyError(f"Strategy has no action for region {region}", region=region)
        return chosen


class FunctionPolicy:
    """Wraps a callable mapping a point to an action name (or None)."""

    def __init__(self, model, func):
        self.model = model
        self.func = func

    def actions_at(self, points):
        out = np.empty(len(points), dtype=np.intp)
        for i, point in enumerate(points):
            name = self.func(tuple(point))
            if name is None:
                raise UndefinedStrategyError(f"Strategy has no action at {tuple(point)}")
            out[i] = self.model.action_index(name)
        return out


@dataclass(frozen=True)
class Step:
    state: tuple
    action: str
    cost: float


@dataclass(frozen=True)
class Run:
    steps: tuple
    terminal: str
    final_state: tuple = field(default=())

    @property
    def total_cost(self):
        total = 0.0
        for step in self.steps:
            total += step.cost
        return total


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_runs: int
    seed: int

    def to_document(self):
        return {'mean': self.mean, 'std_error': self.std_error, 'n_runs': self.n_runs, 'seed': self.seed}


def rollout(model, policy, s0, horizon, rng):
    """Record one run; consumes the same uniforms as the matching Monte-Carlo run."""
    if int(horizon) < 1:
        raise InvalidArgumentError("horizon must be a positive integer")
    state = _require_inside(model, s0)[None, :]
    uniforms = rng.random((int(horizon), model.dimension))
    steps = []
    terminal = model.terminal_kind(state[0])
    for k in range(int(horizon)):
        if terminal is not None:
            break
        a = int(policy.actions_at(state)[0])
        nxt = _successors(model, state, [a], uniforms[k][None, :])
        cost = model.actions[a].cost + model.failure_penalty * float(model.in_failure(nxt)[0])
        steps.append(Step(tuple(state[0]), model.actions[a].name, cost))
        state = nxt
        terminal = model.terminal_kind(state[0])
    return Run(tuple(steps), terminal or 'horizon', tuple(state[0]))


def mc_expected_cost(model, policy, s0, horizon, n_runs, seed):
    """Monte-Carlo estimate of the expected run cost of ``policy`` from ``s0``."""
    horizon, n_runs = int(horizon), int(n_runs)
    if horizon < 1 or n_runs < 1:
        raise InvalidArgumentError("horizon and n_runs must be positive integers")
    s0 = _require_inside(model, s0)
    children = np.random.SeedSequence(seed).spawn(n_runs)
    uniforms = np.stack([np.random.Generator(np.random.PCG64(c)).random((horizon, model.dimension))
                         for c in children])
    states = np.tile(s0, (n_runs, 1))
    totals = np.zeros(n_runs)
    active = ~model.is_terminal(states)
    for k in range(horizon):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        actions = policy.actions_at(states[idx])
        nxt = _successors(model, states[idx], actions, uniforms[idx, k])
        costs = np.array([model.actions[a].cost for a in actions])
        totals[idx] += costs + model.failure_penalty * model.in_failure(nxt)
        states[idx] = nxt
        active[idx] = ~model.is_terminal(nxt)
    mean = float(np.sum(totals) / n_runs)
    std_error = float(np.std(totals, ddof=1) / math.sqrt(n_runs)) if n_runs > 1 else 0.0
    logger.info(f"MC estimate from {tuple(s0)}: {mean:.6f} ± {std_error:.6f} ({n_runs} runs, horizon {horizon})")
    return McEstimate(mean, std_error, n_runs, seed)


def fine_grid_oracle(model, fine_width, tol=1e-9, max_iter=100000, divergence_cap=1e9, threads=1):
    """Value iteration of the precise MDP whose cells move like their midpoints.

    Returns the converged :class:`~bounds.imdp.Solution` over the cell states
    (plus the named terminals) together with the fine partition.
    """
    from .abstraction import CredalMode, induce
    from .imdp import Mode, value_iteration

    if not fine_width > 0:
        raise InvalidArgumentError("fine_width must be positive")
    if fine_width > 0.0125:
        logger.warning(f"Fine-grid oracle with width {fine_width} is coarser than the recommended 0.0125")
    partition = GridPartition.uniform(model.domain, fine_width)
    # one lattice point per cell: the midpoint MDP
    induced = induce(model, partition, CredalMode.CANDIDATES, samples_per_axis=1, threads=threads,
                     warn_unsound=False)
    solution = value_iteration(induced.imdp, Mode.MIN, tol=tol, max_iter=max_iter, divergence_cap=divergence_cap)
    logger.info(f"Fine-grid oracle over {partition.n_regions} cells of width {fine_width}: "
                f"{solution.report.iterations} sweeps, converged={solution.report.converged}")
    return solution, partition
