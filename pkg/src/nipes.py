"""NIP-ES: CMA-ES with novelty-blended ranking and increasing-population restarts.

The learner follows a strict ask/tell protocol. ``tell`` ranks candidates by
``F = n * N + (1 - n) * T`` where N is behavioural novelty, T task
performance and n the novelty ratio, which starts at 1 and decays by 0.05
per iteration. When both the best-T history and the population's behaviour
descriptors stagnate the search restarts with twice the population.

The distribution update is ``cmaes.CMA``. It minimises, so it is told ``-F``.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, List, Optional, Protocol, Sequence, Tuple

import numpy as np
from cmaes import CMA

from src.errors import InterfaceError, LifecycleError
from src.models import LearnerStatus

logger = logging.getLogger(__name__)

SEED_BOUND = 2**31 - 1


class Assessment(Protocol):
    """What tell needs from one evaluation (an ``EvalResult`` qualifies)."""

    fitness: float
    behaviour: np.ndarray
    moved: bool


@dataclass(frozen=True)
class LearnerParams:
    budget: int = 200
    initial_population: int = 10
    sigma0: float = 0.5
    novelty_step: float = 0.05
    k: int = 15
    archive_probability: float = 0.05
    stagnation_window: int = 20
    fitness_variance_threshold: float = 0.05
    descriptor_variance_threshold: float = 0.05
    no_move_limit: int = 50
    use_novelty: bool = True
    restarts: bool = True


@dataclass
class LearnerLogRecord:
    iteration: int
    population_size: int
    novelty_ratio: float
    best_fitness: float
    evaluations_used: int
    restarts: int

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "population_size": self.population_size,
            "novelty_ratio": self.novelty_ratio,
            "best_fitness": self.best_fitness,
            "evaluations_used": self.evaluations_used,
            "restarts": self.restarts,
        }


@dataclass
class BestCandidate:
    weights: np.ndarray
    fitness: float
    result: Assessment


@dataclass
class LearnerState:
    """Full mutable state of one learner; owned by a single coordinator."""

    dim: int
    params: LearnerParams
    rng: np.random.Generator
    optimizer: CMA
    novelty_ratio: float = 1.0
    novelty_steps: int = 0
    iteration: int = 0
    restart_count: int = 0
    evaluations_used: int = 0
    best_window: Deque[float] = field(default_factory=deque)
    no_move_streak: int = 0
    behaviour_archive: List[np.ndarray] = field(default_factory=list)
    status: LearnerStatus = LearnerStatus.RUNNING
    pending: Optional[np.ndarray] = None
    best: Optional[BestCandidate] = None
    log: List[LearnerLogRecord] = field(default_factory=list)

    @property
    def population_size(self) -> int:
        return self.optimizer.population_size

    @property
    def mean(self) -> np.ndarray:
        return self.optimizer.mean


def _new_optimizer(
    rng: np.random.Generator, params: LearnerParams, mean: np.ndarray, population_size: int
) -> CMA:
    return CMA(
        mean=np.asarray(mean, dtype=float).copy(),
        sigma=params.sigma0,
        population_size=population_size,
        seed=int(rng.integers(SEED_BOUND)),
    )


def init_learner(
    dim: int,
    seed: int,
    archive_controller: Optional[np.ndarray] = None,
    params: LearnerParams = LearnerParams(),
) -> LearnerState:
    """Start from the archived controller if given, else uniformly in [-1, 1]^dim."""
    if dim < 2:
        raise InterfaceError("learner dimension must be at least 2")
    rng = np.random.default_rng(seed)
    if archive_controller is not None:
        mean = np.asarray(archive_controller, dtype=float)
        if mean.shape != (dim,):
            raise InterfaceError(
                f"archive controller has {mean.shape} weights, learner expects {dim}"
            )
    else:
        mean = rng.uniform(-1.0, 1.0, dim)
    optimizer = _new_optimizer(rng, params, mean, params.initial_population)
    return LearnerState(
        dim=dim,
        params=params,
        rng=rng,
        optimizer=optimizer,
        best_window=deque(maxlen=params.stagnation_window),
    )


def ask(state: LearnerState) -> np.ndarray:
    """Draw lambda candidates from the current distribution; one per row."""
    if state.status != LearnerStatus.RUNNING:
        raise LifecycleError(f"ask on a terminated learner ({state.status.value})")
    if state.pending is not None:
        raise LifecycleError("ask called twice without tell")
    state.pending = np.array([state.optimizer.ask() for _ in range(state.population_size)])
    return state.pending.copy()


def behavioural_novelty(
    descriptors: np.ndarray, archive: Sequence[np.ndarray], k: int
) -> np.ndarray:
    """Mean distance of each descriptor to its k nearest among the others and the archive."""
    population = np.asarray(descriptors, dtype=float).reshape(len(descriptors), -1)
    diff = population[:, None, :] - population[None, :, :]
    within = np.sum(diff * diff, axis=-1)
    if archive:
        stored = np.asarray(archive, dtype=float).reshape(len(archive), -1)
        diff = population[:, None, :] - stored[None, :, :]
        against_archive = np.sum(diff * diff, axis=-1)
    else:
        against_archive = np.zeros((len(population), 0))
    scores = np.zeros(len(population))
    for i in range(len(population)):
        distances = np.concatenate([np.delete(within[i], i), against_archive[i]])
        if distances.size:
            scores[i] = np.sort(distances)[:k].mean()
    return scores


def _restart(state: LearnerState) -> None:
    state.restart_count += 1
    population_size = state.params.initial_population * 2 ** state.restart_count
    mean = state.rng.uniform(-1.0, 1.0, state.dim)
    state.optimizer = _new_optimizer(state.rng, state.params, mean, population_size)
    state.novelty_steps = 0
    state.novelty_ratio = 1.0
    state.best_window = deque(maxlen=state.params.stagnation_window)
    logger.debug("learner restart %d, population %d", state.restart_count, population_size)


def tell(state: LearnerState, evals: Sequence[Assessment]) -> LearnerState:
    """Rank the pending candidates and advance the learner by one iteration."""
    if state.pending is None:
        raise LifecycleError("tell called without a pending ask")
    if len(evals) != state.population_size:
        raise InterfaceError(f"expected {state.population_size} evaluations, got {len(evals)}")
    params = state.params
    candidates = state.pending
    performance = np.array([float(e.fitness) for e in evals])
    descriptors = np.array([np.asarray(e.behaviour, dtype=float).ravel() for e in evals])

    for weights, fitness, result in zip(candidates, performance, evals):
        if state.best is None or fitness > state.best.fitness:
            state.best = BestCandidate(weights.copy(), float(fitness), result)

    if params.use_novelty:
        novelty = behavioural_novelty(descriptors, state.behaviour_archive, params.k)
        blended = state.novelty_ratio * novelty + (1.0 - state.novelty_ratio) * performance
    else:
        blended = performance
    state.optimizer.tell([(x, -float(f)) for x, f in zip(candidates, blended)])

    state.novelty_steps += 1
    state.novelty_ratio = max(0.0, 1.0 - params.novelty_step * state.novelty_steps)
    for descriptor in descriptors:
        if state.rng.random() < params.archive_probability:
            state.behaviour_archive.append(descriptor.copy())

    state.best_window.append(float(performance.max()))
    state.iteration += 1
    state.evaluations_used += len(evals)
    for result in evals:
        state.no_move_streak = 0 if result.moved else state.no_move_streak + 1
    state.log.append(
        LearnerLogRecord(
            iteration=state.iteration,
            population_size=state.population_size,
            novelty_ratio=state.novelty_ratio,
            best_fitness=float(performance.max()),
            evaluations_used=state.evaluations_used,
            restarts=state.restart_count,
        )
    )
    state.pending = None

    if params.restarts and _stagnated(state, descriptors):
        _restart(state)

    if state.no_move_streak >= params.no_move_limit:
        state.status = LearnerStatus.DONE_NO_MOVE
    elif state.evaluations_used >= params.budget:
        state.status = LearnerStatus.DONE_BUDGET
    return state


def _stagnated(state: LearnerState, descriptors: np.ndarray) -> bool:
    params = state.params
    if len(state.best_window) < params.stagnation_window:
        return False
    fitness_variance = float(np.var(np.array(state.best_window)))
    descriptor_variance = float(np.var(descriptors, axis=0).mean())
    return (
        fitness_variance < params.fitness_variance_threshold
        and descriptor_variance < params.descriptor_variance_threshold
    )


def is_terminated(state: LearnerState) -> LearnerStatus:
    return state.status


def best_of_run(state: LearnerState) -> Tuple[np.ndarray, float]:
    """Highest task performance seen across all iterations and restarts (ties: earliest)."""
    if state.best is None:
        raise LifecycleError("best_of_run called before any tell")
    return state.best.weights.copy(), state.best.fitness
