"""Two-pool evolution of body-plans: removal, tournament mating and the update cadence N.

Robots are bred into the learning pool, learn a controller there, and enter
the parents' pool when learning ends. Every N completions the parents' pool
is trimmed back to P and N new offspring are mated. N = 1 makes the
algorithm steady-state, N = P generational.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from src.bodyplan import (
    BodyPlan,
    DecodeParams,
    MorphDescriptor,
    bodyplan_novelty,
    develop,
    is_viable,
    morph_descriptor,
)
from src.cppn import CppnGenome, InnovationTracker, MutationParams, crossover, mutate, random_genome
from src.errors import ConfigurationError, GenerationError, InitializationError, LifecycleError
from src.models import EventAction, Objective, RemovalPolicy, Synchronicity, Variant

logger = logging.getLogger(__name__)

TOURNAMENT_SIZE = 4


@dataclass
class Individual:
    robot_index: int
    genome: CppnGenome
    plan: BodyPlan
    best_weights: Optional[np.ndarray] = None
    fitness: Optional[float] = None
    morph_novelty: Optional[float] = None
    learner: Optional[object] = None

    @property
    def descriptor(self) -> MorphDescriptor:
        return morph_descriptor(self.plan)


@dataclass(frozen=True)
class EvoParams:
    pop_size: int = 25
    robot_budget: int = 500
    k: int = 15
    archive_probability: float = 0.05
    max_retries: int = 100
    mutation: MutationParams = MutationParams()
    decode: DecodeParams = DecodeParams()


@dataclass
class EvoEvent:
    """One line of the event log."""

    action: EventAction
    variant: Optional[str] = None
    robot_index: Optional[int] = None
    clock: Optional[int] = None
    score: Optional[float] = None
    parents: Tuple[int, ...] = ()
    members: Tuple[int, ...] = ()

    def to_dict(self) -> dict:
        data = {"action": self.action.value}
        if self.variant is not None:
            data["variant"] = self.variant
        if self.robot_index is not None:
            data["robot_index"] = self.robot_index
        if self.clock is not None:
            data["clock"] = self.clock
        if self.score is not None:
            data["score"] = self.score
        if self.parents:
            data["parents"] = list(self.parents)
        if self.members:
            data["members"] = list(self.members)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "EvoEvent":
        return cls(
            action=EventAction(data["action"]),
            variant=data.get("variant"),
            robot_index=data.get("robot_index"),
            clock=data.get("clock"),
            score=data.get("score"),
            parents=tuple(data.get("parents", ())),
            members=tuple(data.get("members", ())),
        )


@dataclass
class EvoState:
    variant: Variant
    params: EvoParams
    rng: np.random.Generator
    tracker: InnovationTracker = field(default_factory=InnovationTracker)
    parents: List[Individual] = field(default_factory=list)
    learning: List[Individual] = field(default_factory=list)
    completions_since_update: int = 0
    morph_archive: List[MorphDescriptor] = field(default_factory=list)
    robots_created: int = 0
    added_count: int = 0
    filled: bool = False
    events: List[EvoEvent] = field(default_factory=list)

    @property
    def update_period(self) -> int:
        return 1 if self.variant.sync == Synchronicity.ASYNC else self.params.pop_size

    @property
    def budget_left(self) -> int:
        return max(0, self.params.robot_budget - self.robots_created)

    def _new_individual(self, genome: CppnGenome, plan: BodyPlan) -> Individual:
        individual = Individual(self.robots_created, genome, plan)
        self.robots_created += 1
        self.learning.append(individual)
        return individual


def bootstrap(variant: Variant, params: EvoParams, rng: np.random.Generator) -> EvoState:
    """Fill the learning pool with P random viable robots; the parents' pool starts empty."""
    if params.pop_size < TOURNAMENT_SIZE:
        raise ConfigurationError(f"population must hold at least {TOURNAMENT_SIZE} robots")
    state = EvoState(variant=variant, params=params, rng=rng)
    for _ in range(params.pop_size):
        for _ in range(params.max_retries):
            genome = random_genome(rng)
            plan = develop(genome, params.decode)
            if is_viable(plan):
                break
        else:
            raise InitializationError(
                f"no viable body-plan in {params.max_retries} random genomes"
            )
        individual = state._new_individual(genome, plan)
        state.events.append(
            EvoEvent(
                EventAction.SEEDED,
                variant=state.variant.name,
                robot_index=individual.robot_index,
            )
        )
    return state


def _members(state: EvoState) -> Tuple[int, ...]:
    return tuple(sorted(member.robot_index for member in state.parents))


def on_learning_complete(state: EvoState, individual: Individual) -> EvoState:
    """Move a finished robot to the parents' pool and run an update every N completions."""
    if all(member is not individual for member in state.learning):
        raise LifecycleError(f"robot {individual.robot_index} is not in the learning pool")
    if individual.fitness is None:
        raise LifecycleError(f"robot {individual.robot_index} finished without a performance")
    state.learning = [member for member in state.learning if member is not individual]
    state.parents.append(individual)
    state.added_count += 1
    state.events.append(
        EvoEvent(
            EventAction.ADDED,
            variant=state.variant.name,
            robot_index=individual.robot_index,
            score=individual.fitness,
        )
    )
    individual.learner = None
    P = state.params.pop_size

    if not state.filled:
        if len(state.parents) < P:
            return state
        state.filled = True
        _record_update(state)
        mating_step(state, P)
        return state

    state.completions_since_update += 1
    drained = state.budget_left == 0 and not state.learning
    if state.completions_since_update >= state.update_period or drained:
        removal_step(state, len(state.parents) - P)
        state.completions_since_update = 0
        _record_update(state)
        mating_step(state, state.update_period)
    return state


def _record_update(state: EvoState) -> None:
    state.events.append(
        EvoEvent(
            EventAction.UPDATED,
            variant=state.variant.name,
            clock=state.added_count,
            members=_members(state),
        )
    )
    logger.debug(
        "pool update at %d: mean fitness %.4f",
        state.added_count,
        float(np.mean([m.fitness for m in state.parents])),
    )


def removal_step(state: EvoState, count: int) -> List[Individual]:
    """Remove ``count`` parents: the oldest, or the worst with older ones first on ties."""
    if count <= 0:
        return []
    if state.variant.removal == RemovalPolicy.OLDEST:
        ranked = sorted(state.parents, key=lambda m: m.robot_index)
    else:
        ranked = sorted(state.parents, key=lambda m: (m.fitness, m.robot_index))
    removed = ranked[:count]
    gone = {member.robot_index for member in removed}
    state.parents = [member for member in state.parents if member.robot_index not in gone]
    for member in removed:
        state.events.append(
            EvoEvent(
                EventAction.REMOVED,
                variant=state.variant.name,
                robot_index=member.robot_index,
                score=member.fitness,
            )
        )
    return removed


def tournament_select(state: EvoState) -> Tuple[Individual, Individual]:
    """Sample four distinct parents and return the best two (ties: lower robot-index)."""
    pool = state.parents
    if len(pool) < TOURNAMENT_SIZE:
        raise ConfigurationError(
            f"tournament needs {TOURNAMENT_SIZE} parents, pool has {len(pool)}"
        )
    picks = state.rng.choice(len(pool), size=TOURNAMENT_SIZE, replace=False)
    entrants = [pool[int(i)] for i in picks]
    for entrant in entrants:
        if state.variant.objective == Objective.NOVELTY:
            others = [m.descriptor for m in pool if m is not entrant]
            entrant.morph_novelty = bodyplan_novelty(
                entrant.plan, others, state.morph_archive, state.params.k
            )
    scored = [
        (m.morph_novelty if state.variant.objective == Objective.NOVELTY else m.fitness, m)
        for m in entrants
    ]
    for entrant in entrants:
        if state.rng.random() < state.params.archive_probability:
            state.morph_archive.append(entrant.descriptor)
    scored.sort(key=lambda pair: (-pair[0], pair[1].robot_index))
    return scored[0][1], scored[1][1]


def _breed(
    state: EvoState,
) -> Tuple[Optional[CppnGenome], Optional[BodyPlan], Tuple[int, int], int]:
    params = state.params
    a, b = tournament_select(state)
    child = crossover(a.genome, b.genome, state.rng, a.fitness or 0.0, b.fitness or 0.0)
    child = replace(child, lineage=(a.robot_index, b.robot_index))
    for attempt in range(1, params.max_retries + 1):
        genome = mutate(child, state.rng, params.mutation, state.tracker)
        plan = develop(genome, params.decode)
        if is_viable(plan):
            return genome, plan, (a.robot_index, b.robot_index), attempt
    return None, None, (a.robot_index, b.robot_index), params.max_retries


def mating_step(state: EvoState, count: int) -> EvoState:
    """Add up to ``count`` viable offspring, never exceeding the robot budget."""
    count = min(count, state.budget_left)
    limit = state.params.max_retries * state.params.pop_size
    for _ in range(count):
        attempts = 0
        while True:
            genome, plan, parents, used = _breed(state)
            attempts += used
            if genome is not None:
                break
            if attempts > limit:
                raise GenerationError(f"no viable offspring after {attempts} attempts")
        individual = state._new_individual(genome, plan)
        state.events.append(
            EvoEvent(
                EventAction.MATED,
                variant=state.variant.name,
                robot_index=individual.robot_index,
                parents=parents,
            )
        )
    return state
