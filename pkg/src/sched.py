"""Evaluation scheduling: (robot, controller) pairs handed to M workers.

Dispatch prefers the tasks that became available first and picks uniformly
among those sharing the earliest logical timestamp. Results are regrouped per
learner iteration and returned in candidate order, so dispatch order never
reaches the learning maths.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.bodyplan import BodyPlan
from src.errors import SchedulingError
from src.sim import Arena, EvalResult, SimParams, run_episode

TaskId = Tuple[int, int, int]


@dataclass(frozen=True, eq=False)
class EvalTask:
    robot_index: int
    iteration: int
    candidate_index: int
    weights: np.ndarray
    seed: int
    available_at: int

    @property
    def identity(self) -> TaskId:
        return (self.robot_index, self.iteration, self.candidate_index)


@dataclass(frozen=True, eq=False)
class CompletionEvent:
    task: EvalTask
    result: EvalResult


def episode_seed(replicate_seed: int, robot_index: int, iteration: int, candidate: int) -> int:
    """Per-episode seed; depends only on what is evaluated, never on who evaluates it."""
    sequence = np.random.SeedSequence(replicate_seed, spawn_key=(2, robot_index, iteration, candidate))
    return int(sequence.generate_state(1)[0])


ASSIGNED = "assigned"
COMPLETED = "completed"


@dataclass(frozen=True)
class TraceRecord:
    """One scheduler decision, numbered in the order it happened."""

    sequence: int
    action: str
    robot_index: int
    iteration: int
    candidate_index: int
    available_at: int

    def to_dict(self) -> dict:
        return {
            "sequence": self.sequence,
            "action": self.action,
            "robot_index": self.robot_index,
            "iteration": self.iteration,
            "candidate_index": self.candidate_index,
            "available_at": self.available_at,
        }


class TaskQueue:
    """Pending and in-flight evaluation tasks for a pool of ``workers``.

    Pass a ``trace`` list to have every assignment and completion appended to it.
    """

    def __init__(self, workers: int, trace: Optional[List[TraceRecord]] = None):
        if workers < 1:
            raise SchedulingError("a task queue needs at least one worker")
        self.workers = workers
        self.pending: List[EvalTask] = []
        self.in_flight: Dict[TaskId, EvalTask] = {}
        self._seen = set()
        self.trace = trace

    def enqueue(self, tasks: Sequence[EvalTask]) -> "TaskQueue":
        for task in tasks:
            if task.identity in self._seen:
                raise SchedulingError(f"task {task.identity} was already enqueued")
            self._seen.add(task.identity)
            self.pending.append(task)
        return self

    def next_assignment(self, rng: np.random.Generator) -> Optional[EvalTask]:
        """Earliest-available task, chosen at random among equal timestamps."""
        if not self.pending or len(self.in_flight) >= self.workers:
            return None
        earliest = min(task.available_at for task in self.pending)
        ready = [i for i, task in enumerate(self.pending) if task.available_at == earliest]
        task = self.pending.pop(ready[int(rng.integers(len(ready)))])
        self.in_flight[task.identity] = task
        self._record(ASSIGNED, task)
        return task

    def complete(self, task: EvalTask, result: EvalResult) -> CompletionEvent:
        if task.identity not in self.in_flight:
            raise SchedulingError(f"task {task.identity} is not in flight")
        del self.in_flight[task.identity]
        self._record(COMPLETED, task)
        return CompletionEvent(task, result)

    def _record(self, action: str, task: EvalTask) -> None:
        if self.trace is not None:
            self.trace.append(
                TraceRecord(
                    len(self.trace),
                    action,
                    task.robot_index,
                    task.iteration,
                    task.candidate_index,
                    task.available_at,
                )
            )

    def __len__(self) -> int:
        return len(self.pending) + len(self.in_flight)


class IterationBarrier:
    """Collects one learner iteration's results until all lambda have arrived."""

    def __init__(self, robot_index: int, iteration: int, size: int):
        self.robot_index = robot_index
        self.iteration = iteration
        self.size = size
        self._results: Dict[int, EvalResult] = {}

    def add(self, event: CompletionEvent) -> Optional[List[EvalResult]]:
        """Record a completion; returns the ordered results once the iteration is full."""
        task = event.task
        if (task.robot_index, task.iteration) != (self.robot_index, self.iteration):
            raise SchedulingError(f"task {task.identity} belongs to another iteration")
        if task.candidate_index in self._results:
            raise SchedulingError(f"task {task.identity} completed twice")
        self._results[task.candidate_index] = event.result
        if len(self._results) < self.size:
            return None
        return [self._results[i] for i in range(self.size)]


@dataclass(frozen=True, eq=False)
class EvalJob:
    """Everything a worker process needs to run one episode."""

    task: EvalTask
    plan: BodyPlan
    arena: Arena
    params: SimParams


def evaluate_job(job: EvalJob) -> EvalResult:
    return run_episode(job.plan, job.task.weights, job.arena, job.task.seed, job.params)
