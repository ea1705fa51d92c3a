"""Unit tests for evaluation scheduling."""

import numpy as np
import pytest

from src.errors import SchedulingError
from src.sched import (
    CompletionEvent,
    EvalJob,
    EvalTask,
    IterationBarrier,
    TaskQueue,
    episode_seed,
    evaluate_job,
)
from src.sim import Arena, SimParams
from tests.builders import FakeEval, axle_plan


def task(robot=0, candidate=0, available_at=0, iteration=0):
    return EvalTask(robot, iteration, candidate, np.zeros(3), seed=1, available_at=available_at)


class TestTaskQueue:
    """Test enqueue, dispatch and completion."""

    def test_enqueue(self):
        queue = TaskQueue(4).enqueue([task(candidate=i, available_at=5) for i in range(10)])
        assert len(queue.pending) == 10
        assert all(t.available_at == 5 for t in queue.pending)

    def test_duplicate_identity(self):
        queue = TaskQueue(1).enqueue([task()])
        with pytest.raises(SchedulingError):
            queue.enqueue([task()])

    def test_empty_queue(self):
        assert TaskQueue(1).next_assignment(np.random.default_rng(0)) is None

    def test_single_task(self):
        only = task()
        assert TaskQueue(1).enqueue([only]).next_assignment(np.random.default_rng(0)) is only

    def test_earliest_timestamp_first(self):
        rng = np.random.default_rng(0)
        queue = TaskQueue(3).enqueue([task(0, 0, 7), task(1, 0, 3), task(2, 0, 3)])
        picked = {queue.next_assignment(rng).available_at for _ in range(2)}
        assert picked == {3}
        assert queue.next_assignment(rng).available_at == 7

    def test_random_tie_break_is_uniform(self):
        """Each of two equally early tasks is picked about half the time."""
        rng = np.random.default_rng(42)
        counts = {0: 0, 1: 0}
        for _ in range(10_000):
            queue = TaskQueue(1).enqueue([task(0, 0, 3), task(1, 0, 3), task(2, 0, 7)])
            counts[queue.next_assignment(rng).robot_index] += 1
        assert 4700 < counts[0] < 5300
        assert counts[0] + counts[1] == 10_000

    def test_in_flight_is_bounded(self):
        rng = np.random.default_rng(0)
        queue = TaskQueue(2).enqueue([task(candidate=i) for i in range(5)])
        assert queue.next_assignment(rng) is not None
        assert queue.next_assignment(rng) is not None
        assert queue.next_assignment(rng) is None
        assert len(queue.in_flight) == 2

    def test_complete_frees_a_worker(self):
        rng = np.random.default_rng(0)
        queue = TaskQueue(1).enqueue([task(candidate=i) for i in range(2)])
        running = queue.next_assignment(rng)
        event = queue.complete(running, "result")
        assert event.task is running
        assert len(queue.in_flight) == 0
        assert queue.next_assignment(rng) is not None

    def test_complete_unknown_task(self):
        with pytest.raises(SchedulingError):
            TaskQueue(1).complete(task(), "result")

    def test_every_task_is_eventually_assigned(self):
        rng = np.random.default_rng(1)
        queue = TaskQueue(3).enqueue([task(robot=r, candidate=c, available_at=r) for r in range(4) for c in range(5)])
        seen = []
        while len(queue):
            batch = []
            while (t := queue.next_assignment(rng)) is not None:
                batch.append(t)
            for t in batch:
                queue.complete(t, None)
            seen.extend(batch)
        assert len(seen) == 20
        assert [t.available_at for t in seen] == sorted(t.available_at for t in seen)


class TestIterationBarrier:
    """Test per-iteration result assembly."""

    def test_results_in_candidate_order(self):
        """Out-of-order completions are returned in candidate order, exactly once."""
        barrier = IterationBarrier(robot_index=2, iteration=0, size=4)
        results = {i: FakeEval(i / 10, np.zeros((8, 8))) for i in range(4)}
        outputs = [barrier.add(CompletionEvent(task(2, i), results[i])) for i in (3, 0, 2, 1)]
        assert outputs[:3] == [None, None, None]
        assert [r.fitness for r in outputs[3]] == [0.0, 0.1, 0.2, 0.3]

    def test_duplicate_completion(self):
        barrier = IterationBarrier(0, 0, 2)
        barrier.add(CompletionEvent(task(0, 0), None))
        with pytest.raises(SchedulingError):
            barrier.add(CompletionEvent(task(0, 0), None))

    def test_foreign_task(self):
        with pytest.raises(SchedulingError):
            IterationBarrier(0, 0, 2).add(CompletionEvent(task(1, 0), None))


class TestSeedsAndJobs:
    """Test episode seeds and worker jobs."""

    def test_seed_depends_on_task_identity_only(self):
        assert episode_seed(5, 1, 2, 3) == episode_seed(5, 1, 2, 3)
        assert episode_seed(5, 1, 2, 3) != episode_seed(5, 1, 2, 4)
        assert episode_seed(5, 1, 2, 3) != episode_seed(6, 1, 2, 3)

    def test_evaluate_job(self):
        plan = axle_plan()
        job = EvalJob(
            EvalTask(0, 0, 0, np.zeros(62), seed=1, available_at=0),
            plan,
            Arena.default(),
            SimParams(episode_seconds=12.0),
        )
        result = evaluate_job(job)
        assert not result.moved
        assert result.fitness == pytest.approx(1 / 64)


class TestSchedulerTrace:
    """Test the optional assignment/completion trace."""

    def test_no_trace_by_default(self):
        """Without a trace list nothing is recorded."""
        queue = TaskQueue(1).enqueue([task()])
        queue.complete(queue.next_assignment(np.random.default_rng(0)), None)
        assert queue.trace is None

    def test_every_task_assigned_then_completed_once(self):
        """The trace holds one assignment and one later completion per task."""
        rng = np.random.default_rng(3)
        trace = []
        tasks = [task(robot=r, candidate=c, available_at=r % 2) for r in range(3) for c in range(4)]
        queue = TaskQueue(3, trace).enqueue(tasks)
        while len(queue):
            batch = []
            while (t := queue.next_assignment(rng)) is not None:
                batch.append(t)
            for t in batch:
                queue.complete(t, None)
        assert [r.sequence for r in trace] == list(range(24))
        position = {}
        for record in trace:
            key = (record.action, record.robot_index, record.iteration, record.candidate_index)
            assert key not in position
            position[key] = record.sequence
        for t in tasks:
            assigned = position[("assigned", *t.identity)]
            completed = position[("completed", *t.identity)]
            assert assigned < completed
        assert all(r.to_dict()["action"] in ("assigned", "completed") for r in trace)
