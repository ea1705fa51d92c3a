"""Experiment runner: replicates, the learning/evaluation loop and run persistence.

A run directory holds a top-level ``manifest.json`` and ``metrics/`` plus one
``rep_XX`` directory per replicate::

    rep_00/manifest.json   config, seeds, code version, event count
    rep_00/events.log      one JSON event per line
    rep_00/robots/         genome, body-plan, best controller, trajectory
    rep_00/learners/       per-iteration learner logs
    rep_00/archive/        controller archive snapshots
    rep_00/sched_trace.log scheduler assignments and completions, if enabled
    rep_00/metrics/        tables recomputable from the files above
"""

import json
import logging
from concurrent.futures import Executor, ProcessPoolExecutor, ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from src import __version__
from src.archive import ControllerArchive, archive_key, archive_lookup, archive_update
from src.bodyplan import BodyPlan, DecodeParams
from src.controller import spec_for_plan, weights_dim
from src.errors import ConfigurationError, CorruptRunError
from src.evo import EvoEvent, EvoParams, EvoState, Individual, bootstrap, on_learning_complete
from src.metrics import (
    PoolSnapshot,
    fitness_by_index_table,
    morph_scalar,
    morph_variance_table,
    rank_sum_test,
    resample_trajectory,
    top_diversity_table,
    top_k,
    top_table,
    trajectory_bundle,
)
from src.models import EventAction, ExperimentConfig, LearnerStatus
from src.nipes import LearnerParams, LearnerState, ask, best_of_run, init_learner, is_terminated, tell
from src.sched import (
    EvalJob,
    EvalTask,
    IterationBarrier,
    TaskQueue,
    TraceRecord,
    episode_seed,
    evaluate_job,
)
from src.sim import Arena, SimParams, export_trajectory, load_trajectory

logger = logging.getLogger(__name__)

TOP_K = 20
METRIC_TABLES = (
    "fitness_by_index",
    "morph_variance",
    "top20_summary",
    "behavioural_variance",
    "top20_trajectories",
)


def replicate_seeds(master_seed: int, count: int) -> List[int]:
    """Independent replicate seeds spawned from the master seed."""
    children = np.random.SeedSequence(master_seed).spawn(count)
    return [int(child.generate_state(1)[0]) for child in children]


def learner_seed(replicate_seed: int, robot_index: int) -> int:
    sequence = np.random.SeedSequence(replicate_seed, spawn_key=(1, robot_index))
    return int(sequence.generate_state(1)[0])


def _robot_name(robot_index: int) -> str:
    return f"robot_{robot_index:05d}"


def _write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True))


def _read_json(path: Path) -> dict:
    try:
        return json.loads(path.read_text())
    except (OSError, ValueError) as exc:
        raise CorruptRunError(f"cannot read {path}: {exc}") from exc


class Coordinator:
    """Runs one replicate: evolution, learners and dispatch, all in one thread of control."""

    def __init__(
        self,
        config: ExperimentConfig,
        replicate_seed: int,
        out_dir: Path,
        arena: Arena,
        executor: Executor,
    ):
        self.config = config
        self.replicate_seed = replicate_seed
        self.out_dir = out_dir
        self.arena = arena
        self.executor = executor
        self.variant = config.parsed_variant
        self.learner_params = LearnerParams(
            budget=config.learner_budget,
            initial_population=config.initial_population,
            k=config.k_neighbours,
        )
        self.sim_params = SimParams(episode_seconds=config.episode_seconds)
        self.evo_params = EvoParams(
            pop_size=config.pop_size,
            robot_budget=config.robot_budget,
            k=config.k_neighbours,
            decode=DecodeParams(max_components=config.max_components),
        )
        self.evo_rng = np.random.default_rng([replicate_seed, 0])
        self.sched_rng = np.random.default_rng([replicate_seed, 1])
        self.archive = ControllerArchive()
        self.completions = 0
        self.clock = 0
        self.trace: Optional[List[TraceRecord]] = [] if config.sched_trace else None

    def _start_learner(self, individual: Individual) -> None:
        dim = weights_dim(spec_for_plan(individual.plan))
        stored = archive_lookup(self.archive, archive_key(individual.plan))
        individual.learner = init_learner(
            dim,
            learner_seed(self.replicate_seed, individual.robot_index),
            archive_controller=stored[0] if stored else None,
            params=self.learner_params,
        )

    def _round(self, learning: List[Individual]) -> Dict[int, list]:
        """One iteration of every active learner; returns results per robot in candidate order."""
        queue = TaskQueue(self.config.cores, self.trace)
        barriers: Dict[int, IterationBarrier] = {}
        plans: Dict[int, BodyPlan] = {}
        for individual in learning:
            learner: LearnerState = individual.learner
            candidates = ask(learner)
            barriers[individual.robot_index] = IterationBarrier(
                individual.robot_index, learner.iteration, len(candidates)
            )
            plans[individual.robot_index] = individual.plan
            queue.enqueue(
                [
                    EvalTask(
                        robot_index=individual.robot_index,
                        iteration=learner.iteration,
                        candidate_index=i,
                        weights=weights,
                        seed=episode_seed(
                            self.replicate_seed, individual.robot_index, learner.iteration, i
                        ),
                        available_at=self.clock,
                    )
                    for i, weights in enumerate(candidates)
                ]
            )
            self.clock += 1

        ready: Dict[int, list] = {}
        while len(queue):
            batch = []
            while (task := queue.next_assignment(self.sched_rng)) is not None:
                batch.append(task)
            jobs = [EvalJob(task, plans[task.robot_index], self.arena, self.sim_params) for task in batch]
            for task, result in zip(batch, self.executor.map(evaluate_job, jobs)):
                ordered = barriers[task.robot_index].add(queue.complete(task, result))
                if ordered is not None:
                    ready[task.robot_index] = ordered
        return ready

    def _finish(self, state: EvoState, individual: Individual) -> None:
        learner: LearnerState = individual.learner
        weights, fitness = best_of_run(learner)
        individual.best_weights = weights
        individual.fitness = fitness
        archive_update(self.archive, archive_key(individual.plan), weights, fitness)
        self._save_robot(individual, learner)
        on_learning_complete(state, individual)
        self.completions += 1
        every = self.config.archive_checkpoint_every
        if every and self.completions % every == 0:
            self.archive.save(self.out_dir / "archive" / f"checkpoint_{self.completions:05d}.json")

    def _save_robot(self, individual: Individual, learner: LearnerState) -> None:
        name = _robot_name(individual.robot_index)
        record = {
            "robot_index": individual.robot_index,
            "genome": individual.genome.to_dict(),
            "plan": individual.plan.to_dict(),
            "best_weights": individual.best_weights.tolist(),
            "fitness": individual.fitness,
            "status": learner.status.value,
            "evaluations": learner.evaluations_used,
            "restarts": learner.restart_count,
            "result": learner.best.result.to_dict(),
        }
        _write_json(self.out_dir / "robots" / f"{name}.json", record)
        export_trajectory(learner.best.result.trajectory, self.out_dir / "robots" / f"{name}_trajectory.csv")
        pd.DataFrame([entry.to_dict() for entry in learner.log]).to_csv(
            self.out_dir / "learners" / f"{name}.csv", index=False
        )

    def run(self) -> Path:
        for sub in ("robots", "learners", "archive", "metrics"):
            (self.out_dir / sub).mkdir(parents=True, exist_ok=True)
        logger.info("replicate %s: variant %s, seed %d", self.out_dir.name, self.variant, self.replicate_seed)
        state = bootstrap(self.variant, self.evo_params, self.evo_rng)
        for individual in state.learning:
            self._start_learner(individual)

        while state.learning:
            learning = sorted(state.learning, key=lambda m: m.robot_index)
            ready = self._round(learning)
            finished = []
            for individual in learning:
                tell(individual.learner, ready[individual.robot_index])
                if is_terminated(individual.learner) != LearnerStatus.RUNNING:
                    finished.append(individual)
            for individual in finished:
                self._finish(state, individual)
            for individual in state.learning:
                if individual.learner is None:
                    self._start_learner(individual)

        self.archive.save(self.out_dir / "archive" / "final.json")
        with open(self.out_dir / "events.log", "w") as f:
            for event in state.events:
                f.write(json.dumps(event.to_dict(), sort_keys=True) + "\n")
        if self.trace is not None:
            with open(self.out_dir / "sched_trace.log", "w") as f:
                for record in self.trace:
                    f.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
        _write_json(
            self.out_dir / "manifest.json",
            {
                "config": self.config.to_dict(),
                "replicate_seed": self.replicate_seed,
                "version": __version__,
                "events": len(state.events),
                "robots": state.robots_created,
            },
        )
        write_metrics(replay_metrics(self.out_dir), self.out_dir / "metrics")
        logger.info("replicate %s finished: %d robots", self.out_dir.name, state.robots_created)
        return self.out_dir


def _executor(cores: int) -> Executor:
    if cores == 1:
        return ThreadPoolExecutor(max_workers=1)
    return ProcessPoolExecutor(max_workers=cores)


def load_arena(config: ExperimentConfig) -> Arena:
    return Arena.load(config.arena) if config.arena else Arena.default()


def run_experiment(config: ExperimentConfig) -> Path:
    """Run every replicate of ``config`` and write the run directory."""
    config.validate()
    arena = load_arena(config)
    out = Path(config.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigurationError(f"cannot create output directory {out}: {exc}") from exc
    seeds = replicate_seeds(config.seed, config.replicates)
    names = [f"rep_{i:02d}" for i in range(config.replicates)]
    with _executor(config.cores) as executor:
        for name, seed in zip(names, seeds):
            Coordinator(config, seed, out / name, arena, executor).run()
    _write_json(
        out / "manifest.json",
        {
            "config": config.to_dict(),
            "replicate_seeds": seeds,
            "replicates": names,
            "version": __version__,
        },
    )
    (out / "metrics").mkdir(exist_ok=True)
    write_metrics(replay_metrics(out), out / "metrics")
    return out


def _load_events(rep_dir: Path, expected: int) -> List[EvoEvent]:
    events = []
    try:
        lines = (rep_dir / "events.log").read_text().splitlines()
    except OSError as exc:
        raise CorruptRunError(f"missing event log in {rep_dir}") from exc
    for number, line in enumerate(lines, 1):
        try:
            events.append(EvoEvent.from_dict(json.loads(line)))
        except (ValueError, KeyError) as exc:
            raise CorruptRunError(f"{rep_dir}/events.log line {number} is corrupt") from exc
    if len(events) != expected:
        raise CorruptRunError(
            f"{rep_dir}/events.log holds {len(events)} events, manifest says {expected}"
        )
    return events


def _replicate_tables(rep_dir: Path) -> Dict[str, pd.DataFrame]:
    manifest = _read_json(rep_dir / "manifest.json")
    try:
        expected = int(manifest["events"])
        config = ExperimentConfig.from_dict(manifest["config"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptRunError(f"{rep_dir}/manifest.json is incomplete") from exc
    events = _load_events(rep_dir, expected)

    fitness: Dict[int, float] = {}
    morph: Dict[int, float] = {}
    for event in events:
        if event.action != EventAction.ADDED:
            continue
        record = _read_json(rep_dir / "robots" / f"{_robot_name(event.robot_index)}.json")
        try:
            fitness[event.robot_index] = float(record["fitness"])
            morph[event.robot_index] = morph_scalar(BodyPlan.from_dict(record["plan"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptRunError(f"robot record {event.robot_index} is corrupt") from exc

    snapshots = []
    for event in events:
        if event.action != EventAction.UPDATED:
            continue
        try:
            snapshots.append(
                PoolSnapshot(
                    clock=event.clock,
                    members=event.members,
                    fitness=tuple(fitness[i] for i in event.members),
                    morph=tuple(morph[i] for i in event.members),
                )
            )
        except KeyError as exc:
            raise CorruptRunError(f"pool update references unknown robot {exc}") from exc

    history = sorted(fitness.items())
    k = min(TOP_K, len(history))
    if k < TOP_K:
        logger.warning("%s has only %d robots; top-%d tables use all of them", rep_dir.name, k, TOP_K)
    best = top_k(history, k)
    trajectories = []
    for index, _ in best:
        path = rep_dir / "robots" / f"{_robot_name(index)}_trajectory.csv"
        try:
            traj = load_trajectory(path)
        except (OSError, ValueError) as exc:
            raise CorruptRunError(f"cannot load trajectory {path}") from exc
        trajectories.append(resample_trajectory(traj, config.episode_seconds))
    return {
        "fitness_by_index": fitness_by_index_table(snapshots),
        "morph_variance": morph_variance_table(snapshots),
        "top20_summary": top_table(best),
        "behavioural_variance": top_diversity_table(
            best, [morph[index] for index, _ in best], trajectories, TOP_K
        ),
        "top20_trajectories": trajectory_bundle([index for index, _ in best], trajectories),
    }


def replay_metrics(run_dir: Union[str, Path]) -> Dict[str, pd.DataFrame]:
    """Recompute the metrics tables from stored artifacts without touching the directory."""
    run_dir = Path(run_dir)
    manifest = _read_json(run_dir / "manifest.json")
    if "replicates" not in manifest:
        return _replicate_tables(run_dir)
    combined: Dict[str, List[pd.DataFrame]] = {name: [] for name in METRIC_TABLES}
    for name in manifest["replicates"]:
        for table, frame in _replicate_tables(run_dir / name).items():
            combined[table].append(frame.assign(replicate=name))
    return {table: pd.concat(frames, ignore_index=True) for table, frames in combined.items()}


def write_metrics(tables: Dict[str, pd.DataFrame], metrics_dir: Path) -> None:
    for name, frame in tables.items():
        frame.to_csv(metrics_dir / f"{name}.csv", index=False)


def endpoint_fitness(run_dir: Union[str, Path]) -> List[float]:
    """Final mean parents' pool fitness of each replicate."""
    table = replay_metrics(run_dir)["fitness_by_index"]
    if "replicate" not in table:
        return [float(table["mean_fitness"].iloc[-1])]
    return [float(group["mean_fitness"].iloc[-1]) for _, group in table.groupby("replicate", sort=True)]


def compare(run_a: Union[str, Path], run_b: Union[str, Path], test: str = "ranksum") -> Tuple[float, float]:
    return rank_sum_test(endpoint_fitness(run_a), endpoint_fitness(run_b), test)


def load_config(path: Optional[str]) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc
    return ExperimentConfig.from_dict(data)
