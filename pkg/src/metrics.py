"""Run analysis: pool fitness over time, morphological and behavioural diversity."""

from dataclasses import dataclass
from itertools import combinations
from typing import List, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from src.bodyplan import GRID, BodyPlan
from src.errors import AnalysisError, InterfaceError
from src.models import ComponentType
from src.sim import Trajectory

COUNT_CAP = 8
RESAMPLE_POINTS = 180

ResampledTrajectory = np.ndarray  # (180, 2)


@dataclass(frozen=True)
class PoolSnapshot:
    """Parents' pool at one update: clock value plus per-member scores."""

    clock: int
    members: Tuple[int, ...]
    fitness: Tuple[float, ...]
    morph: Tuple[float, ...]

    @property
    def mean_fitness(self) -> float:
        return float(np.mean(self.fitness))


def morph_scalar(plan: BodyPlan) -> float:
    """Capped component counts over 8 plus chassis extents over 11."""
    counts = sum(min(plan.count(kind) / COUNT_CAP, 1.0) for kind in ComponentType)
    return float(counts + sum(extent / GRID for extent in plan.extents()))


def morphological_variance(snapshot: PoolSnapshot) -> float:
    """Population variance (divide by P) of the members' morph scalars."""
    return float(np.var(np.asarray(snapshot.morph, dtype=float)))


def resample_trajectory(
    traj: Trajectory, episode_seconds: float = 60.0, points: int = RESAMPLE_POINTS
) -> ResampledTrajectory:
    """Linear interpolation at uniform timestamps; aborted runs hold their last position."""
    traj = np.asarray(traj, dtype=float)
    if traj.ndim != 2 or traj.shape[0] == 0 or traj.shape[1] != 3:
        raise InterfaceError("trajectory must be a non-empty array of (t, x, y) rows")
    grid = np.linspace(0.0, episode_seconds, points)
    t, x, y = traj[:, 0], traj[:, 1], traj[:, 2]
    return np.column_stack([np.interp(grid, t, x), np.interp(grid, t, y)])


def trajectory_distance(a: ResampledTrajectory, b: ResampledTrajectory) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise InterfaceError(f"trajectory shapes differ: {a.shape} vs {b.shape}")
    return float(np.mean(np.linalg.norm(a - b, axis=1)))


def behavioural_variance(trajs: Sequence[ResampledTrajectory]) -> float:
    """Mean pairwise trajectory distance."""
    if len(trajs) < 2:
        raise AnalysisError("behavioural variance needs at least two trajectories")
    distances = [trajectory_distance(a, b) for a, b in combinations(trajs, 2)]
    return float(np.mean(distances))


def top_k(history: Sequence[Tuple[int, float]], k: int = 20) -> List[Tuple[int, float]]:
    """The k best (robot_index, fitness) pairs over a run; ties go to the lower index."""
    if len(history) < k:
        raise AnalysisError(f"need {k} evaluated robots, run has {len(history)}")
    ranked = sorted(history, key=lambda item: (-item[1], item[0]))
    return ranked[:k]


def fitness_by_index_table(snapshots: Sequence[PoolSnapshot]) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "clock": [s.clock for s in snapshots],
            "mean_fitness": [s.mean_fitness for s in snapshots],
        }
    )


def morph_variance_table(snapshots: Sequence[PoolSnapshot]) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "clock": [s.clock for s in snapshots],
            "morph_variance": [morphological_variance(s) for s in snapshots],
        }
    )


def top_table(top: Sequence[Tuple[int, float]]) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "rank": list(range(1, len(top) + 1)),
            "robot_index": [index for index, _ in top],
            "fitness": [fitness for _, fitness in top],
        }
    )


def top_diversity_table(
    top: Sequence[Tuple[int, float]],
    morph: Sequence[float],
    trajs: Sequence[ResampledTrajectory],
    requested_k: int = 20,
) -> pd.DataFrame:
    """One row for the best robots of a run: mean fitness, body and behaviour spread.

    ``requested_k`` records the k asked for; ``top_k`` how many robots the run had.
    """
    if len(morph) != len(top) or len(trajs) != len(top):
        raise InterfaceError("need one morph scalar and one trajectory per top robot")
    nan = float("nan")
    return pd.DataFrame(
        {
            "top_k": [len(top)],
            "requested_k": [requested_k],
            "top20_mean_fitness": [float(np.mean([f for _, f in top])) if top else nan],
            "top20_morph_variance": [float(np.var(np.asarray(morph, dtype=float))) if top else nan],
            "behavioural_variance": [behavioural_variance(trajs) if len(trajs) >= 2 else nan],
        }
    )


def trajectory_bundle(
    robot_indices: Sequence[int], trajs: Sequence[ResampledTrajectory]
) -> pd.DataFrame:
    """Long-format table (robot_index, point, x, y) for plotting."""
    frames = [
        pd.DataFrame(
            {
                "robot_index": index,
                "point": np.arange(len(traj)),
                "x": traj[:, 0],
                "y": traj[:, 1],
            }
        )
        for index, traj in zip(robot_indices, trajs)
    ]
    if not frames:
        return pd.DataFrame(columns=["robot_index", "point", "x", "y"])
    return pd.concat(frames, ignore_index=True)


def rank_sum_test(a: Sequence[float], b: Sequence[float], test: str = "ranksum") -> Tuple[float, float]:
    """Two-sided rank test between two samples: ``ranksum`` or ``mannwhitney``."""
    if len(a) < 1 or len(b) < 1:
        raise AnalysisError("rank test needs at least one value per sample")
    if test == "ranksum":
        result = stats.ranksums(a, b)
    elif test == "mannwhitney":
        result = stats.mannwhitneyu(a, b, alternative="two-sided")
    else:
        raise AnalysisError(f"unknown test {test!r}")
    return float(result.statistic), float(result.pvalue)
