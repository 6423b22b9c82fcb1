"""Define episode logs and evaluation metrics."""
import csv
from dataclasses import asdict, dataclass
import json
import logging
from pathlib import Path
from typing import Dict, List, Sequence, Union

import numpy as np

from cgrlpy.errors import ConfigError, DomainError

_LOGGER: logging.Logger = logging.getLogger(__name__)

OUTCOME_ARRIVED = "arrived"
OUTCOME_COLLIDED = "collided"
OUTCOME_TIMEOUT = "timeout"
OUTCOMES = (OUTCOME_ARRIVED, OUTCOME_COLLIDED, OUTCOME_TIMEOUT)

EPISODE_COLUMNS = ("episode", "reward", "steps", "outcome", "mean_speed")

PathLike = Union[str, Path]


@dataclass(frozen=True)
class EpisodeLog:
    """Define the summary of one episode."""

    episode: int
    reward: float
    steps: int
    outcome: str
    mean_speed: float

    def __post_init__(self) -> None:
        """Run post-init validation."""
        if self.outcome not in OUTCOMES:
            raise DomainError(f"Unknown episode outcome: {self.outcome}")

    @property
    def collided(self) -> bool:
        """Return whether the episode ended in a collision."""
        return self.outcome == OUTCOME_COLLIDED


@dataclass(frozen=True)
class MetricsReport:
    """Define aggregate evaluation metrics.

    ``collision_rate`` is a percentage; ``average_velocity`` averages the per-episode
    mean speeds in m/s.
    """

    collision_rate: float
    average_reward: float
    average_velocity: float
    episodes: int
    seed: int
    model: str
    task: str

    def as_dict(self) -> Dict[str, Union[float, int, str]]:
        """Return the report as a plain mapping."""
        return asdict(self)


def compute_metrics(
    logs: Sequence[EpisodeLog], *, model: str, task: str, seed: int
) -> MetricsReport:
    """Return the aggregate metrics of a set of episodes.

    :raises DomainError: when there are no episodes
    """
    if not logs:
        raise DomainError("Metrics are undefined for zero episodes")
    collisions = sum(1 for log in logs if log.collided)
    return MetricsReport(
        collision_rate=100.0 * collisions / len(logs),
        average_reward=float(np.mean([log.reward for log in logs])),
        average_velocity=float(np.mean([log.mean_speed for log in logs])),
        episodes=len(logs),
        seed=seed,
        model=model,
        task=task,
    )


def write_episode_csv(path: PathLike, logs: Sequence[EpisodeLog]) -> None:
    """Write episode rows with the fixed column order."""
    with open(path, "w", newline="", encoding="utf-8") as stream:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(EPISODE_COLUMNS)
        for log in logs:
            writer.writerow(
                [
                    log.episode,
                    repr(log.reward),
                    log.steps,
                    log.outcome,
                    repr(log.mean_speed),
                ]
            )


def read_episode_csv(path: PathLike) -> List[EpisodeLog]:
    """Read episode rows written by :func:`write_episode_csv`."""
    try:
        with open(path, newline="", encoding="utf-8") as stream:
            rows = list(csv.DictReader(stream))
    except OSError as err:
        raise ConfigError(f"Cannot read episode log {path}: {err}") from None
    try:
        return [
            EpisodeLog(
                episode=int(row["episode"]),
                reward=float(row["reward"]),
                steps=int(row["steps"]),
                outcome=row["outcome"],
                mean_speed=float(row["mean_speed"]),
            )
            for row in rows
        ]
    except (KeyError, TypeError, ValueError) as err:
        raise ConfigError(f"Malformed episode log {path}: {err}") from None


def write_report(path: PathLike, report: MetricsReport) -> None:
    """Write a report as JSON."""
    Path(path).write_text(
        json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def read_report(path: PathLike) -> MetricsReport:
    """Read a report written by :func:`write_report`."""
    try:
        return MetricsReport(**json.loads(Path(path).read_text(encoding="utf-8")))
    except (OSError, TypeError, ValueError) as err:
        raise ConfigError(f"Malformed report {path}: {err}") from None
