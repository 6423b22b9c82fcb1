"""Define the training and evaluation loops."""
import asyncio
from concurrent.futures import ThreadPoolExecutor
import csv
from dataclasses import dataclass, field
import json
import logging
import os
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from cgrlpy.agent import Learner, Transition, select_action
from cgrlpy.causal import CausalModel, cdrl_train_step
from cgrlpy.checkpoint import (
    Checkpoint,
    check_shapes,
    load_checkpoint,
    save_checkpoint,
)
from cgrlpy.errors import DomainError
from cgrlpy.graph import GraphObservation, observe
from cgrlpy.harness.config import (
    ExperimentConfig,
    build_config,
    config_echo,
    log_config,
)
from cgrlpy.harness.metrics import (
    OUTCOME_ARRIVED,
    OUTCOME_COLLIDED,
    OUTCOME_TIMEOUT,
    EpisodeLog,
    MetricsReport,
    compute_metrics,
    write_episode_csv,
    write_report,
)
from cgrlpy.harness.models import MODEL_RANDOM
from cgrlpy.numeric.tensor import ParameterSet
from cgrlpy.policy import parameter_shapes, q_values
from cgrlpy.sim import EgoAction, StepResult, WorldState, build_scenario, step
from cgrlpy.sim.geometry import Turn
from cgrlpy.util.dt import seconds_between, utc_stamp

_LOGGER: logging.Logger = logging.getLogger(__name__)

CHECKPOINT_NAME = "checkpoint.ckpt"
EPISODES_NAME = "episodes.csv"
LOSSES_NAME = "losses.csv"
MANIFEST_NAME = "run.json"

LOSS_COLUMNS = ("episode", "td_loss", "cdrl_loss")

PREFIX_ONLINE = "online/"
PREFIX_VGAE = "vgae/"

# Independent random streams derived from a master seed.
STREAM_LEARNER = 0
STREAM_CAUSAL = 1
STREAM_TRAIN_SCENARIO = 2
STREAM_EVAL_SCENARIO = 3
STREAM_EVAL_POLICY = 4

PathLike = Union[str, Path]

# Chooses an action for an observation; returns it with the edge weights it used.
ActionFn = Callable[[GraphObservation], Tuple[int, Optional[np.ndarray]]]


def derived_seed(master: int, stream: int, index: int = 0) -> int:
    """Return a reproducible child seed of ``master`` for a stream and index."""
    return int(
        np.random.SeedSequence([master, stream, index]).generate_state(1, np.uint32)[0]
    )


def outcome_of(result: StepResult) -> str:
    """Return the outcome label of a terminal step."""
    if result.flags.collided:
        return OUTCOME_COLLIDED
    if result.flags.arrived:
        return OUTCOME_ARRIVED
    return OUTCOME_TIMEOUT


@dataclass
class Rollout:
    """Define one finished episode and, optionally, its recorded frames."""

    log: EpisodeLog
    frames: List[Dict[str, Any]] = field(default_factory=list)


def rollout(
    config: ExperimentConfig,
    episode: int,
    scenario_seed: int,
    choose: ActionFn,
    *,
    record: bool = False,
    on_step: Optional[Callable[[Transition], None]] = None,
) -> Rollout:
    """Run one episode to termination.

    :param config: The experiment
    :type config: :meth:`cgrlpy.harness.config.ExperimentConfig`
    :param episode: The episode index (for the log)
    :type episode: ``int``
    :param scenario_seed: Seed of the initial placement
    :type scenario_seed: ``int``
    :param choose: Action selection
    :type choose: ``Callable``
    :param record: Whether to keep a frame per decision step
    :type record: ``bool``
    :param on_step: Called with every transition (training)
    :type on_step: ``Optional[Callable]``
    :rtype: :meth:`cgrlpy.harness.runner.Rollout`
    """
    world: WorldState = build_scenario(config.scenario, seed=scenario_seed)
    observation = observe(world, config.n_max)
    total_reward = 0.0
    speeds: List[float] = []
    frames: List[Dict[str, Any]] = []
    result: Optional[StepResult] = None

    while not world.terminal:
        action, weights = choose(observation)
        result = step(world, EgoAction(action))
        world = result.world
        next_observation = observe(world, config.n_max)
        total_reward += result.reward
        speeds.append(world.ego.speed)
        if record:
            frame = world.snapshot()
            frame.update({"action": action, "reward": result.reward})
            frames.append(frame)
        if on_step is not None:
            on_step(
                Transition(
                    state=observation,
                    action=action,
                    reward=result.reward,
                    next_state=next_observation,
                    terminal=result.terminal,
                    state_weights=weights,
                )
            )
        observation = next_observation

    return Rollout(
        log=EpisodeLog(
            episode=episode,
            reward=total_reward,
            steps=world.steps,
            outcome=outcome_of(result),
            mean_speed=float(np.mean(speeds)),
        ),
        frames=frames,
    )


def checkpoint_header(
    config: ExperimentConfig, seed: int, steps: int, episode: int
) -> Dict[str, Any]:
    """Return the header stored with a checkpoint."""
    return {
        "model": config.model,
        "task": config.task.value,
        "seed": seed,
        "step": steps,
        "episode": episode,
        "config": config_echo(config),
    }


def checkpoint_params(
    learner: Learner, causal: Optional[CausalModel] = None
) -> ParameterSet:
    """Return the tensors stored in a checkpoint."""
    tensors = dict(learner.params.prefixed(PREFIX_ONLINE))
    if causal is not None:
        tensors.update(causal.params.prefixed(PREFIX_VGAE))
    return ParameterSet(tensors)


def _loss_cell(value: Optional[float]) -> str:
    return "" if value is None else repr(value)


@dataclass
class TrainingRun:
    """Define the outputs of a training run."""

    logs: List[EpisodeLog]
    checkpoint: Path
    out_dir: Path


class Trainer:  # pylint: disable=too-many-instance-attributes
    """The training loop of one (model, task, seed) cell.

    :param config: The experiment
    :type config: :meth:`cgrlpy.harness.config.ExperimentConfig`
    :param seed: The master seed
    :type seed: ``int``
    """

    def __init__(self, config: ExperimentConfig, seed: int) -> None:
        """Initialize."""
        self.config: ExperimentConfig = config
        self.seed: int = seed
        self.learner: Learner = Learner(
            config.policy,
            config.trainer,
            np.random.default_rng(derived_seed(seed, STREAM_LEARNER)),
        )
        self.causal: Optional[CausalModel] = None
        if config.flags.use_causal:
            self.causal = CausalModel(
                config.cdrl, np.random.default_rng(derived_seed(seed, STREAM_CAUSAL))
            )
        self.episode: int = 0
        self._rl_steps: int = 0

    def edge_weights(self, observation: GraphObservation) -> Optional[np.ndarray]:
        """Return the causal edge weights of an observation (``None`` for baselines)."""
        if self.causal is None:
            return None
        return self.causal.edge_weights(observation)

    def _choose(
        self, observation: GraphObservation
    ) -> Tuple[int, Optional[np.ndarray]]:
        weights = self.edge_weights(observation)
        return (
            self.learner.act(observation, self.config.trainer.epsilon, weights),
            weights,
        )

    def _on_step(self, transition: Transition) -> None:
        if self.causal is not None:
            transition = Transition(
                state=transition.state,
                action=transition.action,
                reward=transition.reward,
                next_state=transition.next_state,
                terminal=transition.terminal,
                state_weights=transition.state_weights,
                next_weights=self.edge_weights(transition.next_state),
            )
        self.learner.remember(transition)
        if self.learner.train_step() is None:
            return
        self._rl_steps += 1
        cdrl = self.config.cdrl
        if (
            self.causal is not None
            and self.episode >= cdrl.warmup_episodes
            and self._rl_steps % cdrl.update_every == 0
        ):
            cdrl_train_step(self.causal, self.learner.buffer, self.learner)

    def run_episode(self) -> EpisodeLog:
        """Train through one episode and return its log."""
        result = rollout(
            self.config,
            self.episode,
            derived_seed(self.seed, STREAM_TRAIN_SCENARIO, self.episode),
            self._choose,
            on_step=self._on_step,
        )
        self.episode += 1
        return result.log

    def save(self, path: PathLike) -> None:
        """Write a checkpoint of the current state."""
        save_checkpoint(
            path,
            checkpoint_header(self.config, self.seed, self.learner.steps, self.episode),
            checkpoint_params(self.learner, self.causal),
        )


def _write_manifest(path: Path, config: ExperimentConfig, seed: int, **extra) -> None:
    manifest = {
        "model": config.model,
        "task": config.task.value,
        "seed": seed,
        "config": config_echo(config),
    }
    manifest.update(extra)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", "utf-8")


def run_training(
    config: ExperimentConfig, out_dir: PathLike, seed: Optional[int] = None
) -> TrainingRun:
    """Train one (model, task, seed) cell and write its artifacts to ``out_dir``.

    Writes ``episodes.csv``, ``losses.csv``, periodic ``checkpoint-NNNNN.ckpt`` files,
    the final ``checkpoint.ckpt`` and the ``run.json`` manifest. Everything except the
    manifest timestamps is a pure function of the configuration and seed.

    :param config: The experiment
    :type config: :meth:`cgrlpy.harness.config.ExperimentConfig`
    :param out_dir: The output directory (created when missing)
    :type out_dir: ``Union[str, pathlib.Path]``
    :param seed: The master seed (the first configured seed when omitted)
    :type seed: ``Optional[int]``
    :rtype: :meth:`cgrlpy.harness.runner.TrainingRun`
    """
    seed = config.seeds[0] if seed is None else seed
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    log_config(config)
    started = utc_stamp()
    _write_manifest(out / MANIFEST_NAME, config, seed, started=started)

    trainer = Trainer(config, seed)
    logs: List[EpisodeLog] = []
    with open(out / LOSSES_NAME, "w", newline="", encoding="utf-8") as stream:
        losses = csv.writer(stream, lineterminator="\n")
        losses.writerow(LOSS_COLUMNS)
        for _ in range(config.trainer.episodes):
            log = trainer.run_episode()
            logs.append(log)
            losses.writerow(
                [
                    log.episode,
                    _loss_cell(trainer.learner.pop_episode_loss()),
                    _loss_cell(
                        trainer.causal.pop_episode_loss() if trainer.causal else None
                    ),
                ]
            )
            _LOGGER.info(
                "Episode %s: reward %.3f, steps %s, %s, mean speed %.2f, epsilon %s",
                log.episode,
                log.reward,
                log.steps,
                log.outcome,
                log.mean_speed,
                config.trainer.epsilon,
            )
            if trainer.episode % config.checkpoint_every == 0:
                trainer.save(out / f"checkpoint-{trainer.episode:05d}.ckpt")

    write_episode_csv(out / EPISODES_NAME, logs)
    checkpoint = out / CHECKPOINT_NAME
    trainer.save(checkpoint)
    finished = utc_stamp()
    _write_manifest(
        out / MANIFEST_NAME,
        config,
        seed,
        started=started,
        finished=finished,
        duration_s=seconds_between(started, finished),
        episodes=len(logs),
        steps=trainer.learner.steps,
    )
    return TrainingRun(logs=logs, checkpoint=checkpoint, out_dir=out)


@dataclass(frozen=True)
class PolicySnapshot:
    """Define read-only policy weights restored from a checkpoint."""

    config: ExperimentConfig
    params: ParameterSet
    vgae: Optional[ParameterSet] = None


def restore(checkpoint: Checkpoint) -> PolicySnapshot:
    """Return the experiment config and weights stored in a checkpoint.

    :raises CheckpointFormatError: when the tensors do not match the stored config
    """
    config = build_config(checkpoint.config)
    params = checkpoint.params.select(PREFIX_ONLINE)
    check_shapes(params, parameter_shapes(config.policy))
    vgae = None
    if config.flags.use_causal:
        vgae = checkpoint.params.select(PREFIX_VGAE)
        causal = CausalModel(config.cdrl, np.random.default_rng(0))
        check_shapes(vgae, {name: t.shape for name, t in causal.params.items()})
    return PolicySnapshot(config=config, params=params, vgae=vgae)


@dataclass
class EvalRun:
    """Define the outputs of an evaluation."""

    report: MetricsReport
    logs: List[EpisodeLog]
    trajectories: List[Dict[str, Any]]


def _evaluate_episode(
    config: ExperimentConfig,
    snapshot: Optional[PolicySnapshot],
    seed: int,
    episode: int,
    record: bool,
) -> Rollout:
    causal = None
    if snapshot is not None and snapshot.vgae is not None:
        causal = CausalModel(config.cdrl, np.random.default_rng(0), snapshot.vgae)
    rng = np.random.default_rng(derived_seed(seed, STREAM_EVAL_POLICY, episode))

    def choose(observation: GraphObservation) -> Tuple[int, Optional[np.ndarray]]:
        if snapshot is None:
            return int(rng.integers(len(EgoAction))), None
        weights = causal.edge_weights(observation) if causal is not None else None
        q = q_values([observation], snapshot.params, config.policy, [weights])
        return select_action(q[0], 0.0, rng), weights

    return rollout(
        config,
        episode,
        derived_seed(seed, STREAM_EVAL_SCENARIO, episode),
        choose,
        record=record,
    )


def trajectory_document(
    config: ExperimentConfig, rollout_result: Rollout, seed: int
) -> Dict[str, Any]:
    """Return the JSON document of a recorded episode."""
    scenario = config.scenario
    return {
        "model": config.model,
        "task": config.task.value,
        "seed": seed,
        "episode": rollout_result.log.episode,
        "outcome": rollout_result.log.outcome,
        "lane_width": scenario.lane_width,
        "road_half_length": scenario.road_half_length,
        "vehicle_length": scenario.vehicle_length,
        "vehicle_width": scenario.vehicle_width,
        "frames": rollout_result.frames,
    }


async def async_run_eval(  # pylint: disable=too-many-arguments
    config: ExperimentConfig,
    snapshot: Optional[PolicySnapshot],
    *,
    episodes: int,
    seed: int = 0,
    record: int = 0,
    max_workers: Optional[int] = None,
) -> EvalRun:
    """Evaluate a greedy policy (or uniform random actions without a snapshot).

    Episodes run concurrently on a thread pool; results are ordered by episode.

    :raises DomainError: for zero episodes
    """
    if episodes < 1:
        raise DomainError("Evaluation needs at least one episode")
    loop = asyncio.get_running_loop()
    with ThreadPoolExecutor(max_workers=max_workers or os.cpu_count()) as pool:
        results = await asyncio.gather(
            *(
                loop.run_in_executor(
                    pool,
                    _evaluate_episode,
                    config,
                    snapshot,
                    seed,
                    episode,
                    episode < record,
                )
                for episode in range(episodes)
            )
        )
    logs = [result.log for result in results]
    model = MODEL_RANDOM if snapshot is None else config.model
    return EvalRun(
        report=compute_metrics(logs, model=model, task=config.task.value, seed=seed),
        logs=logs,
        trajectories=[
            trajectory_document(config, result, seed) for result in results[:record]
        ],
    )


def run_eval(  # pylint: disable=too-many-arguments
    checkpoint: Optional[PathLike],
    *,
    task: Optional[Union[str, Turn]] = None,
    episodes: Optional[int] = None,
    seed: int = 0,
    record: int = 0,
    random_policy: bool = False,
    config: Optional[ExperimentConfig] = None,
) -> EvalRun:
    """Evaluate a checkpoint greedily over fresh scenarios.

    The checkpoint file is only read. With ``random_policy`` the actions are uniform
    random and the checkpoint (if any) only supplies the configuration.

    :param checkpoint: The checkpoint to evaluate
    :type checkpoint: ``Optional[Union[str, pathlib.Path]]``
    :param task: Overrides the trained task
    :type task: ``Optional[str]``
    :param episodes: Number of episodes (the configured count when omitted)
    :type episodes: ``Optional[int]``
    :param seed: The evaluation seed
    :type seed: ``int``
    :param record: Number of leading episodes to record for rendering
    :type record: ``int``
    :rtype: :meth:`cgrlpy.harness.runner.EvalRun`
    """
    snapshot = None
    if checkpoint is not None:
        snapshot = restore(load_checkpoint(checkpoint))
        config = snapshot.config
    if config is None:
        raise DomainError("Evaluation needs a checkpoint or a configuration")
    config = config.with_overrides(task=task)
    if random_policy:
        snapshot = None
    elif snapshot is None:
        raise DomainError("Greedy evaluation needs a checkpoint")
    return asyncio.run(
        async_run_eval(
            config,
            snapshot,
            episodes=config.eval_episodes if episodes is None else episodes,
            seed=seed,
            record=record,
        )
    )


def eval_stem(report: MetricsReport) -> str:
    """Return the file stem of an evaluation's outputs."""
    return f"eval-{report.model}-{report.task}-{report.seed}"


def write_eval_outputs(result: EvalRun, out_dir: PathLike) -> List[Path]:
    """Write the report JSON, the episode CSV and any recorded trajectories."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = eval_stem(result.report)
    written = [out / f"{stem}.json", out / f"{stem}.csv"]
    write_report(written[0], result.report)
    write_episode_csv(written[1], result.logs)
    for document in result.trajectories:
        path = out / f"trajectory-{stem[5:]}-{document['episode']:05d}.json"
        path.write_text(json.dumps(document, sort_keys=True) + "\n", encoding="utf-8")
        written.append(path)
    return written
