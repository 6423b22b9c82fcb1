"""Define experiment configuration files.

A configuration is an INI file with the sections ``[scenario]``, ``[idm]``,
``[policy]``, ``[trainer]``, ``[cdrl]`` and ``[experiment]``. Every key is optional
(defaults come from the dataclasses) and unknown keys are rejected.
"""
import configparser
from dataclasses import asdict, dataclass, replace
import logging
from pathlib import Path
from typing import Any, Callable, Dict, Mapping, Optional, Tuple, Union

import voluptuous as vol

from cgrlpy.agent import TrainerConfig
from cgrlpy.causal import CdrlConfig
from cgrlpy.errors import ConfigError
from cgrlpy.graph import DEFAULT_N_MAX
from cgrlpy.harness.models import MODELS, ModelFlags, model_flags, policy_for
from cgrlpy.policy import PolicyConfig
from cgrlpy.sim import RewardWeights, ScenarioConfig, SpeedMap
from cgrlpy.sim.geometry import Turn
from cgrlpy.sim.idm import IdmParams

_LOGGER: logging.Logger = logging.getLogger(__name__)

SECTION_CDRL = "cdrl"
SECTION_EXPERIMENT = "experiment"
SECTION_IDM = "idm"
SECTION_POLICY = "policy"
SECTION_SCENARIO = "scenario"
SECTION_TRAINER = "trainer"

SECTIONS = (
    SECTION_SCENARIO,
    SECTION_IDM,
    SECTION_POLICY,
    SECTION_TRAINER,
    SECTION_CDRL,
    SECTION_EXPERIMENT,
)

TASKS = [turn.value for turn in Turn]

# Architecture flags come from the model id, not the file.
POLICY_KEYS = ("hidden_dim", "gat_heads", "gcn2_alpha", "gcn2_lambda", "leaky_slope")


def _int(minimum: Optional[int] = None, maximum: Optional[int] = None):
    return vol.All(vol.Coerce(int), vol.Range(min=minimum, max=maximum))


def _float(minimum: Optional[float] = None, maximum: Optional[float] = None):
    return vol.All(vol.Coerce(float), vol.Range(min=minimum, max=maximum))


def _seed_list(value: Any) -> Tuple[int, ...]:
    """Coerce ``"0, 1, 2"`` or ``[0, 1, 2]`` into a tuple of seeds."""
    if isinstance(value, str):
        value = [part for part in value.replace(",", " ").split() if part]
    try:
        seeds = tuple(int(seed) for seed in value)
    except (TypeError, ValueError) as err:
        raise vol.Invalid(f"invalid seed list: {value}") from err
    if not seeds or any(seed < 0 for seed in seeds):
        raise vol.Invalid("seeds must be a non-empty list of non-negative integers")
    return seeds


SCENARIO_SCHEMA = vol.Schema(
    {
        vol.Optional(
            "n_human_vehicles", default=ScenarioConfig.n_human_vehicles
        ): _int(0, 63),
        vol.Optional(
            "road_half_length", default=ScenarioConfig.road_half_length
        ): _float(10.0),
        vol.Optional("lane_width", default=ScenarioConfig.lane_width): _float(1.0),
        vol.Optional("sim_frequency", default=ScenarioConfig.sim_frequency): _int(1),
        vol.Optional(
            "policy_frequency", default=ScenarioConfig.policy_frequency
        ): _int(1),
        vol.Optional("horizon", default=ScenarioConfig.horizon): _int(1),
        vol.Optional("rng_seed", default=ScenarioConfig.rng_seed): _int(0),
        vol.Optional(
            "ego_initial_speed", default=ScenarioConfig.ego_initial_speed
        ): _float(0.0),
        vol.Optional("ego_speed_cap", default=ScenarioConfig.ego_speed_cap): _float(
            0.0
        ),
        vol.Optional(
            "ego_acceleration", default=ScenarioConfig.ego_acceleration
        ): _float(0.0),
        vol.Optional("hv_speed_low", default=ScenarioConfig.hv_speed_low): _float(
            0.1
        ),
        vol.Optional("hv_speed_high", default=ScenarioConfig.hv_speed_high): _float(
            0.1
        ),
        vol.Optional(
            "vehicle_length", default=ScenarioConfig.vehicle_length
        ): _float(0.1),
        vol.Optional("vehicle_width", default=ScenarioConfig.vehicle_width): _float(
            0.1
        ),
        vol.Optional(
            "conflict_lookahead", default=ScenarioConfig.conflict_lookahead
        ): _float(0.0),
        vol.Optional("w_collision", default=RewardWeights.collision): _float(),
        vol.Optional("w_high_speed", default=RewardWeights.high_speed): _float(),
        vol.Optional("w_on_road", default=RewardWeights.on_road): _float(),
        vol.Optional(
            "w_task_completion", default=RewardWeights.task_completion
        ): _float(),
        vol.Optional("speed_x0", default=SpeedMap.x0): _float(),
        vol.Optional("speed_x1", default=SpeedMap.x1): _float(),
        vol.Optional("speed_y0", default=SpeedMap.y0): _float(),
        vol.Optional("speed_y1", default=SpeedMap.y1): _float(),
    }
)

IDM_SCHEMA = vol.Schema(
    {
        vol.Optional("a_max", default=IdmParams.a_max): _float(0.0),
        vol.Optional("delta", default=IdmParams.delta): _float(0.0),
        vol.Optional("T", default=IdmParams.T): _float(0.0),
        vol.Optional("s0", default=IdmParams.s0): _float(0.0),
        vol.Optional("b", default=IdmParams.b): _float(),
        vol.Optional("v0", default=IdmParams.v0): _float(0.0),
    }
)

POLICY_SCHEMA = vol.Schema(
    {
        vol.Optional("hidden_dim", default=PolicyConfig.hidden_dim): _int(1),
        vol.Optional("gat_heads", default=PolicyConfig.gat_heads): _int(1),
        vol.Optional("gcn2_alpha", default=PolicyConfig.gcn2_alpha): _float(0.0, 1.0),
        vol.Optional("gcn2_lambda", default=PolicyConfig.gcn2_lambda): _float(0.0),
        vol.Optional("leaky_slope", default=PolicyConfig.leaky_slope): _float(0.0),
    }
)

TRAINER_SCHEMA = vol.Schema(
    {
        vol.Optional("gamma", default=TrainerConfig.gamma): _float(0.0, 0.999999),
        vol.Optional(
            "learning_rate", default=TrainerConfig.learning_rate
        ): _float(0.0),
        vol.Optional("batch_size", default=TrainerConfig.batch_size): _int(1),
        vol.Optional("epsilon", default=TrainerConfig.epsilon): _float(0.0, 1.0),
        vol.Optional("target_update", default=TrainerConfig.target_update): _int(1),
        vol.Optional("episodes", default=TrainerConfig.episodes): _int(0),
        vol.Optional(
            "replay_capacity", default=TrainerConfig.replay_capacity
        ): _int(1),
        vol.Optional("grad_clip", default=TrainerConfig.grad_clip): _float(0.0),
        vol.Optional("q_alarm", default=TrainerConfig.q_alarm): _float(0.0),
    }
)

CDRL_SCHEMA = vol.Schema(
    {
        vol.Optional("alpha", default=CdrlConfig.alpha): _float(0.0),
        vol.Optional("lambda1", default=CdrlConfig.lambda1): _float(0.0),
        vol.Optional("lambda2", default=CdrlConfig.lambda2): _float(0.0),
        vol.Optional("learning_rate", default=CdrlConfig.learning_rate): _float(0.0),
        vol.Optional("batch_size", default=CdrlConfig.batch_size): _int(2),
        vol.Optional("hidden_dim", default=CdrlConfig.hidden_dim): _int(1),
        vol.Optional("latent_dim", default=CdrlConfig.latent_dim): _int(2),
        vol.Optional("grad_clip", default=CdrlConfig.grad_clip): _float(0.0),
        vol.Optional("update_every", default=CdrlConfig.update_every): _int(1),
        vol.Optional(
            "warmup_episodes", default=CdrlConfig.warmup_episodes
        ): _int(0),
    }
)

EXPERIMENT_SCHEMA = vol.Schema(
    {
        vol.Optional("model", default="cgrl"): vol.In(list(MODELS)),
        vol.Optional("task", default=Turn.straight.value): vol.In(TASKS),
        vol.Optional("seeds", default=(0,)): _seed_list,
        vol.Optional("eval_episodes", default=200): _int(0),
        vol.Optional("checkpoint_every", default=100): _int(1),
        vol.Optional("n_max", default=DEFAULT_N_MAX): _int(2),
    }
)

SCHEMAS: Dict[str, vol.Schema] = {
    SECTION_SCENARIO: SCENARIO_SCHEMA,
    SECTION_IDM: IDM_SCHEMA,
    SECTION_POLICY: POLICY_SCHEMA,
    SECTION_TRAINER: TRAINER_SCHEMA,
    SECTION_CDRL: CDRL_SCHEMA,
    SECTION_EXPERIMENT: EXPERIMENT_SCHEMA,
}


@dataclass(frozen=True)  # pylint: disable=too-many-instance-attributes
class ExperimentConfig:
    """Define one experiment: a model, a task, seeds and every component config."""

    scenario: ScenarioConfig
    policy: PolicyConfig
    trainer: TrainerConfig
    cdrl: CdrlConfig
    model: str = "cgrl"
    task: Turn = Turn.straight
    seeds: Tuple[int, ...] = (0,)
    eval_episodes: int = 200
    checkpoint_every: int = 100
    n_max: int = DEFAULT_N_MAX

    def __post_init__(self) -> None:
        """Run post-init validation."""
        model_flags(self.model)
        if self.scenario.n_human_vehicles + 1 > self.n_max:
            raise ConfigError(
                f"n_max {self.n_max} cannot hold {self.scenario.n_human_vehicles} "
                "human vehicles plus the ego"
            )
        if self.scenario.ego_task is not self.task:
            object.__setattr__(
                self, "scenario", replace(self.scenario, ego_task=self.task)
            )

    @property
    def flags(self) -> ModelFlags:
        """Return the flags of the configured model."""
        return model_flags(self.model)

    def with_overrides(
        self,
        *,
        model: Optional[str] = None,
        task: Optional[Union[str, Turn]] = None,
        seed: Optional[int] = None,
        episodes: Optional[int] = None,
    ) -> "ExperimentConfig":
        """Return a copy with command-line overrides applied."""
        config = self
        if model is not None:
            config = replace(
                config, model=model, policy=policy_for(model, config.policy)
            )
        if task is not None:
            try:
                config = replace(config, task=Turn(task))
            except ValueError:
                raise ConfigError(f"Unknown task: {task}") from None
        if seed is not None:
            config = replace(config, seeds=(seed,))
        if episodes is not None:
            config = replace(config, trainer=replace(config.trainer, episodes=episodes))
        return config


def _validated(section: str, values: Mapping[str, Any]) -> Dict[str, Any]:
    try:
        return SCHEMAS[section](dict(values))
    except vol.Invalid as err:
        raise ConfigError(f"Invalid [{section}] configuration: {err}") from None


def _build(factory: Callable[..., Any], **values: Any) -> Any:
    try:
        return factory(**values)
    except TypeError as err:
        raise ConfigError(f"Invalid configuration: {err}") from None


def build_config(sections: Mapping[str, Mapping[str, Any]]) -> ExperimentConfig:
    """Return an experiment config from raw section mappings (strings allowed).

    :param sections: Section name to key/value mapping
    :type sections: ``Mapping[str, Mapping[str, Any]]``
    :rtype: :meth:`cgrlpy.harness.config.ExperimentConfig`
    """
    unknown = set(sections) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"Unknown configuration sections: {sorted(unknown)}")
    values = {
        section: _validated(section, sections.get(section, {}))
        for section in SECTIONS
    }

    scenario = dict(values[SECTION_SCENARIO])
    experiment = values[SECTION_EXPERIMENT]
    reward_weights = RewardWeights(
        collision=scenario.pop("w_collision"),
        high_speed=scenario.pop("w_high_speed"),
        on_road=scenario.pop("w_on_road"),
        task_completion=scenario.pop("w_task_completion"),
    )
    speed_map = SpeedMap(
        x0=scenario.pop("speed_x0"),
        x1=scenario.pop("speed_x1"),
        y0=scenario.pop("speed_y0"),
        y1=scenario.pop("speed_y1"),
    )
    task = Turn(experiment["task"])
    model = experiment["model"]

    return ExperimentConfig(
        scenario=_build(
            ScenarioConfig,
            idm=_build(IdmParams, **values[SECTION_IDM]),
            reward_weights=reward_weights,
            speed_map=speed_map,
            ego_task=task,
            **scenario,
        ),
        policy=policy_for(
            model, _build(PolicyConfig, **values[SECTION_POLICY])
        ),
        trainer=_build(TrainerConfig, **values[SECTION_TRAINER]),
        cdrl=_build(CdrlConfig, **values[SECTION_CDRL]),
        model=model,
        task=task,
        seeds=experiment["seeds"],
        eval_episodes=experiment["eval_episodes"],
        checkpoint_every=experiment["checkpoint_every"],
        n_max=experiment["n_max"],
    )


def parse_config(text: str) -> ExperimentConfig:
    """Return an experiment config parsed from INI text."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # type: ignore
    try:
        parser.read_string(text)
    except configparser.Error as err:
        raise ConfigError(f"Unreadable configuration: {err}") from None
    return build_config(
        {section: dict(parser.items(section)) for section in parser.sections()}
    )


def load_config(path: Optional[Union[str, Path]] = None) -> ExperimentConfig:
    """Return the experiment config stored in an INI file (defaults without one)."""
    if path is None:
        return build_config({})
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"Cannot read configuration {path}: {err}") from None
    return parse_config(text)


def config_echo(config: ExperimentConfig) -> Dict[str, Dict[str, Any]]:
    """Return the config as JSON-friendly sections that :func:`build_config` accepts."""
    scenario = asdict(config.scenario)
    idm = scenario.pop("idm")
    weights = scenario.pop("reward_weights")
    speed_map = scenario.pop("speed_map")
    scenario.pop("ego_task")
    scenario.update({f"w_{key}": value for key, value in weights.items()})
    scenario.update({f"speed_{key}": value for key, value in speed_map.items()})
    policy = {key: getattr(config.policy, key) for key in POLICY_KEYS}
    return {
        SECTION_SCENARIO: scenario,
        SECTION_IDM: idm,
        SECTION_POLICY: policy,
        SECTION_TRAINER: asdict(config.trainer),
        SECTION_CDRL: asdict(config.cdrl),
        SECTION_EXPERIMENT: {
            "model": config.model,
            "task": config.task.value,
            "seeds": list(config.seeds),
            "eval_episodes": config.eval_episodes,
            "checkpoint_every": config.checkpoint_every,
            "n_max": config.n_max,
        },
    }


def log_config(config: ExperimentConfig) -> None:
    """Log every configuration key at INFO."""
    for section, values in config_echo(config).items():
        for key, value in values.items():
            _LOGGER.info("[%s] %s = %s", section, key, value)
