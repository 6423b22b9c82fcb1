"""Define tests for experiment configuration files."""
import logging

import pytest

from cgrlpy.errors import ConfigError
from cgrlpy.harness.config import (
    build_config,
    config_echo,
    load_config,
    log_config,
    parse_config,
)
from cgrlpy.sim.geometry import Turn

from tests.common import fixture_path, load_fixture


def test_load_ini_file():
    """Test that an INI file fills every section."""
    config = load_config(fixture_path("desk_config.ini"))
    assert config.scenario.n_human_vehicles == 5
    assert config.scenario.horizon == 30
    assert config.scenario.idm.T == 1.2
    assert config.scenario.ego_task is Turn.left
    assert config.policy.hidden_dim == 16
    assert config.trainer.learning_rate == 1e-3
    assert config.trainer.target_update == 50
    assert config.cdrl.warmup_episodes == 5
    assert config.model == "gcn-d3qn"
    assert config.task is Turn.left
    assert config.seeds == (0, 1, 2)
    assert config.n_max == 8


def test_model_sets_architecture():
    """Test that the model id decides the policy flags."""
    config = parse_config(load_fixture("desk_config.ini"))
    assert config.policy.use_gcn and not config.policy.use_gat
    assert config.policy.use_dueling and config.policy.use_double
    assert not config.flags.use_causal


def test_defaults():
    """Test the configuration used without a file."""
    config = load_config()
    assert config.model == "cgrl"
    assert config.task is Turn.straight
    assert config.trainer.gamma == 0.95
    assert config.scenario.n_human_vehicles == 15
    assert config.n_max == 16


@pytest.mark.parametrize(
    "sections",
    [
        {"weather": {"rain": "1"}},
        {"trainer": {"momentum": "0.9"}},
        {"trainer": {"gamma": "1.5"}},
        {"trainer": {"batch_size": "many"}},
        {"experiment": {"model": "transformer"}},
        {"experiment": {"task": "u-turn"}},
        {"experiment": {"seeds": "0, -1"}},
        {"cdrl": {"alpha": "1.0"}},
        {"scenario": {"n_human_vehicles": "20"}},
    ],
)
def test_invalid_sections(sections):
    """Test unknown sections and keys and out-of-range values."""
    with pytest.raises(ConfigError):
        build_config(sections)


def test_unreadable_files(tmp_path):
    """Test missing and malformed files."""
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.ini")
    broken = tmp_path / "broken.ini"
    broken.write_text("no section header\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(broken)


def test_overrides():
    """Test command-line overrides of model, task, seed and episodes."""
    config = load_config(fixture_path("desk_config.ini")).with_overrides(
        model="gat-d3qn", task="right", seed=9, episodes=4
    )
    assert config.model == "gat-d3qn"
    assert not config.policy.use_gcn and config.policy.use_gat
    assert config.task is Turn.right
    assert config.scenario.ego_task is Turn.right
    assert config.seeds == (9,)
    assert config.trainer.episodes == 4
    with pytest.raises(ConfigError):
        config.with_overrides(task="u-turn")
    with pytest.raises(ConfigError):
        config.with_overrides(model="transformer")


def test_echo_rebuilds_config():
    """Test that the echoed sections rebuild an equal configuration."""
    config = load_config(fixture_path("desk_config.ini"))
    assert build_config(config_echo(config)) == config


def test_log_config(caplog):
    """Test that every key is logged."""
    caplog.set_level(logging.INFO)
    log_config(load_config())
    assert "[trainer] gamma = 0.95" in caplog.text
    assert "[experiment] model = cgrl" in caplog.text
