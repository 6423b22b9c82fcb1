"""Define the model ids and the architecture flags each one runs with."""
from dataclasses import dataclass, replace
import logging
from typing import Dict

from cgrlpy.errors import ConfigError
from cgrlpy.policy import PolicyConfig

_LOGGER: logging.Logger = logging.getLogger(__name__)

MODEL_CGRL = "cgrl"
MODEL_GCN_DQN = "gcn-dqn"
MODEL_GCN_DOUBLE_DQN = "gcn-double-dqn"
MODEL_GCN_DUELING_DQN = "gcn-dueling-dqn"
MODEL_GCN_D3QN = "gcn-d3qn"
MODEL_GAT_D3QN = "gat-d3qn"
MODEL_GCN_GAT_D3QN = "gcn-gat-d3qn"

# Evaluation-only pseudo-model: uniform random actions.
MODEL_RANDOM = "random"


@dataclass(frozen=True)
class ModelFlags:
    """Define the architecture, trainer and causal switches of a model id."""

    use_gcn: bool
    use_gat: bool
    use_dueling: bool
    use_double: bool
    use_causal: bool = False


MODELS: Dict[str, ModelFlags] = {
    MODEL_CGRL: ModelFlags(True, True, True, True, True),
    MODEL_GCN_DQN: ModelFlags(True, False, False, False),
    MODEL_GCN_DOUBLE_DQN: ModelFlags(True, False, False, True),
    MODEL_GCN_DUELING_DQN: ModelFlags(True, False, True, False),
    MODEL_GCN_D3QN: ModelFlags(True, False, True, True),
    MODEL_GAT_D3QN: ModelFlags(False, True, True, True),
    MODEL_GCN_GAT_D3QN: ModelFlags(True, True, True, True),
}


def model_flags(model: str) -> ModelFlags:
    """Return the flags of a model id.

    :raises ConfigError: for an unknown id
    """
    try:
        return MODELS[model]
    except KeyError:
        raise ConfigError(
            f"Unknown model id: {model} (expected one of {', '.join(MODELS)})"
        ) from None


def policy_for(model: str, base: PolicyConfig) -> PolicyConfig:
    """Return ``base`` with the architecture flags of ``model`` applied."""
    flags = model_flags(model)
    return replace(
        base,
        use_gcn=flags.use_gcn,
        use_gat=flags.use_gat,
        use_dueling=flags.use_dueling,
        use_double=flags.use_double,
    )
