"""State encoder, actor-critic networks, PPO and the model catalog."""

from .agent import SlicePolicyAgent
from .catalog import CatalogEntry, ModelCatalog, load_model, save_model
from .encoder import FEATURES, EncoderConfig, KpiStateEncoder, encode_state
from .networks import policy_forward, value_forward
from .ppo import (
    Adam,
    PPOConfig,
    Trajectory,
    gae_advantages,
    ppo_loss_and_grads,
    ppo_update,
    sample_action,
)
from .reward import compute_reward

__all__ = [
    "Adam", "CatalogEntry", "EncoderConfig", "FEATURES", "KpiStateEncoder",
    "ModelCatalog", "PPOConfig", "SlicePolicyAgent", "Trajectory", "compute_reward",
    "encode_state", "gae_advantages", "load_model", "policy_forward", "ppo_loss_and_grads",
    "ppo_update", "sample_action", "save_model", "value_forward",
]
