from .attack import AttackConfig, AttackResult, attack, objective, objective_bound
from .losses import LOSS_MODES, critic_loss, generator_loss, gradient_penalty, interpolate
from .networks import LATENT_DIM, Critic, Generator, MlpCritic, MlpGenerator, generator_forward, sample_latent
from .toy import TOY_COV, TOY_MEAN, energy_distance, toy_networks, toy_samples
from .training import GanHistoryRow, GanResult, GanTrainConfig, GanTrainer, train_wgan_gp

__all__ = [
    "LATENT_DIM",
    "LOSS_MODES",
    "TOY_COV",
    "TOY_MEAN",
    "AttackConfig",
    "AttackResult",
    "Critic",
    "GanHistoryRow",
    "GanResult",
    "GanTrainConfig",
    "GanTrainer",
    "Generator",
    "MlpCritic",
    "MlpGenerator",
    "attack",
    "critic_loss",
    "energy_distance",
    "generator_forward",
    "generator_loss",
    "gradient_penalty",
    "interpolate",
    "objective",
    "objective_bound",
    "sample_latent",
    "toy_networks",
    "toy_samples",
    "train_wgan_gp",
]
