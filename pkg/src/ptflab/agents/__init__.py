"""Target-task learners: n-worker actor-critic and PPO, with a transfer hook."""
from .a3c import A3CConfig, A3CLearner, EpisodeRecord, Rollout, worker_loop
from .losses import (PpoConfig, TransferTerm, a3c_gradients, a3c_loss_graph,
                     log_probs, ppo_gradients, ppo_loss, ppo_loss_graph)
from .ppo import PPOLearner
from .policy import Critic, Policy, compute_returns, sample_action

__all__ = [
    "A3CConfig", "A3CLearner", "Critic", "EpisodeRecord", "PPOLearner", "Policy", "PpoConfig",
    "Rollout", "TransferTerm", "a3c_gradients", "a3c_loss_graph",
    "compute_returns", "log_probs", "ppo_gradients", "ppo_loss",
    "ppo_loss_graph", "sample_action", "worker_loop",
]
