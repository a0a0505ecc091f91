"""Estimator-style wrapper around the actor-critic pair and its PPO learner."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array, check_is_fitted

from .catalog import CatalogEntry
from .encoder import EncoderConfig
from .networks import init_mlp, layer_sizes, mlp_forward, softmax
from .ppo import Adam, PPOConfig, Trajectory, ppo_update, sample_action


class SlicePolicyAgent(BaseEstimator):
    """Scheduler-selection policy for one slice type.

    ``partial_fit(trajectory)`` performs one PPO update; ``predict`` is the
    greedy action, ``predict_proba`` the softmax policy. Parameters are
    created lazily (or by :meth:`initialize`) from ``random_state``.
    """

    def __init__(
        self,
        n_features=24,
        n_actions=3,
        hidden_layers=5,
        hidden_units=30,
        gamma=0.99,
        gae_lambda=0.95,
        clip_eps=0.2,
        epochs=4,
        minibatch=64,
        learning_rate=3e-4,
        entropy_coef=0.01,
        value_coef=0.5,
        horizon=128,
        random_state=None,
    ):
        self.n_features = n_features
        self.n_actions = n_actions
        self.hidden_layers = hidden_layers
        self.hidden_units = hidden_units
        self.gamma = gamma
        self.gae_lambda = gae_lambda
        self.clip_eps = clip_eps
        self.epochs = epochs
        self.minibatch = minibatch
        self.learning_rate = learning_rate
        self.entropy_coef = entropy_coef
        self.value_coef = value_coef
        self.horizon = horizon
        self.random_state = random_state

    @property
    def ppo_config(self):
        return PPOConfig(
            gamma=self.gamma, gae_lambda=self.gae_lambda, clip_eps=self.clip_eps,
            epochs=self.epochs, minibatch=self.minibatch, learning_rate=self.learning_rate,
            entropy_coef=self.entropy_coef, value_coef=self.value_coef, horizon=self.horizon,
        )

    def initialize(self):
        rng = np.random.default_rng(self.random_state)
        self.policy_ = init_mlp(
            layer_sizes(self.n_features, self.n_actions, self.hidden_layers, self.hidden_units),
            rng, hidden_gain=1.0, out_gain=0.01,
        )
        self.value_ = init_mlp(
            layer_sizes(self.n_features, 1, self.hidden_layers, self.hidden_units),
            rng, hidden_gain=1.0, out_gain=1.0,
        )
        self.rng_ = rng
        self._reset_optimizers()
        self.n_updates_ = 0
        self.last_stats_ = {}
        return self

    def _reset_optimizers(self):
        self.policy_opt_ = Adam(self.policy_, self.learning_rate)
        self.value_opt_ = Adam(self.value_, self.learning_rate)

    def __sklearn_is_fitted__(self):
        return hasattr(self, "policy_")

    # ------------------------------------------------------------ learning

    def partial_fit(self, trajectory: Trajectory, y=None, last_value=0.0):
        if not hasattr(self, "policy_"):
            self.initialize()
        cfg = self.ppo_config
        self.policy_, self.value_, stats = ppo_update(
            self.policy_, self.value_, trajectory, cfg, self.rng_,
            self.policy_opt_, self.value_opt_, last_value,
        )
        if not stats.get("aborted"):
            self.n_updates_ += 1
        self.last_stats_ = stats
        return self

    def fit(self, trajectories, y=None):
        """Fresh parameters, then one PPO update per trajectory."""
        self.initialize()
        for traj in trajectories:
            self.partial_fit(traj)
        return self

    # ------------------------------------------------------------ inference

    def _check_X(self, X):
        check_is_fitted(self)
        return check_array(X, ensure_2d=True, dtype=float)

    def predict_proba(self, X):
        X = self._check_X(X)
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        z, _ = mlp_forward(self.policy_, X)
        return softmax(z)

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)

    def value(self, X):
        X = self._check_X(X)
        v, _ = mlp_forward(self.value_, X)
        return v[:, 0]

    def act(self, state, rng=None, greedy=False):
        """One decision: ``(action, log_prob, value)`` for a single state."""
        x = np.asarray(state, dtype=float)[None, :]
        p = self.predict_proba(x)[0]
        a, logp = sample_action(p, rng if rng is not None else self.rng_, greedy=greedy)
        return a, logp, float(self.value(x)[0])

    # ------------------------------------------------------------ catalog

    def to_catalog_entry(self, entry_id, slice_type, encoder=None, metadata=None):
        check_is_fitted(self)
        return CatalogEntry(
            entry_id=entry_id,
            slice_type=slice_type,
            encoder=encoder or EncoderConfig(),
            policy=self.policy_,
            value=self.value_,
            metadata=dict(metadata or {}),
        )

    @classmethod
    def from_catalog_entry(cls, entry: CatalogEntry, **params):
        agent = cls(n_features=entry.encoder.dim, **params)
        agent.initialize()
        agent.policy_ = [(w.astype(float), b.astype(float)) for w, b in entry.policy]
        agent.value_ = [(w.astype(float), b.astype(float)) for w, b in entry.value]
        agent._reset_optimizers()
        return agent


__all__ = ["SlicePolicyAgent", "NotFittedError"]
