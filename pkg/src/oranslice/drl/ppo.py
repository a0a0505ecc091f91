"""PPO with a clipped surrogate, GAE and Adam, on numpy actor-critic MLPs."""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .networks import log_softmax, mlp_backward, mlp_forward, softmax

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PPOConfig:
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_eps: float = 0.2
    epochs: int = 4
    minibatch: int = 64
    learning_rate: float = 3e-4
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    horizon: int = 128

    def __post_init__(self):
        if not (0 < self.clip_eps < 1 or math.isinf(self.clip_eps)):
            raise ValueError("clip_eps must lie in (0, 1) (or be inf to disable clipping)")
        if not (0 < self.gamma <= 1 and 0 < self.gae_lambda <= 1):
            raise ValueError("gamma and gae_lambda must lie in (0, 1]")
        if self.epochs < 1 or self.minibatch < 1 or self.horizon < 1:
            raise ValueError("epochs, minibatch and horizon must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})

    def to_dict(self):
        return asdict(self)


@dataclass
class Trajectory:
    """Rollout storage: one entry per decision."""

    states: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    log_probs: list = field(default_factory=list)
    values: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    dones: list = field(default_factory=list)

    def append(self, state, action, log_prob, value, reward, done=False):
        self.states.append(np.asarray(state, dtype=float))
        self.actions.append(int(action))
        self.log_probs.append(float(log_prob))
        self.values.append(float(value))
        self.rewards.append(float(reward))
        self.dones.append(bool(done))

    def extend(self, other: "Trajectory"):
        for name in ("states", "actions", "log_probs", "values", "rewards", "dones"):
            getattr(self, name).extend(getattr(other, name))

    def __len__(self):
        return len(self.actions)

    def mark_done(self):
        if self.dones:
            self.dones[-1] = True


def gae_advantages(rewards, values, dones, gamma, lam, last_value=0.0, normalize=True):
    """Generalized advantage estimates and value targets.

    ``values[t]`` is V(s_t); the value after the final step is
    ``last_value`` (ignored when that step is terminal). Returns are formed
    from the raw advantages; normalization (zero mean, unit variance over
    the batch) applies to the returned advantages only.
    """
    r = np.asarray(rewards, dtype=float)
    v = np.asarray(values, dtype=float)
    d = np.asarray(dones, dtype=float)
    n = r.size
    adv = np.zeros(n)
    if n == 0:
        return adv, adv.copy()
    nxt_adv = 0.0
    nxt_val = float(last_value)
    for t in range(n - 1, -1, -1):
        nonterm = 1.0 - d[t]
        delta = r[t] + gamma * nxt_val * nonterm - v[t]
        nxt_adv = delta + gamma * lam * nxt_adv * nonterm
        adv[t] = nxt_adv
        nxt_val = v[t]
    returns = adv + v
    if normalize:
        std = adv.std()
        adv = (adv - adv.mean()) / (std if std > 1e-8 else 1.0)
    return adv, returns


def sample_action(probs, rng, greedy=False):
    """Inverse-CDF draw in fixed action order; greedy takes the lowest argmax."""
    p = np.asarray(probs, dtype=float)
    if greedy:
        a = int(np.argmax(p))
    else:
        u = rng.random()
        cdf = np.cumsum(p)
        a = int(np.searchsorted(cdf, u, side="right"))
        a = min(a, p.size - 1)
        while p[a] <= 0 and a > 0:  # guard against cdf rounding at the top
            a -= 1
    return a, float(np.log(p[a])) if p[a] > 0 else -math.inf


# ---------------------------------------------------------------------------- losses

def ppo_loss_and_grads(policy, value, batch, cfg: PPOConfig):
    """Clipped-surrogate loss and its gradients for one minibatch.

    ``batch`` holds arrays ``states, actions, old_log_probs, advantages,
    returns``. Returns ``(stats, policy_grads, value_grads)`` where the
    total loss is ``policy + value_coef * value - entropy_coef * entropy``.
    """
    x = batch["states"]
    a = batch["actions"]
    adv = batch["advantages"]
    ret = batch["returns"]
    n = x.shape[0]
    rows = np.arange(n)

    z, p_acts = mlp_forward(policy, x)
    logp_all = log_softmax(z)
    p = np.exp(logp_all)
    logp = logp_all[rows, a]
    ratio = np.exp(logp - batch["old_log_probs"])
    eps = cfg.clip_eps
    clipped_ratio = np.clip(ratio, 1.0 - eps, 1.0 + eps)
    unclipped = ratio * adv
    clipped = clipped_ratio * adv
    use_unclipped = unclipped <= clipped
    surrogate = np.where(use_unclipped, unclipped, clipped)
    policy_loss = -surrogate.mean()
    entropy_each = -(p * logp_all).sum(axis=1)
    entropy = entropy_each.mean()

    v, v_acts = mlp_forward(value, x)
    v = v[:, 0]
    value_loss = ((v - ret) ** 2).mean()
    total = policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * entropy

    # d(policy_loss)/d logp_a
    g_logp = np.where(use_unclipped, -ratio * adv, 0.0) / n
    onehot = np.zeros_like(p)
    onehot[rows, a] = 1.0
    dz = g_logp[:, None] * (onehot - p)
    # d(-c * H)/dz = c * p * (log p + H) / n
    dz += cfg.entropy_coef * p * (logp_all + entropy_each[:, None]) / n
    g_policy = mlp_backward(policy, p_acts, dz)

    dv = (cfg.value_coef * 2.0 * (v - ret) / n)[:, None]
    g_value = mlp_backward(value, v_acts, dv)

    stats = {
        "loss": float(total),
        "policy_loss": float(policy_loss),
        "value_loss": float(value_loss),
        "entropy": float(entropy),
        "approx_kl": float((batch["old_log_probs"] - logp).mean()),
        "clip_frac": float((np.abs(ratio - 1.0) > eps).mean()) if np.isfinite(eps) else 0.0,
    }
    return stats, g_policy, g_value


def ppo_total_loss(policy, value, batch, cfg):
    """Scalar loss only (used by finite-difference checks)."""
    return ppo_loss_and_grads(policy, value, batch, cfg)[0]["loss"]


def vanilla_pg_grads(policy, batch):
    """Gradient of ``-mean(log pi(a|s) * A)`` w.r.t. the policy network."""
    x, a, adv = batch["states"], batch["actions"], batch["advantages"]
    n = x.shape[0]
    z, acts = mlp_forward(policy, x)
    p = softmax(z)
    onehot = np.zeros_like(p)
    onehot[np.arange(n), a] = 1.0
    dz = (-adv / n)[:, None] * (onehot - p)
    return mlp_backward(policy, acts, dz)


# ---------------------------------------------------------------------------- optimizer

class Adam:
    """Adaptive-moment optimizer over a list of ``(W, b)`` parameter pairs."""

    def __init__(self, params, lr=3e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = [(np.zeros_like(w), np.zeros_like(b)) for w, b in params]
        self.v = [(np.zeros_like(w), np.zeros_like(b)) for w, b in params]

    def step(self, params, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        new = []
        for i, ((w, b), (gw, gb)) in enumerate(zip(params, grads)):
            pair = []
            for j, (p, g) in enumerate(((w, gw), (b, gb))):
                m = self.m[i][j]
                v = self.v[i][j]
                m *= b1
                m += (1 - b1) * g
                v *= b2
                v += (1 - b2) * g * g
                pair.append(p - self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps))
            new.append(tuple(pair))
        return new

    def snapshot(self):
        return (self.t, [(m0.copy(), m1.copy()) for m0, m1 in self.m],
                [(v0.copy(), v1.copy()) for v0, v1 in self.v])

    def restore(self, snap):
        self.t, self.m, self.v = snap[0], snap[1], snap[2]


def make_batch(traj: Trajectory, cfg: PPOConfig, last_value=0.0):
    adv, ret = gae_advantages(
        traj.rewards, traj.values, traj.dones, cfg.gamma, cfg.gae_lambda, last_value
    )
    return {
        "states": np.vstack(traj.states),
        "actions": np.asarray(traj.actions, dtype=np.int64),
        "old_log_probs": np.asarray(traj.log_probs, dtype=float),
        "advantages": adv,
        "returns": ret,
    }


def ppo_update(policy, value, traj: Trajectory, cfg: PPOConfig, rng,
               policy_opt=None, value_opt=None, last_value=0.0):
    """Run ``epochs`` passes of shuffled minibatch PPO over ``traj``.

    Returns ``(policy, value, stats)``. A non-finite loss aborts the whole
    update: the input parameters (and optimizer states) are returned
    unchanged and ``stats["aborted"]`` is set.
    """
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    policy_opt = policy_opt or Adam(policy, cfg.learning_rate)
    value_opt = value_opt or Adam(value, cfg.learning_rate)
    snaps = (policy_opt.snapshot(), value_opt.snapshot())
    batch = make_batch(traj, cfg, last_value)
    n = batch["actions"].size
    mb = min(cfg.minibatch, n)
    p_new, v_new = policy, value
    history = []
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for s in range(0, n, mb):
            idx = order[s:s + mb]
            sub = {k: arr[idx] for k, arr in batch.items()}
            stats, gp, gv = ppo_loss_and_grads(p_new, v_new, sub, cfg)
            if not np.isfinite(stats["loss"]) or not all(
                np.all(np.isfinite(g)) for pair in gp + gv for g in pair
            ):
                log.error("non-finite PPO loss; update aborted, parameters kept")
                policy_opt.restore(snaps[0])
                value_opt.restore(snaps[1])
                return policy, value, {"aborted": True, "loss": float("nan")}
            p_new = policy_opt.step(p_new, gp)
            v_new = value_opt.step(v_new, gv)
            history.append(stats)
    out = {k: float(np.mean([h[k] for h in history])) for k in history[0]}
    out["aborted"] = False
    out["samples"] = n
    return p_new, v_new, out
