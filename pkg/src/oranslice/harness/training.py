"""Offline (non-RT) training of the per-slice-type scheduling agents.

Each episode boots a fresh simulator world and an inline RIC whose xApps
sample from shared per-slice-type agents, so training exercises the same
E2-lite path as deployment. Episodes vary the seed, the UE drop radius
and pedestrian speed, and the order of the quota sweep.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..drl.agent import SlicePolicyAgent
from ..drl.catalog import ModelCatalog
from ..drl.encoder import EncoderConfig
from ..drl.ppo import PPOConfig, Trajectory
from ..exceptions import ConfigurationError
from ..ran.types import MobilityParams, SliceType
from ..ric.ric import NearRtRic
from ..ric.xapp import LearningXApp, XAppDescriptor
from ..sim.e2node import RicControl
from ..sim.engine import run
from .config import ScenarioConfig, build_world, sweep_schedule

log = logging.getLogger(__name__)

BANDIT_MEANS = (0.1, 0.9, 0.5)


@dataclass
class TrainingOptions:
    episodes: int = 200
    episode_ms: int = 30_000
    checkpoint_every: int = 50
    seed: int = 0
    radius_range_m: tuple = (60.0, 250.0)
    speed_max_range: tuple = (1.0, 5.0)

    @classmethod
    def from_dict(cls, d):
        names = set(cls.__dataclass_fields__)
        return cls(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items() if k in names})


def load_ppo_file(path):
    """PPO hyperparameters plus an optional ``"training"`` section."""
    doc = json.loads(Path(path).read_text())
    return PPOConfig.from_dict(doc), TrainingOptions.from_dict(doc.get("training", {}))


@dataclass
class TrainingResult:
    deployed: dict  # SliceType -> entry_id
    curve: list = field(default_factory=list)
    halted: bool = False
    episodes_run: int = 0


def _agent(ppo: PPOConfig, seed, n_features=24):
    return SlicePolicyAgent(
        n_features=n_features, gamma=ppo.gamma, gae_lambda=ppo.gae_lambda, clip_eps=ppo.clip_eps,
        epochs=ppo.epochs, minibatch=ppo.minibatch, learning_rate=ppo.learning_rate,
        entropy_coef=ppo.entropy_coef, value_coef=ppo.value_coef, horizon=ppo.horizon,
        random_state=seed,
    ).initialize()


def _scenario_hash(cfg):
    return hashlib.sha256(json.dumps(cfg.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


class _Trainer:
    def __init__(self, agents, catalog, encoder, meta):
        self.agents = agents
        self.catalog = catalog
        self.encoder = encoder
        self.meta = meta
        self.deployed = {}
        self.failures = {st: 0 for st in agents}
        self._saved_at = None

    def update(self, st, traj):
        ag = self.agents[st]
        ag.partial_fit(traj)
        if ag.last_stats_.get("aborted"):
            self.failures[st] += 1
            log.error("%s: PPO update aborted (%d in a row)", st.name, self.failures[st])
        else:
            self.failures[st] = 0
        return self.failures[st] >= 2

    def checkpoint(self, episode):
        if self._saved_at == episode:
            return
        for st, ag in self.agents.items():
            entry_id = f"{st.name.lower()}-ep{episode:04d}"
            entry = ag.to_catalog_entry(
                entry_id, st, self.encoder,
                metadata={**self.meta, "episode": episode, "updates": ag.n_updates_},
            )
            self.catalog.put(entry)
            self.deployed[st] = entry_id
        self.catalog.deploy(self.deployed)
        self._saved_at = episode


def train_offline(cfg: ScenarioConfig, ppo: PPOConfig, episodes, out_dir, options=None):
    """Train one agent per slice type and write catalog entries under ``out_dir``.

    Writes ``catalog/<type>-epNNNN.json`` every ``checkpoint_every`` episodes
    and at the end, ``catalog/deployed.json`` and ``training_curve.csv``.
    Two consecutive non-finite updates of any agent stop training at the
    last good parameters.
    """
    opts = options or TrainingOptions()
    if episodes is None:
        episodes = opts.episodes
    if episodes < 1:
        raise ConfigurationError("nothing to train: episodes must be >= 1")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    catalog = ModelCatalog(out / "catalog")
    n_prbs = cfg.n_prbs
    encoder = EncoderConfig(n_prbs=n_prbs)
    types = sorted({s.slice_type for b in cfg.base_stations for s in b.slices})
    agents = {st: _agent(ppo, [opts.seed, int(st)], encoder.dim) for st in types}
    trainer = _Trainer(agents, catalog, encoder, {
        "seed": opts.seed, "episodes": episodes, "episode_ms": opts.episode_ms,
        "scenario_hash": _scenario_hash(cfg), "ppo": ppo.to_dict(),
    })
    buffers = {st: Trajectory() for st in types}
    slice_ids = sorted({s.slice_id for b in cfg.base_stations for s in b.slices})
    n_blocks = 10 * len(slice_ids)
    result = TrainingResult(deployed={})
    fh = open(out / "training_curve.csv", "w", newline="")
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["episode"] + [f"mean_reward_{st.name}" for st in types])
    try:
        for ep in range(1, episodes + 1):
            rng = np.random.default_rng([opts.seed, ep])
            mobility = MobilityParams(
                radius_m=float(rng.uniform(*opts.radius_range_m)),
                speed_min=0.5,
                speed_max=float(rng.uniform(*opts.speed_max_range)),
            )
            ep_cfg = cfg.replace(
                duration_ms=opts.episode_ms,
                mobility=mobility,
                quota_schedule=sweep_schedule(n_prbs, slice_ids, order=rng.permutation(n_blocks)),
            )
            learners = []

            def factory(desc, bs_id, slice_id, _ep=ep):
                x = LearningXApp(desc, agents[desc.slice_type], bs_id, slice_id, encoder,
                                 rng=np.random.default_rng([opts.seed, _ep, bs_id, slice_id]))
                learners.append(x)
                return x

            ric = NearRtRic(inline=True, decision_log=False)
            for st in types:
                ric.register_xapp(XAppDescriptor(f"learn-{st.name.lower()}", st), factory=factory)
            source = RicControl.loopback(ric, period_ms=cfg.window_ms)
            run(build_world(ep_cfg, seed=opts.seed * 1_000_003 + ep), opts.episode_ms, source)
            source.close()

            rewards = {st: [] for st in types}
            for x in learners:
                st = x.descriptor.slice_type
                buffers[st].extend(x.finish_episode())
                rewards[st].extend(x.rewards)
            diverged = False
            for st in types:
                if len(buffers[st]) >= ppo.horizon:
                    diverged |= trainer.update(st, buffers[st])
                    buffers[st] = Trajectory()
            row = [float(np.mean(rewards[st])) if rewards[st] else 0.0 for st in types]
            result.curve.append((ep, *row))
            writer.writerow([ep] + [f"{r:.6f}" for r in row])
            result.episodes_run = ep
            if diverged:
                log.error("training diverged at episode %d; keeping last good parameters", ep)
                result.halted = True
                break
            if ep % opts.checkpoint_every == 0:
                trainer.checkpoint(ep)
            log.info("episode %d/%d: %s", ep, episodes,
                     ", ".join(f"{st.name}={r:.3f}" for st, r in zip(types, row)))
        trainer.checkpoint(result.episodes_run)
    finally:
        fh.close()
    result.deployed = dict(trainer.deployed)
    return result


def bandit_episode(agent, rng, steps=128, means=BANDIT_MEANS, noise=0.0):
    """One batch of the 3-armed bandit sanity task (constant state, one-step episodes)."""
    s = np.full(agent.n_features, 0.5)
    traj = Trajectory()
    total = 0.0
    for _ in range(steps):
        a, lp, v = agent.act(s, rng)
        r = means[a] + noise * rng.standard_normal()
        traj.append(s, a, lp, v, r, True)
        total += r
    return traj, total / steps


def train_bandit(ppo: PPOConfig, episodes, seed=0, out_dir=None):
    """PPO on the bandit task; returns the per-episode mean-reward curve."""
    if episodes < 1:
        raise ConfigurationError("nothing to train: episodes must be >= 1")
    agent = _agent(ppo, seed)
    rng = np.random.default_rng([seed, 7])
    curve = []
    for ep in range(1, episodes + 1):
        traj, mean_r = bandit_episode(agent, rng, steps=ppo.horizon)
        agent.partial_fit(traj)
        curve.append((ep, mean_r))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "training_curve.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["episode", "mean_reward"])
            w.writerows((e, f"{r:.6f}") for e, r in curve)
        catalog = ModelCatalog(out / "catalog")
        entry_id = f"bandit-ep{episodes:04d}"
        catalog.put(agent.to_catalog_entry(entry_id, SliceType.EMBB, metadata={"task": "bandit", "seed": seed}))
        catalog.deploy({SliceType.EMBB: entry_id})
    return curve, agent


__all__ = [
    "BANDIT_MEANS", "TrainingOptions", "TrainingResult", "bandit_episode", "load_ppo_file",
    "train_bandit", "train_offline",
]
