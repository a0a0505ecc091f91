"""xApps: per-(BS, slice) scheduler-selection agents hosted by the RIC."""
from __future__ import annotations

import collections
import logging
import threading
from dataclasses import dataclass

import numpy as np

from ..drl.agent import SlicePolicyAgent
from ..drl.catalog import CatalogEntry
from ..drl.encoder import EncoderConfig, encode_state
from ..drl.ppo import Trajectory
from ..drl.reward import compute_reward
from ..ran.types import SchedulingPolicy, SliceType

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class XAppDescriptor:
    xapp_id: str
    slice_type: SliceType
    model_ref: str = ""
    period_ms: int = 500

    def __post_init__(self):
        object.__setattr__(self, "slice_type", SliceType.parse(self.slice_type))


class SliceModel:
    """Inference view of a catalog entry: encoder config + policy weights."""

    def __init__(self, entry: CatalogEntry):
        self.entry = entry
        self.encoder = entry.encoder
        self.agent = SlicePolicyAgent.from_catalog_entry(entry)

    @property
    def entry_id(self):
        return self.entry.entry_id

    def probabilities(self, state):
        return self.agent.predict_proba(np.asarray(state)[None, :])[0]


class SliceXApp:
    """Decision loop for one (bs, slice) pair.

    Keeps the last ``history`` reports, encodes them, and picks a scheduler.
    A hot-swapped model takes effect at the next decision.
    """

    def __init__(self, descriptor, model, bs_id, slice_id, greedy=True, rng=None):
        self.descriptor = descriptor
        self.bs_id = bs_id
        self.slice_id = slice_id
        self.greedy = greedy
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self._model = model
        self._pending_model = None
        self._swap_lock = threading.Lock()
        enc = model.encoder if model is not None else EncoderConfig()
        self.history = collections.deque(maxlen=enc.history)
        self.decisions = 0

    @property
    def model(self):
        return self._model

    def swap_model(self, model):
        with self._swap_lock:
            self._pending_model = model

    def _active_model(self):
        with self._swap_lock:
            if self._pending_model is not None:
                self._model = self._pending_model
                self._pending_model = None
                self.history = collections.deque(self.history, maxlen=self._model.encoder.history)
        return self._model

    def state(self, report):
        enc = self._model.encoder
        return encode_state(self.history, report.slice_prbs, enc.n_prbs, enc)

    def decide(self, report):
        """Return the scheduler to use for the next window."""
        model = self._active_model()
        if model is None:
            raise RuntimeError(f"xApp {self.descriptor.xapp_id}: no model loaded")
        self.history.append(report)
        state = self.state(report)
        p = model.probabilities(state)
        if self.greedy:
            a = int(np.argmax(p))
        else:
            a = int(min(np.searchsorted(np.cumsum(p), self.rng.random(), side="right"), len(p) - 1))
        self.decisions += 1
        return SchedulingPolicy(a)


class LearningXApp(SliceXApp):
    """Sampling xApp that records PPO transitions against a shared agent.

    The reward for the action taken after window k is computed from the
    report of window k+1.
    """

    def __init__(self, descriptor, agent: SlicePolicyAgent, bs_id, slice_id, encoder=None, rng=None):
        self.agent = agent
        self.encoder = encoder or EncoderConfig()
        super().__init__(descriptor, None, bs_id, slice_id, greedy=False, rng=rng)
        self.history = collections.deque(maxlen=self.encoder.history)
        self.trajectory = Trajectory()
        self.rewards = []
        self._pending = None

    def decide(self, report):
        self.history.append(report)
        if self._pending is not None:
            r = compute_reward(self.descriptor.slice_type, report)
            s, a, lp, v = self._pending
            self.trajectory.append(s, a, lp, v, r, False)
            self.rewards.append(r)
        state = encode_state(self.history, report.slice_prbs, self.encoder.n_prbs, self.encoder)
        a, lp, v = self.agent.act(state, rng=self.rng)
        self._pending = (state, a, lp, v)
        self.decisions += 1
        return SchedulingPolicy(a)

    def finish_episode(self):
        """Close the stream: the last transition becomes terminal."""
        self.trajectory.mark_done()
        self._pending = None
        traj, self.trajectory = self.trajectory, Trajectory()
        return traj
