"""Fixed-size state encoding of per-slice KPI report histories."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ..ran.phy import MAX_RATE_PER_PRB_BPS

FEATURES = ("throughput", "cqi", "buffer", "grant_ratio", "num_ues", "quota_share")
N_FEATURES = len(FEATURES)


@dataclass(frozen=True)
class EncoderConfig:
    history: int = 4
    n_prbs: int = 15
    max_rate_per_prb_bps: float = MAX_RATE_PER_PRB_BPS
    buffer_ref_bytes: float = 1e6
    max_ues: int = 16

    @property
    def dim(self):
        return N_FEATURES * self.history

    def to_dict(self):
        return {"features": list(FEATURES), **asdict(self)}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        feats = d.pop("features", list(FEATURES))
        if list(feats) != list(FEATURES):
            raise ValueError(f"unsupported feature list {feats}")
        return cls(**d)


def window_features(report, slice_prbs, n_prbs, cfg: EncoderConfig):
    """The 6 symmetric per-window statistics; ``report=None`` is an idle pad."""
    if report is None:
        return [0.0, 0.0, 0.0, 1.0, 0.0, slice_prbs / n_prbs]
    recs = report.records
    n = len(recs)
    thr = sum(r.dl_thr_bps for r in recs)
    buf = sum(r.dl_buffer_bytes for r in recs)
    cqi = sum(r.dl_cqi for r in recs) / n if n else 0.0
    ratios = [r.granted_prbs / r.requested_prbs for r in recs if r.requested_prbs > 0]
    return [
        thr / (n_prbs * cfg.max_rate_per_prb_bps),
        cqi / 15.0,
        math.log1p(buf) / math.log1p(cfg.buffer_ref_bytes),
        sum(ratios) / len(ratios) if ratios else 1.0,
        n / cfg.max_ues,
        report.slice_prbs / n_prbs,
    ]


def encode_state(history, slice_prbs, n_prbs=None, cfg=None):
    """Encode up to ``cfg.history`` reports (oldest first) into a flat vector.

    Missing older windows are padded as idle windows at ``slice_prbs``. The
    result has ``6 * history`` entries whatever the UE count.
    """
    cfg = cfg or EncoderConfig()
    n_prbs = n_prbs or cfg.n_prbs
    hist = list(history)[-cfg.history:]
    padded = [None] * (cfg.history - len(hist)) + hist
    out = []
    for rep in padded:
        out.extend(window_features(rep, slice_prbs, n_prbs, cfg))
    return np.asarray(out, dtype=float)


class KpiStateEncoder(TransformerMixin, BaseEstimator):
    """Transformer mapping report histories to fixed-size state rows.

    ``X`` is a sequence of histories (each a sequence of KPI reports,
    oldest first). Stateless: ``fit`` only records the output width.
    """

    def __init__(self, history=4, n_prbs=15, buffer_ref_bytes=1e6, max_ues=16):
        self.history = history
        self.n_prbs = n_prbs
        self.buffer_ref_bytes = buffer_ref_bytes
        self.max_ues = max_ues

    def _config(self):
        return EncoderConfig(
            history=self.history, n_prbs=self.n_prbs,
            buffer_ref_bytes=self.buffer_ref_bytes, max_ues=self.max_ues,
        )

    def fit(self, X=None, y=None):
        if self.history < 1 or self.n_prbs < 1:
            raise ValueError("history and n_prbs must be >= 1")
        self.n_features_out_ = self._config().dim
        return self

    def transform(self, X):
        cfg = self._config()
        rows = []
        for hist in X:
            hist = list(hist)
            prbs = hist[-1].slice_prbs if hist else 0
            rows.append(encode_state(hist, prbs, cfg.n_prbs, cfg))
        return np.vstack(rows) if rows else np.empty((0, cfg.dim))

    def get_feature_names_out(self, input_features=None):
        h = self.history
        return np.array([f"{f}_t-{h - 1 - k}" for k in range(h) for f in FEATURES], dtype=object)
