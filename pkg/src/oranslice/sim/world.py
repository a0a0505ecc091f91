from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..ran.types import SchedulingPolicy, SliceConfig, SliceType, UeState
from .engine import BsState


@dataclass(frozen=True)
class SliceSpec:
    slice_id: int
    slice_type: SliceType
    n_ues: int
    traffic: object
    prb_quota: int
    policy: SchedulingPolicy = SchedulingPolicy.RR


def build_base_station(bs_id, position, n_prbs, slice_specs, first_ue_id=0, **kwargs):
    """Build a :class:`BsState` from per-slice specs.

    UE ids are allocated consecutively from ``first_ue_id`` in slice order.
    Extra keyword arguments go to :class:`BsState`.
    """
    slices, ues, traffic = [], [], {}
    next_id = first_ue_id
    pos = np.asarray(position, dtype=float)
    for spec in slice_specs:
        ids = list(range(next_id, next_id + spec.n_ues))
        next_id += spec.n_ues
        slices.append(
            SliceConfig(spec.slice_id, spec.slice_type, ids, spec.prb_quota, spec.policy)
        )
        for u in ids:
            ues.append(UeState(ue_id=u, slice_id=spec.slice_id, position=pos.copy()))
            traffic[u] = spec.traffic
    return BsState(bs_id, pos, n_prbs, slices, ues, traffic, **kwargs)
