"""Deterministic RAN domain logic: link model, traffic, PRB schedulers."""

from .phy import (
    BYTES_PER_PRB,
    CQI_EFFICIENCY,
    CQI_TO_MCS,
    MAX_RATE_PER_PRB_BPS,
    PRB_BANDWIDTH_HZ,
    RE_PER_PRB,
    cqi_from_sinr,
    cqi_to_efficiency,
    init_ue_position,
    pathloss_db,
    prb_count,
    step_mobility_channel,
)
from .scheduling import (
    largest_remainder,
    schedule_pf,
    schedule_rr,
    schedule_wf,
    serve_tti,
    update_ewma,
    water_level,
)
from .traffic import TrafficSource, traffic_arrivals
from .types import (
    EWMA_FLOOR_BPS,
    Cbr,
    ChannelParams,
    MobilityParams,
    Poisson,
    SchedulingPolicy,
    SliceConfig,
    SliceType,
    UeState,
)

__all__ = [
    "BYTES_PER_PRB", "CQI_EFFICIENCY", "CQI_TO_MCS", "MAX_RATE_PER_PRB_BPS",
    "PRB_BANDWIDTH_HZ", "RE_PER_PRB", "EWMA_FLOOR_BPS",
    "Cbr", "ChannelParams", "MobilityParams", "Poisson", "SchedulingPolicy",
    "SliceConfig", "SliceType", "TrafficSource", "UeState",
    "cqi_from_sinr", "cqi_to_efficiency", "init_ue_position", "largest_remainder",
    "pathloss_db", "prb_count", "schedule_pf", "schedule_rr", "schedule_wf",
    "serve_tti", "step_mobility_channel", "traffic_arrivals", "update_ewma",
    "water_level",
]
