from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Union

import numpy as np

# PF history floor (bits/s); keeps the rate/history metric finite.
EWMA_FLOOR_BPS = 1e3


class SchedulingPolicy(enum.IntEnum):
    """Per-slice downlink scheduler. Values are the wire codes."""

    RR = 0
    WF = 1
    PF = 2

    @classmethod
    def parse(cls, value) -> "SchedulingPolicy":
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            try:
                return cls[value.strip().upper()]
            except KeyError:
                raise ValueError(f"unknown scheduling policy {value!r}") from None
        return cls(int(value))


class SliceType(enum.IntEnum):
    EMBB = 0
    URLLC = 1
    MTC = 2

    @classmethod
    def parse(cls, value) -> "SliceType":
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            try:
                return cls[value.strip().upper()]
            except KeyError:
                raise ValueError(f"unknown slice type {value!r}") from None
        return cls(int(value))


@dataclass(frozen=True)
class Cbr:
    rate_bps: float
    pkt_size_bytes: int = 125

    def __post_init__(self):
        if self.rate_bps <= 0 or self.pkt_size_bytes <= 0:
            raise ValueError("CBR rate and packet size must be positive")


@dataclass(frozen=True)
class Poisson:
    pkts_per_s: float
    pkt_size_bytes: int = 125

    def __post_init__(self):
        if self.pkts_per_s <= 0 or self.pkt_size_bytes <= 0:
            raise ValueError("Poisson rate and packet size must be positive")


TrafficModel = Union[Cbr, Poisson]


@dataclass(frozen=True)
class ChannelParams:
    pathloss_exponent: float = 3.5
    ref_loss_db: float = 30.0
    tx_power_dbm: float = 43.0
    noise_dbm: float = -101.0
    shadowing_sigma_db: float = 4.0
    shadowing_corr_distance_m: float = 25.0

    def __post_init__(self):
        if self.pathloss_exponent <= 0:
            raise ValueError("pathloss_exponent must be > 0")
        if self.shadowing_sigma_db < 0:
            raise ValueError("shadowing_sigma_db must be >= 0")
        if self.shadowing_corr_distance_m <= 0:
            raise ValueError("shadowing_corr_distance_m must be > 0")


@dataclass(frozen=True)
class MobilityParams:
    """Random-waypoint area and pedestrian speed range."""

    radius_m: float = 200.0
    speed_min: float = 0.5
    speed_max: float = 2.0
    min_distance_m: float = 1.0

    def __post_init__(self):
        if not 0 <= self.speed_min <= self.speed_max:
            raise ValueError("need 0 <= speed_min <= speed_max")
        if self.radius_m <= 0:
            raise ValueError("radius_m must be > 0")


@dataclass(slots=True)
class UeState:
    ue_id: int
    slice_id: int
    position: np.ndarray
    speed: float = 0.0
    heading: float = 0.0
    shadowing_db: float = 0.0
    sinr_db: float = 0.0
    cqi: int = 0
    dl_buffer_bytes: int = 0
    ewma_thr_bps: float = EWMA_FLOOR_BPS
    served_bytes_window: int = 0
    tx_pkts_window: int = 0
    waypoint: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.waypoint = np.asarray(self.waypoint, dtype=float)
        if self.speed < 0:
            raise ValueError("speed must be >= 0")
        if not 0 <= self.cqi <= 15:
            raise ValueError("cqi must lie in [0, 15]")
        if self.dl_buffer_bytes < 0:
            raise ValueError("dl_buffer_bytes must be >= 0")


@dataclass(slots=True)
class SliceConfig:
    slice_id: int
    slice_type: SliceType
    ue_ids: list
    prb_quota: int
    policy: SchedulingPolicy = SchedulingPolicy.RR

    def __post_init__(self):
        self.slice_type = SliceType.parse(self.slice_type)
        self.policy = SchedulingPolicy.parse(self.policy)
        if not self.ue_ids:
            raise ValueError(f"slice {self.slice_id} has no UEs")
        if self.prb_quota < 0:
            raise ValueError("prb_quota must be >= 0")
