"""Link abstraction: PRB grid, SINR -> CQI -> efficiency, channel and mobility."""
from __future__ import annotations

import dataclasses
import math

import numpy as np

from ..exceptions import ConfigurationError
from .types import ChannelParams, MobilityParams, UeState

# Usable resource elements per PRB per 1 ms TTI (168 minus control/RS overhead).
RE_PER_PRB = 150
PRB_BANDWIDTH_HZ = 180_000
TTI_S = 1e-3

_PRB_GRID = {
    1_400_000: 6,
    3_000_000: 15,
    5_000_000: 25,
    10_000_000: 50,
    15_000_000: 75,
    20_000_000: 100,
}

# 4-bit LTE CQI table, bits per resource element. Index 0 is out of range.
CQI_EFFICIENCY = (
    0.0,
    0.1523, 0.2344, 0.3770, 0.6016, 0.8770, 1.1758, 1.4766, 1.9141,
    2.4063, 2.7305, 3.3223, 3.9023, 4.5234, 5.1152, 5.5547,
)

# Reported MCS for each CQI (64QAM MCS table); reporting only.
CQI_TO_MCS = (0, 0, 0, 2, 4, 6, 8, 11, 13, 16, 18, 21, 23, 25, 27, 28)

# Deliverable bytes per PRB per TTI, per CQI.
BYTES_PER_PRB = tuple(int(math.floor(e * RE_PER_PRB / 8)) for e in CQI_EFFICIENCY)

# Upper bound on per-PRB throughput, bits/s (CQI 15).
MAX_RATE_PER_PRB_BPS = BYTES_PER_PRB[15] * 8 / TTI_S


def prb_count(bandwidth_hz):
    """Number of PRBs in an LTE-style carrier of the given bandwidth."""
    for bw, n in _PRB_GRID.items():
        if abs(float(bandwidth_hz) - bw) < 1.0:
            return n
    supported = ", ".join(f"{bw / 1e6:g} MHz" for bw in _PRB_GRID)
    raise ConfigurationError(
        f"unsupported bandwidth {bandwidth_hz} Hz (supported: {supported})"
    )


def cqi_from_sinr(sinr_db):
    """2 dB CQI steps starting at -7 dB; below -7 dB is outage (CQI 0)."""
    cqi = math.floor((sinr_db + 7.0) / 2.0) + 1
    return min(max(cqi, 0), 15)


def cqi_to_efficiency(cqi):
    if isinstance(cqi, bool) or not 0 <= int(cqi) <= 15 or int(cqi) != cqi:
        raise ValueError(f"cqi must be an integer in [0, 15], got {cqi!r}")
    return CQI_EFFICIENCY[int(cqi)]


def pathloss_db(distance_m, params: ChannelParams):
    d = max(float(distance_m), 1.0)
    return params.ref_loss_db + 10.0 * params.pathloss_exponent * math.log10(d)


def _draw_waypoint(center, mob: MobilityParams, rng):
    # uniform in the disc
    r = mob.radius_m * math.sqrt(rng.random())
    theta = 2.0 * math.pi * rng.random()
    return np.array([center[0] + r * math.cos(theta), center[1] + r * math.sin(theta)])


def init_ue_position(ue: UeState, bs_position, mob: MobilityParams, rng, params: ChannelParams):
    """Place a UE uniformly in the cell disc and draw its first waypoint.

    Shadowing starts from its stationary distribution.
    """
    pos = _draw_waypoint(bs_position, mob, rng)
    wp = _draw_waypoint(bs_position, mob, rng)
    speed = rng.uniform(mob.speed_min, mob.speed_max) if mob.speed_max > 0 else 0.0
    shadow = params.shadowing_sigma_db * rng.standard_normal()
    ue = dataclasses.replace(
        ue,
        position=pos,
        waypoint=wp,
        speed=float(speed),
        heading=math.atan2(wp[1] - pos[1], wp[0] - pos[0]),
        shadowing_db=float(shadow),
    )
    return _refresh_link(ue, bs_position, params)


def _refresh_link(ue, bs_position, params):
    d = math.hypot(ue.position[0] - bs_position[0], ue.position[1] - bs_position[1])
    ue.sinr_db = params.tx_power_dbm - pathloss_db(d, params) - ue.shadowing_db - params.noise_dbm
    ue.cqi = cqi_from_sinr(ue.sinr_db)
    return ue


def step_mobility_channel(
    ue: UeState,
    bs_position,
    dt,
    params: ChannelParams,
    rng,
    mobility: MobilityParams | None = None,
):
    """Advance one UE by ``dt`` seconds of random-waypoint motion and channel.

    Returns an updated copy; the input is not modified.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    mob = mobility or MobilityParams()
    pos = ue.position.copy()
    wp = ue.waypoint.copy()
    speed = ue.speed
    heading = ue.heading
    step = speed * dt
    travelled = step
    while step > 0:
        dx, dy = wp[0] - pos[0], wp[1] - pos[1]
        dist = math.hypot(dx, dy)
        if dist > step:
            heading = math.atan2(dy, dx)
            pos[0] += step * dx / dist
            pos[1] += step * dy / dist
            break
        pos[:] = wp
        step -= dist
        wp = _draw_waypoint(bs_position, mob, rng)
        speed = rng.uniform(mob.speed_min, mob.speed_max)
        heading = math.atan2(wp[1] - pos[1], wp[0] - pos[0])
        if speed == 0:
            break
    rho = math.exp(-travelled / params.shadowing_corr_distance_m)
    sigma = params.shadowing_sigma_db
    shadow = ue.shadowing_db
    if sigma > 0:
        shadow = rho * shadow + math.sqrt(1.0 - rho * rho) * sigma * rng.standard_normal()
    out = dataclasses.replace(
        ue, position=pos, waypoint=wp, speed=float(speed), heading=heading,
        shadowing_db=float(shadow),
    )
    return _refresh_link(out, bs_position, params)
