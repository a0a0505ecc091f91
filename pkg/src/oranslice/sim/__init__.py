"""Discrete-time (1 ms TTI) sliced RAN simulator."""

from .engine import (
    BsState,
    ControlEvent,
    KpiReport,
    KpiWindowAccumulator,
    QuotaSchedule,
    StaticControl,
    Trace,
    apply_control,
    apply_quota_schedule,
    close_kpi_window,
    run,
    run_tti,
)
from .e2node import RicControl
from .world import SliceSpec, build_base_station

__all__ = [
    "BsState", "ControlEvent", "KpiReport", "KpiWindowAccumulator", "QuotaSchedule", "RicControl",
    "SliceSpec", "StaticControl", "Trace", "apply_control", "apply_quota_schedule",
    "build_base_station", "close_kpi_window", "run", "run_tti",
]
