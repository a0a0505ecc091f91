from __future__ import annotations

from ..ran.phy import MAX_RATE_PER_PRB_BPS
from ..ran.types import SliceType

URLLC_BUFFER_REF_BYTES = 1e5


def compute_reward(slice_type, report, n_prbs=None):
    """Per-slice reward for one KPI window.

    eMBB/MTC: slice throughput over the slice's peak rate, clipped to [0, 1]
    (0 when the slice holds no PRBs). URLLC: minus the queued bytes relative
    to 100 kB, floored at -1. ``n_prbs`` is accepted for interface symmetry.
    """
    st = SliceType.parse(slice_type)
    if st == SliceType.URLLC:
        buf = sum(r.dl_buffer_bytes for r in report.records)
        return -min(buf / URLLC_BUFFER_REF_BYTES, 1.0)
    if report.slice_prbs <= 0:
        return 0.0
    thr = sum(r.dl_thr_bps for r in report.records)
    r = thr / (report.slice_prbs * MAX_RATE_PER_PRB_BPS)
    return min(max(r, 0.0), 1.0)
