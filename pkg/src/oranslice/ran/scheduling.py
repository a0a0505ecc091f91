"""Per-slice downlink PRB schedulers (RR, PF, WF) and the TTI drain step.

All schedulers take the *backlogged, CQI>0* UEs of one slice in ascending
``ue_id`` order and return a ``{ue_id: prbs}`` map holding only positive
grants.
"""
from __future__ import annotations

from functools import lru_cache

from .phy import BYTES_PER_PRB
from .types import EWMA_FLOOR_BPS

WF_TOL = 1e-9
WF_MAX_ITER = 200


def schedule_rr(ue_ids, n_prbs, pointer=None):
    """Deal PRBs one at a time, cyclically, starting at ``pointer``.

    ``pointer`` is a ue_id. If it is not backlogged the deal starts at the
    next backlogged UE in id order (wrapping). Returns ``(grants, pointer)``
    where the new pointer is the UE after the last one served.
    """
    k = len(ue_ids)
    if k == 0 or n_prbs <= 0:
        return {}, pointer
    start = 0
    if pointer is not None:
        for i, u in enumerate(ue_ids):
            if u >= pointer:
                start = i
                break
    base, extra = divmod(n_prbs, k)
    grants = {}
    for j in range(k):
        g = base + (1 if j < extra else 0)
        if g:
            grants[ue_ids[(start + j) % k]] = g
    return grants, ue_ids[(start + n_prbs) % k]


def schedule_pf(ue_ids, n_prbs, rates, histories):
    """Give every PRB to the UE maximizing ``rate / history``.

    Flat fading makes the per-PRB metric identical across PRBs, so the
    decision is winner-take-all for the TTI. Ties go to the lowest ue_id.
    """
    if not ue_ids or n_prbs <= 0:
        return {}
    best_u = None
    best_metric = -1.0
    for u, r, hist in zip(ue_ids, rates, histories):
        metric = r / max(hist, EWMA_FLOOR_BPS)
        if metric > best_metric or (metric == best_metric and u < best_u):
            best_u, best_metric = u, metric
    return {best_u: n_prbs}


def update_ewma(history_bps, served_rate_bps, alpha=0.1):
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    r = (1.0 - alpha) * history_bps + alpha * served_rate_bps
    return r if r > EWMA_FLOOR_BPS else EWMA_FLOOR_BPS


def water_level(levels, budget, tol=WF_TOL, max_iter=WF_MAX_ITER):
    """Water level ``mu`` with ``sum(max(0, mu - n)) == budget``.

    Bisection brackets the level; the active set it identifies is then
    solved in closed form so UEs sitting exactly at the level get zero.
    """
    if budget <= 0 or not levels:
        return min(levels) if levels else 0.0
    lo = min(levels)
    hi = lo + budget
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        filled = sum(mid - n for n in levels if n < mid)
        if filled < budget:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    mu = 0.5 * (lo + hi)
    active = [n for n in levels if n < mu - tol]
    if not active:
        active = [min(levels)]
    exact = (budget + sum(active)) / len(active)
    # accept the refinement only if it is consistent with its active set
    if all(n < exact for n in active) and all(n >= exact - tol for n in levels if n not in active):
        return exact
    return mu


def largest_remainder(shares, total, keys=None):
    """Quantize non-negative ``shares`` summing to ``total`` into integers.

    Floors first, then one extra unit each to the largest fractional parts
    among strictly positive shares; equal remainders favour the smaller key.
    """
    keys = list(range(len(shares))) if keys is None else list(keys)
    floors = [int(s // 1) if s > 0 else 0 for s in shares]
    left = int(total) - sum(floors)
    order = sorted(
        (i for i, s in enumerate(shares) if s > 0),
        key=lambda i: (-(shares[i] - floors[i]), keys[i]),
    )
    for i in order[:max(left, 0)]:
        floors[i] += 1
    return floors


@lru_cache(maxsize=65536)
def _wf_grants(efficiencies, n_prbs):
    levels = [1.0 / e for e in efficiencies]
    mu = water_level(levels, n_prbs)
    shares = [mu - n if n < mu else 0.0 for n in levels]
    return tuple(largest_remainder(shares, n_prbs))


def schedule_wf(ue_ids, n_prbs, efficiencies):
    """Waterfilling over inverse-efficiency levels, largest-remainder rounding.

    UEs with non-positive efficiency (CQI 0) are not eligible.
    """
    pairs = [(u, float(e)) for u, e in zip(ue_ids, efficiencies) if e > 0]
    if not pairs or n_prbs <= 0:
        return {}
    ids = [u for u, _ in pairs]
    grants = _wf_grants(tuple(e for _, e in pairs), int(n_prbs))
    return {u: g for u, g in zip(ids, grants) if g}


def tti_capacity_bytes(prbs, cqi):
    return prbs * BYTES_PER_PRB[cqi]


def serve_tti(alloc, cqis, buffers):
    """Bytes drained per UE this TTI: ``min(prbs * bytes_per_prb(cqi), buffer)``.

    ``cqis`` and ``buffers`` map ue_id to CQI / queued bytes. Pure; the
    caller applies the decrement.
    """
    served = {}
    for u, prbs in alloc.items():
        cap = prbs * BYTES_PER_PRB[cqis[u]]
        served[u] = min(cap, buffers[u])
    return served
