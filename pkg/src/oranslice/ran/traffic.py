from __future__ import annotations

import math

import numpy as np

from .types import Cbr, Poisson


class TrafficSource:
    """Stateful packet generator for one UE.

    CBR keeps a fractional-byte carry so emitted bytes never drift more than
    one packet from ``rate * t / 8``. Poisson draws are memoryless.
    """

    def __init__(self, model):
        if not isinstance(model, (Cbr, Poisson)):
            raise TypeError(f"unsupported traffic model {model!r}")
        self.model = model
        self.carry_bytes = 0.0

    def arrivals(self, dt, rng):
        """Packet sizes (bytes) arriving over the next ``dt`` seconds."""
        if dt <= 0:
            raise ValueError("dt must be > 0")
        m = self.model
        if isinstance(m, Cbr):
            self.carry_bytes += m.rate_bps * dt / 8.0
            # tolerance absorbs binary rounding of rate*dt
            n = int(math.floor(self.carry_bytes / m.pkt_size_bytes + 1e-9))
            self.carry_bytes -= n * m.pkt_size_bytes
        else:
            n = int(rng.poisson(m.pkts_per_s * dt))
        return [m.pkt_size_bytes] * n

    def packet_counts(self, n_steps, dt, rng):
        """Per-step packet counts for ``n_steps`` consecutive steps of ``dt``.

        Same process as calling :meth:`arrivals` repeatedly, vectorized.
        """
        m = self.model
        if isinstance(m, Cbr):
            per_step = m.rate_bps * dt / 8.0
            cum = self.carry_bytes + per_step * np.arange(1, n_steps + 1)
            emitted = np.floor(cum / m.pkt_size_bytes + 1e-9).astype(np.int64)
            counts = np.diff(emitted, prepend=0)
            self.carry_bytes = float(cum[-1] - emitted[-1] * m.pkt_size_bytes) if n_steps else self.carry_bytes
            return counts
        return rng.poisson(m.pkts_per_s * dt, size=n_steps).astype(np.int64)


def traffic_arrivals(model, dt, rng, source=None):
    """Packet sizes arriving in ``dt`` seconds under ``model``.

    Pass a persistent :class:`TrafficSource` as ``source`` to keep the CBR
    carry across calls; without it each call starts with an empty carry.
    """
    src = source if source is not None else TrafficSource(model)
    return src.arrivals(dt, rng)
