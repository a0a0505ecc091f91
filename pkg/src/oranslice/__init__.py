"""Sliced RAN simulator with a near-real-time RIC closed control loop.

Subpackages:

* ``ran`` - channel/CQI modelling, traffic, PRB schedulers
* ``sim`` - 1 ms TTI engine, KPI windows, quota schedules
* ``e2lite`` - binary E2-like protocol codec and transports
* ``ric`` - near-RT RIC: E2 manager, registry, router, xApps
* ``drl`` - state encoder, actor-critic networks, PPO, model catalog
* ``harness`` - scenarios, experiments, offline training, reports, CLI
"""

__version__ = "0.1.0"
