"""Near-real-time RIC: E2 manager, registry, router and xApp host."""

from .ric import (
    E2_MANAGER,
    XAPP,
    BsRegistryEntry,
    NearRtRic,
    RicSession,
    RouteTable,
    Subscription,
    XAppRegistration,
)
from .server import RicServer
from .xapp import LearningXApp, SliceModel, SliceXApp, XAppDescriptor

__all__ = [
    "E2_MANAGER", "XAPP", "BsRegistryEntry", "LearningXApp", "NearRtRic", "RicServer",
    "RicSession", "RouteTable", "SliceModel", "SliceXApp", "Subscription", "XAppDescriptor",
    "XAppRegistration",
]
