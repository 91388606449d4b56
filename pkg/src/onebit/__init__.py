"""Simulation of entangled-qubit statistics with shared randomness and one bit
of communication, and membership tests for the one-bit polytope."""

__version__ = "0.1.0"

from ._backend import BACKEND  # noqa: E402
from .lhv import (  # noqa: E402
    LhvSample,
    MaxEntangledProtocol,
    ProtocolCoefficients,
    SemianalyticalProtocol,
    TonerBaconProtocol,
    estimate_behavior,
    load_preset,
)
from .polytope import (  # noqa: E402
    CommStrategy,
    Scenario,
    comm_oracle,
    enumerate_comm_vertices,
    enumerate_local_vertices,
    membership,
    visibility,
)
from .qstate import Behavior, TwoQubitState, born_behavior, closed_form_stats  # noqa: E402
from .stats import kl_divergence, n95, sweep, tvd  # noqa: E402

__all__ = [
    "BACKEND",
    "Behavior",
    "CommStrategy",
    "LhvSample",
    "MaxEntangledProtocol",
    "ProtocolCoefficients",
    "Scenario",
    "SemianalyticalProtocol",
    "TonerBaconProtocol",
    "TwoQubitState",
    "born_behavior",
    "closed_form_stats",
    "comm_oracle",
    "enumerate_comm_vertices",
    "enumerate_local_vertices",
    "estimate_behavior",
    "kl_divergence",
    "load_preset",
    "membership",
    "n95",
    "sweep",
    "tvd",
    "visibility",
]
