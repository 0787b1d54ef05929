"""Agent-based epidemic testbed driving the real signal-server modules."""

from .world import InfeasibleConfig, SimWorld, generate_world, watts_strogatz
from .dynamics import ContactSampler, Simulation, SIM_EPOCH
from . import experiments

__all__ = [
    "InfeasibleConfig", "SimWorld", "generate_world", "watts_strogatz",
    "ContactSampler", "Simulation", "SIM_EPOCH", "experiments",
]
