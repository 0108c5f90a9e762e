"""Discrete-event simulator of a vehicular fog system with dynamic task
scheduling (threshold-triggered one-shot neighbour offloading) and dynamic
energy control (controller-driven node ON/OFF switching)."""

from .scenario import Scenario, load_paper_default, load_scenario, save_scenario
from .simulation import FogSimulation, simulate

__all__ = ["Scenario", "FogSimulation", "simulate", "load_scenario", "save_scenario",
           "load_paper_default"]

__version__ = "0.1.0"
