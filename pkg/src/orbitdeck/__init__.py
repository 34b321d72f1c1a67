"""Desk-scale orbital pursuit games, synthetic dashboards, agent harness,
and a teleoperated inspection simulator."""

__version__ = "0.1.0"

from .actions import DiscreteAction, enumerate_actions, format_action, to_accel
from .dynamics import (
    BodyParams,
    StateVector,
    VesselState,
    circular_orbit,
    elliptical_orbit,
    orbit_frame,
    propagate,
)
from .scenarios import Game, ScenarioSpec, init_scenario, parse_scenario_id
from .telemetry import Observation, RunReport, ScoreLedger, ScoreParams, aggregate_runs, prograde, score

__all__ = [
    "BodyParams",
    "DiscreteAction",
    "Game",
    "Observation",
    "RunReport",
    "ScenarioSpec",
    "ScoreLedger",
    "ScoreParams",
    "StateVector",
    "VesselState",
    "aggregate_runs",
    "circular_orbit",
    "elliptical_orbit",
    "enumerate_actions",
    "format_action",
    "init_scenario",
    "orbit_frame",
    "parse_scenario_id",
    "prograde",
    "propagate",
    "score",
    "to_accel",
]
