"""Reliability-aware multipath flow installation for SDN, as a discrete-event simulator."""

from .controller import AclEntry, Controller, ControllerConfig
from .dataplane import FlowMatch, FlowRule, Packet, SwitchState
from .engine import FlowSpec, LinkEvent, Scenario, SimConfig, Simulation, parse_scenario, simulate
from .errors import InputError, InvariantViolation, ProtocolError, RafsimError
from .metrics import MetricsReport, compare, export_csv, summarize
from .pathfinder import (CountMode, PathSet, RankMode, Selector, Strategy, TierTable, enumerate_simple_paths,
                         rank_paths, select_paths, tier_path_count)
from .reliability import PathRule, ReliabilityMode, link_reliability, path_reliability
from .topology import Host, Link, Topology, parse_topology, render_topology

__version__ = "0.1.0"

__all__ = [
    "AclEntry", "Controller", "ControllerConfig", "CountMode", "FlowMatch", "FlowRule", "FlowSpec", "Host",
    "InputError", "InvariantViolation", "Link", "LinkEvent", "MetricsReport", "Packet", "PathRule", "PathSet",
    "ProtocolError", "RafsimError", "RankMode", "ReliabilityMode", "Scenario", "Selector", "SimConfig",
    "Simulation", "Strategy", "SwitchState", "TierTable", "Topology", "compare", "enumerate_simple_paths",
    "export_csv", "link_reliability", "parse_scenario", "parse_topology", "path_reliability", "rank_paths",
    "render_topology", "select_paths", "simulate", "summarize", "tier_path_count",
]
