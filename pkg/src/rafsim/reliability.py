"""Link and path reliability.

Links are either trusted at the value written in the topology file (static
mode) or estimated from the up/down flags carried in periodic feature
replies: the share of "up" samples in a bounded FIFO window.
"""

from __future__ import annotations

import enum
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass

from .topology import Topology

DEFAULT_WINDOW = 100


class ReliabilityMode(str, enum.Enum):
    STATIC = "static"
    ESTIMATED = "estimated"


class PathRule(str, enum.Enum):
    PRODUCT = "product"
    MIN = "min"


@dataclass(frozen=True)
class ObservationWindow:
    link: str
    capacity: int = DEFAULT_WINDOW
    samples: tuple[bool, ...] = ()

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("window capacity must be a positive integer")
        if len(self.samples) > self.capacity:
            object.__setattr__(self, "samples", tuple(self.samples[-self.capacity:]))

    @property
    def ups(self) -> int:
        return sum(self.samples)

    def ratio(self) -> float:
        if not self.samples:
            return 1.0
        return self.ups / len(self.samples)


def record_observation(window: ObservationWindow, up: bool) -> ObservationWindow:
    """Append one sample, evicting the eldest when the window is full."""
    samples = window.samples + (bool(up),)
    if len(samples) > window.capacity:
        samples = samples[1:]
    return ObservationWindow(window.link, window.capacity, samples)


def link_reliability(mode: ReliabilityMode | str, topo: Topology,
                     window: ObservationWindow | None, link: str) -> float:
    static = topo.link(link).reliability
    if ReliabilityMode(mode) is ReliabilityMode.STATIC:
        return static
    if window is None:
        raise ValueError(f"estimated mode needs an observation window for {link}")
    return window.ratio()


def path_reliability(rule: PathRule | str, rels: Iterable[float]) -> float:
    rels = list(rels)
    if not rels:
        return 1.0
    if PathRule(rule) is PathRule.MIN:
        return min(rels)
    return math.prod(rels)


class LinkEstimator:
    """Per-link reliability source used by the controller.

    Holds one window per link; in static mode the windows are still fed
    (they cost nothing) but the topology values are returned.
    """

    def __init__(self, topo: Topology, mode: ReliabilityMode | str = ReliabilityMode.STATIC,
                 window: int = DEFAULT_WINDOW):
        self.mode = ReliabilityMode(mode)
        self.windows: dict[str, ObservationWindow] = {
            l.id: ObservationWindow(l.id, window) for l in topo.links}

    def observe(self, link: str, up: bool) -> None:
        self.windows[link] = record_observation(self.windows[link], up)

    def reliability(self, topo: Topology, link: str) -> float:
        return link_reliability(self.mode, topo, self.windows.get(link), link)

    def snapshot(self, topo: Topology) -> Mapping[str, float]:
        return {l.id: self.reliability(topo, l.id) for l in topo.links}
