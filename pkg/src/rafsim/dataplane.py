"""Switch forwarding state: a bounded exact-match flow table plus port status.

Lookup scans the matching entries from highest priority down and skips any
Forward entry whose egress port is down.  Lower-priority backup entries
therefore take over locally the moment a port dies, which is how
fast-failover groups behave observably.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .errors import RafsimError

DEFAULT_CAPACITY = 1500
ETH_IPV4 = 0x0800
IPPROTO_UDP = 17


class UnknownPortError(RafsimError):
    pass


@dataclass(frozen=True)
class FlowMatch:
    dl_type: int
    nw_proto: int
    nw_src: int
    nw_dst: int


@dataclass(frozen=True)
class Forward:
    port: int


@dataclass(frozen=True)
class Drop:
    pass


class MissReason(str, enum.Enum):
    MISS = "miss"
    ALL_DEAD = "all-dead"


@dataclass(frozen=True)
class ToController:
    reason: MissReason = MissReason.MISS


DROP = Drop()
Action = Forward | Drop | ToController


@dataclass(frozen=True)
class FlowRule:
    match: FlowMatch
    priority: int
    action: Action
    cookie: int = 0
    idle_timeout: float = 0.0
    hard_timeout: float = 0.0

    def __post_init__(self):
        if self.priority < 0:
            raise ValueError("priority must be non-negative")


class InstallResult(str, enum.Enum):
    OK = "ok"
    TABLE_FULL = "table-full"


@dataclass(frozen=True)
class PortStatus:
    switch: str
    port: int
    up: bool


class Packet:
    __slots__ = ("src", "dst", "dl_type", "nw_proto", "size", "seq", "created_at", "flow", "ttl", "_match")

    def __init__(self, src: int, dst: int, size: int = 62, seq: int = 0, created_at: float = 0.0,
                 dl_type: int = ETH_IPV4, nw_proto: int = IPPROTO_UDP, flow: int = 0, ttl: int = 64):
        if size <= 0:
            raise ValueError("packet size must be positive")
        self.src = src
        self.dst = dst
        self.dl_type = dl_type
        self.nw_proto = nw_proto
        self.size = size
        self.seq = seq
        self.created_at = created_at
        self.flow = flow
        self.ttl = ttl
        self._match = FlowMatch(dl_type, nw_proto, src, dst)

    def match(self) -> FlowMatch:
        return self._match

    def __repr__(self):
        return f"Packet(flow={self.flow}, seq={self.seq}, src={self.src:#x}, dst={self.dst:#x})"


@dataclass
class SwitchState:
    id: str
    ports: dict[int, bool]
    capacity: int = DEFAULT_CAPACITY
    # match -> {priority: rule}
    _table: dict[FlowMatch, dict[int, FlowRule]] = field(default_factory=dict, repr=False)
    _installed_at: dict[tuple[FlowMatch, int], float] = field(default_factory=dict, repr=False)
    _last_hit: dict[tuple[FlowMatch, int], float] = field(default_factory=dict, repr=False)
    _size: int = 0

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("table capacity must be positive")

    def __len__(self) -> int:
        return self._size

    @property
    def entries(self) -> list[FlowRule]:
        return [r for m in self._table.values() for r in m.values()]

    def install_rule(self, rule: FlowRule, now: float = 0.0) -> InstallResult:
        if isinstance(rule.action, Forward) and rule.action.port not in self.ports:
            raise UnknownPortError(f"{self.id}: rule forwards to unknown port {rule.action.port}")
        by_prio = self._table.get(rule.match)
        if by_prio is not None and rule.priority in by_prio:
            by_prio[rule.priority] = rule
        else:
            if self._size >= self.capacity:
                return InstallResult.TABLE_FULL
            self._table.setdefault(rule.match, {})[rule.priority] = rule
            self._size += 1
        key = (rule.match, rule.priority)
        self._installed_at[key] = now
        self._last_hit[key] = now
        return InstallResult.OK

    def select(self, pkt: Packet) -> tuple[Action, FlowRule | None]:
        """Lookup returning the chosen rule as well (``None`` on a controller punt)."""
        by_prio = self._table.get(pkt.match())
        if not by_prio:
            return ToController(MissReason.MISS), None
        for prio in sorted(by_prio, reverse=True):
            rule = by_prio[prio]
            action = rule.action
            if isinstance(action, Forward) and not self.ports.get(action.port, False):
                continue
            return action, rule
        return ToController(MissReason.ALL_DEAD), None

    def lookup(self, pkt: Packet) -> Action:
        return self.select(pkt)[0]

    def touch(self, rule: FlowRule, now: float) -> None:
        self._last_hit[(rule.match, rule.priority)] = now

    def remove_rules(self, cookie: int | None = None, match: FlowMatch | None = None,
                     egress_port: int | None = None, priority: int | None = None) -> int:
        """Delete every entry satisfying all the given selectors; returns the count."""
        if cookie is None and match is None and egress_port is None:
            raise ValueError("at least one of cookie, match or egress_port is required")
        matches = [match] if match is not None else list(self._table)
        removed = 0
        for m in matches:
            by_prio = self._table.get(m)
            if not by_prio:
                continue
            for prio in list(by_prio):
                rule = by_prio[prio]
                if cookie is not None and rule.cookie != cookie:
                    continue
                if priority is not None and prio != priority:
                    continue
                if egress_port is not None and not (
                        isinstance(rule.action, Forward) and rule.action.port == egress_port):
                    continue
                self._drop(m, prio)
                removed += 1
        return removed

    def _drop(self, match: FlowMatch, prio: int) -> None:
        by_prio = self._table[match]
        del by_prio[prio]
        if not by_prio:
            del self._table[match]
        self._installed_at.pop((match, prio), None)
        self._last_hit.pop((match, prio), None)
        self._size -= 1

    def set_port_status(self, port: int, up: bool) -> PortStatus:
        if port not in self.ports:
            raise UnknownPortError(f"{self.id}: unknown port {port}")
        self.ports[port] = bool(up)
        return PortStatus(self.id, port, bool(up))

    def sweep_timeouts(self, now: float, last_hit: dict[tuple[FlowMatch, int], float] | None = None
                       ) -> list[FlowRule]:
        """Remove entries past their hard or idle timeout and return them.

        ``last_hit`` overrides the switch's own hit bookkeeping, keyed by
        ``(match, priority)``.
        """
        hits = self._last_hit if last_hit is None else last_hit
        expired = []
        for rule in self.entries:
            key = (rule.match, rule.priority)
            if rule.hard_timeout > 0 and now - self._installed_at.get(key, 0.0) >= rule.hard_timeout:
                expired.append(rule)
            elif rule.idle_timeout > 0 and now - hits.get(key, self._installed_at.get(key, 0.0)) >= rule.idle_timeout:
                expired.append(rule)
        for rule in expired:
            self._drop(rule.match, rule.priority)
        return expired
