"""Centralised control plane.

The controller is a plain state machine: every ``handle_*`` method consumes
one message (or event) and returns the control messages it wants sent.  It
never looks at the clock; the engine owns timing and delivery.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .dataplane import DROP, FlowMatch, FlowRule, Forward, MissReason, Packet
from .errors import ProtocolError
from .pathfinder import (DEFAULT_PATH_CAP, CountMode, NoPathError, PathSet, RankedPath, Selector,
                         Strategy, TierTable, select_paths)
from .reliability import DEFAULT_WINDOW, LinkEstimator, PathRule, ReliabilityMode
from .topology import Host, Link, Topology, TopologyError

PRIMARY_PRIORITY = 1000
PRIORITY_STEP = 10


# -- messages -----------------------------------------------------------------

@dataclass(frozen=True)
class Hello:
    switch: str


@dataclass(frozen=True)
class FeatureRequest:
    switch: str


@dataclass(frozen=True)
class LinkReport:
    link: str
    up: bool
    reliability: float


@dataclass(frozen=True)
class FeatureReply:
    switch: str
    links: tuple[LinkReport, ...] = ()


@dataclass(frozen=True)
class PacketIn:
    switch: str
    packet: Packet
    reason: MissReason = MissReason.MISS


@dataclass(frozen=True)
class PacketOut:
    switch: str
    packet: Packet
    port: int | None  # None discards the packet


@dataclass(frozen=True)
class FlowModAdd:
    switch: str
    rule: FlowRule


@dataclass(frozen=True)
class FlowModDelete:
    switch: str
    cookie: int
    match: FlowMatch | None = None
    priority: int | None = None


@dataclass(frozen=True)
class PortStatusNotice:
    switch: str
    port: int
    up: bool


@dataclass(frozen=True)
class FlowRemoved:
    switch: str
    rule: FlowRule


ControlMessage = (Hello | FeatureRequest | FeatureReply | PacketIn | PacketOut | FlowModAdd
                  | FlowModDelete | PortStatusNotice | FlowRemoved)


# -- configuration ------------------------------------------------------------

@dataclass(frozen=True)
class AclEntry:
    """One ACL line; ``None`` fields are wildcards."""

    src: int | None = None
    dst: int | None = None
    nw_proto: int | None = None
    allow: bool = True

    def matches(self, key: FlowMatch) -> bool:
        return ((self.src is None or self.src == key.nw_src)
                and (self.dst is None or self.dst == key.nw_dst)
                and (self.nw_proto is None or self.nw_proto == key.nw_proto))


def acl_allows(acl, key: FlowMatch) -> bool:
    for entry in acl:
        if entry.matches(key):
            return entry.allow
    return True


@dataclass(frozen=True)
class ControllerConfig:
    strategy: Strategy = Strategy.RAF
    count_mode: CountMode = CountMode.TOTAL
    path_rule: PathRule = PathRule.PRODUCT
    reliability_mode: ReliabilityMode = ReliabilityMode.STATIC
    window: int = DEFAULT_WINDOW
    path_cap: int = DEFAULT_PATH_CAP
    disjoint: bool = False
    idle_timeout: float = 0.0
    hard_timeout: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        object.__setattr__(self, "count_mode", CountMode(self.count_mode))
        object.__setattr__(self, "path_rule", PathRule(self.path_rule))
        object.__setattr__(self, "reliability_mode", ReliabilityMode(self.reliability_mode))
        if self.window < 1:
            raise ValueError("window must be a positive integer")
        if self.path_cap < 1:
            raise ValueError("path_cap must be a positive integer")


@dataclass
class Counters:
    path_computations: int = 0
    candidates_ranked: int = 0
    paths_installed: int = 0
    packet_ins: int = 0
    packet_outs: int = 0
    flow_mod_adds: int = 0
    flow_mod_deletes: int = 0
    feature_replies: int = 0
    bootstrap_msgs: int = 0
    port_status: int = 0
    flow_removed: int = 0
    no_path: int = 0
    acl_denied: int = 0

    @property
    def flow_mods(self) -> int:
        return self.flow_mod_adds + self.flow_mod_deletes


@dataclass
class InstalledFlow:
    key: FlowMatch
    cookie: int
    src: Host
    dst: Host
    denied: bool = False
    pathset: PathSet | None = None
    # (priority, path) of every installed path still believed usable, best first
    live: list[tuple[int, RankedPath]] = field(default_factory=list)


class Controller:
    def __init__(self, topo: Topology, config: ControllerConfig = ControllerConfig(), acl=()):
        self.view = topo
        self.config = config
        self.acl = tuple(acl)
        self.estimator = LinkEstimator(topo, config.reliability_mode, config.window)
        self.selector = Selector(config.strategy, TierTable(count_mode=config.count_mode),
                                 config.path_rule, config.path_cap, config.disjoint)
        self.installed: dict[FlowMatch, InstalledFlow] = {}
        self.counters = Counters()
        self._switches = frozenset(topo.switches)
        self._awaiting_reply: set[str] = set()
        self._next_cookie = 1

    # -- bootstrap and link state ---------------------------------------------

    def bootstrap(self) -> list[ControlMessage]:
        out: list[ControlMessage] = []
        for sw in self.view.switches:
            out.append(Hello(sw))
            out.append(FeatureRequest(sw))
        self._awaiting_reply = set(self.view.switches)
        self.counters.bootstrap_msgs += len(out)
        return out

    @property
    def bootstrapped(self) -> bool:
        return not self._awaiting_reply

    def handle_feature_reply(self, msg: FeatureReply) -> list[ControlMessage]:
        if msg.switch not in self._switches:
            raise ProtocolError(f"feature reply from undeclared switch {msg.switch!r}")
        if msg.switch in self._awaiting_reply:
            self._awaiting_reply.discard(msg.switch)
            self.counters.bootstrap_msgs += 1
        else:
            self.counters.feature_replies += 1
        out: list[ControlMessage] = []
        for report in msg.links:
            try:
                link = self.view.link(report.link)
            except TopologyError:
                raise ProtocolError(f"{msg.switch} reported unknown link {report.link!r}") from None
            self.estimator.observe(report.link, report.up)
            if link.up and not report.up:
                out.extend(self.handle_link_failure(report.link))
            elif not link.up and report.up:
                self.handle_link_repair(report.link)
        return out

    def handle_port_status(self, msg: PortStatusNotice) -> list[ControlMessage]:
        self.counters.port_status += 1
        owner = self.view.port_owner(msg.switch, msg.port)
        if not isinstance(owner, Link):
            return []
        if not msg.up:
            return self.handle_link_failure(owner.id)
        self.handle_link_repair(owner.id)
        return []

    def handle_link_repair(self, link_id: str) -> None:
        # No top-up: degraded path sets stay degraded until they empty out.
        self.view = self.view.with_link_status(link_id, True)

    def handle_link_failure(self, link_id: str) -> list[ControlMessage]:
        """Forget paths over ``link_id``; recompute only flows left with none."""
        if not self.view.link(link_id).up:
            return []
        self.view = self.view.with_link_status(link_id, False)
        out: list[ControlMessage] = []
        gone = []
        for key, inst in self.installed.items():
            if inst.denied:
                continue
            dead = [(prio, rp) for prio, rp in inst.live if rp.path.uses(link_id)]
            if not dead:
                continue
            for prio, rp in dead:
                for sw in rp.path.nodes:
                    out.append(self._delete(sw, inst.cookie, key, prio))
            inst.live = [(prio, rp) for prio, rp in inst.live if not rp.path.uses(link_id)]
            if inst.live:
                continue
            try:
                inst.pathset = self._compute(inst.src, inst.dst)
            except NoPathError:
                gone.append(key)
                continue
            out.extend(self._install(inst))
        for key in gone:
            del self.installed[key]
        return out

    def handle_flow_removed(self, msg: FlowRemoved) -> list[ControlMessage]:
        self.counters.flow_removed += 1
        inst = self.installed.get(msg.rule.match)
        if inst is None or inst.cookie != msg.rule.cookie:
            return []
        if inst.denied:
            del self.installed[msg.rule.match]
            return []
        inst.live = [(p, rp) for p, rp in inst.live if p != msg.rule.priority]
        if not inst.live:
            del self.installed[msg.rule.match]
        return []

    # -- reactive path installation -------------------------------------------

    def handle_packet_in(self, msg: PacketIn) -> list[ControlMessage]:
        self.counters.packet_ins += 1
        pkt = msg.packet
        src = self.view.host_lookup(pkt.src)
        dst = self.view.host_lookup(pkt.dst)
        key = pkt.match()

        inst = self.installed.get(key)
        if inst is not None:
            # rules already issued (still in flight, evicted or bypassed): just release the packet
            if inst.denied:
                return []
            return [self._packet_out(msg.switch, pkt, self._egress_for(inst, msg.switch))]

        cookie = self._next_cookie
        self._next_cookie += 1
        if not acl_allows(self.acl, key):
            self.counters.acl_denied += 1
            self.installed[key] = InstalledFlow(key, cookie, src, dst, denied=True)
            rule = FlowRule(key, PRIMARY_PRIORITY, DROP, cookie)
            return [self._add(src.attach[0], rule)]

        try:
            pathset = self._compute(src, dst)
        except NoPathError:
            self.counters.no_path += 1
            return [self._packet_out(msg.switch, pkt, None)]
        inst = InstalledFlow(key, cookie, src, dst, pathset=pathset)
        out = self._install(inst)
        self.installed[key] = inst
        out.append(self._packet_out(msg.switch, pkt, self._egress_for(inst, msg.switch)))
        return out

    def uninstall(self, key: FlowMatch) -> list[ControlMessage]:
        """Remove every rule of a flow by cookie, one delete per switch touched."""
        inst = self.installed.pop(key)
        if inst.denied:
            switches = [inst.src.attach[0]]
        else:
            switches = sorted({sw for _, rp in inst.live for sw in rp.path.nodes})
        return [self._delete(sw, inst.cookie) for sw in switches]

    def handle(self, msg: ControlMessage) -> list[ControlMessage]:
        if isinstance(msg, PacketIn):
            return self.handle_packet_in(msg)
        if isinstance(msg, FeatureReply):
            return self.handle_feature_reply(msg)
        if isinstance(msg, PortStatusNotice):
            return self.handle_port_status(msg)
        if isinstance(msg, FlowRemoved):
            return self.handle_flow_removed(msg)
        raise ProtocolError(f"controller cannot handle {type(msg).__name__}")

    # -- helpers --------------------------------------------------------------

    def link_reliability(self, link_id: str) -> float:
        return self.estimator.reliability(self.view, link_id)

    def _compute(self, src: Host, dst: Host) -> PathSet:
        self.counters.path_computations += 1
        pathset = select_paths(self.view, src.attach[0], dst.attach[0], self.selector, self.link_reliability)
        self.counters.candidates_ranked += pathset.candidates
        return pathset

    def _install(self, inst: InstalledFlow) -> list[ControlMessage]:
        paths = inst.pathset.paths
        # keep every priority non-negative even for very large path sets
        base = max(PRIMARY_PRIORITY, PRIORITY_STEP * (len(paths) - 1))
        out: list[ControlMessage] = []
        inst.live = []
        dst_port = inst.dst.attach[1]
        for i, rp in enumerate(paths):
            prio = base - PRIORITY_STEP * i
            inst.live.append((prio, rp))
            # destination switch first so downstream rules exist before upstream ones
            for sw, port in reversed(rp.path.hops(dst_port)):
                rule = FlowRule(inst.key, prio, Forward(port), inst.cookie,
                                self.config.idle_timeout, self.config.hard_timeout)
                out.append(self._add(sw, rule))
        self.counters.paths_installed += len(paths)
        return out

    def _egress_for(self, inst: InstalledFlow, switch: str) -> int | None:
        dst_port = inst.dst.attach[1]
        for _, rp in inst.live:
            port = rp.path.egress(switch, dst_port)
            if port is None:
                continue
            owner = self.view.port_owner(switch, port)
            if isinstance(owner, Link) and not owner.up:
                continue
            return port
        return None

    def _add(self, switch: str, rule: FlowRule) -> FlowModAdd:
        self.counters.flow_mod_adds += 1
        return FlowModAdd(switch, rule)

    def _delete(self, switch: str, cookie: int, match: FlowMatch | None = None,
                priority: int | None = None) -> FlowModDelete:
        self.counters.flow_mod_deletes += 1
        return FlowModDelete(switch, cookie, match, priority)

    def _packet_out(self, switch: str, pkt: Packet, port: int | None) -> PacketOut:
        self.counters.packet_outs += 1
        return PacketOut(switch, pkt, port)
