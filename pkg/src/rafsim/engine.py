"""Deterministic discrete-event kernel.

Events are ordered by ``(time, seq)``; ``seq`` is assigned when an event is
scheduled, so simultaneous events fire in scheduling order and a run is a
pure function of its inputs.

Delay model (all in simulated milliseconds):

* a packet leaving a host reaches its attachment switch after the host link delay;
* every switch visit costs ``switch_proc`` and then the egress link delay;
* a table miss sends a packet-in (``ctrl_rtt`` one way); the controller handles
  it (``ctrl_proc`` + ``ctrl_path_cost`` per ranked candidate +
  ``ctrl_msg_cost`` per emitted message) and each reply takes ``ctrl_rtt``
  back, so an idle controller adds exactly ``2 * ctrl_rtt`` to a missed packet.
"""

from __future__ import annotations

import dataclasses
import enum
import heapq
import ipaddress
import random
import time as _time
from dataclasses import dataclass, field

from ._text import ParseError, Token, iter_records, parse_float, parse_int, split_key_value
from .controller import (AclEntry, Controller, ControllerConfig, FeatureReply, FeatureRequest, FlowModAdd,
                         FlowModDelete, FlowRemoved, Hello, LinkReport, PacketIn, PacketOut,
                         PortStatusNotice)
from .dataplane import DEFAULT_CAPACITY, Drop, Forward, InstallResult, Packet, SwitchState
from .errors import InputError, RafsimError
from .metrics import MetricsReport
from .pathfinder import CountMode, Strategy
from .reliability import PathRule, ReliabilityMode
from .topology import Host, Link, Topology

HORIZON_SLACK = 10_000.0

# event kinds
HOST_SEND = 0
AT_SWITCH = 1
AT_HOST = 2
TO_CONTROLLER = 3
TO_SWITCH = 4
LINK_FAIL = 5
LINK_REPAIR = 6
TICK = 7

KIND_NAMES = ("HostSend", "PacketAtSwitch", "PacketAtHost", "ControlToController",
              "ControlToSwitch", "LinkFail", "LinkRepair", "FeatureReplyTick")

# kinds that keep periodic ticks alive; pure control chatter does not
_DRIVERS = frozenset({HOST_SEND, AT_SWITCH, AT_HOST, LINK_FAIL, LINK_REPAIR})


class TimeTravelError(RafsimError):
    pass


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    ctrl_rtt: float = 0.5
    switch_proc: float = 0.05
    ctrl_proc: float = 0.0
    ctrl_msg_cost: float = 0.0
    ctrl_path_cost: float = 0.0
    tick_interval: float = 100.0
    horizon: float | None = None
    table_capacity: int = DEFAULT_CAPACITY
    port_status_notify: bool = False
    ttl: int = 64
    controller: ControllerConfig = field(default_factory=ControllerConfig)

    def __post_init__(self):
        for name in ("ctrl_rtt", "switch_proc", "ctrl_proc", "ctrl_msg_cost", "ctrl_path_cost"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.tick_interval <= 0:
            raise ValueError("tick_interval must be > 0")
        if self.table_capacity < 1:
            raise ValueError("table_capacity must be positive")
        if self.ttl < 1:
            raise ValueError("ttl must be positive")

    def with_controller(self, **changes) -> SimConfig:
        return dataclasses.replace(self, controller=dataclasses.replace(self.controller, **changes))


@dataclass(frozen=True)
class FlowSpec:
    src: str
    dst: str
    n_packets: int = 1
    payload: int = 62
    gap: float = 0.0
    start: float = 0.0
    nw_proto: int = 17

    def __post_init__(self):
        if self.n_packets < 1:
            raise ValueError("n_packets must be >= 1")
        if self.gap < 0:
            raise ValueError("gap must be >= 0")
        if self.payload <= 0:
            raise ValueError("payload must be > 0")
        if self.start < 0:
            raise ValueError("start must be >= 0")


@dataclass(frozen=True)
class LinkEvent:
    kind: str  # "fail" or "repair"
    link: str
    at: float
    jitter: float = 0.0


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    config: SimConfig = field(default_factory=SimConfig)
    acl: tuple[AclEntry, ...] = ()
    flows: tuple[FlowSpec, ...] = ()
    events: tuple[LinkEvent, ...] = ()


class Simulation:
    def __init__(self, topo: Topology, config: SimConfig = SimConfig(), acl=(),
                 scenario: str = "scenario", topology_name: str = "topology", trace: bool = False):
        self.topo = topo
        self.config = config
        self.scenario = scenario
        self.topology_name = topology_name
        self.rng = random.Random(config.seed)
        self.controller = Controller(topo, config.controller, acl)
        self.switches: dict[str, SwitchState] = {}
        for sw in topo.switches:
            ports = {}
            for p in topo.ports_of(sw):
                owner = topo.port_owner(sw, p)
                ports[p] = owner.up if isinstance(owner, Link) else True
            self.switches[sw] = SwitchState(sw, ports, config.table_capacity)
        self.now = 0.0
        self._queue: list = []
        self._seq = 0
        self._drivers = 0
        self._last_driver_time = 0.0
        self._ctrl_free_at = 0.0
        self._flow_ids = 0
        self.trace: list[tuple] | None = [] if trace else None
        self.report = MetricsReport(scenario=scenario, topology=topology_name,
                                    strategy=config.controller.strategy.value)
        self._peak = dict.fromkeys(self.switches, 0)
        self._wall = 0.0
        self._started = False

    # -- scheduling ------------------------------------------------------------

    def schedule(self, time: float, kind: int, payload=None) -> None:
        if time < self.now:
            raise TimeTravelError(f"cannot schedule {KIND_NAMES[kind]} at {time} before clock {self.now}")
        self._seq += 1
        heapq.heappush(self._queue, (time, self._seq, kind, payload))
        if kind in _DRIVERS:
            self._drivers += 1
            if kind != AT_SWITCH and kind != AT_HOST:
                self._last_driver_time = max(self._last_driver_time, time)

    def inject_flow(self, flow: FlowSpec) -> None:
        src = self.topo.host(flow.src)
        dst = self.topo.host(flow.dst)
        self._flow_ids += 1
        for i in range(flow.n_packets):
            t = flow.start + i * flow.gap
            pkt = Packet(src.address, dst.address, flow.payload, i, t, nw_proto=flow.nw_proto,
                         flow=self._flow_ids, ttl=self.config.ttl)
            self.schedule(t, HOST_SEND, (src, pkt))
        self.report.injected += flow.n_packets

    def inject_failure(self, link: str, at: float, jitter: float = 0.0) -> None:
        self.topo.link(link)
        if jitter > 0:
            at += self.rng.uniform(0.0, jitter)
        self.schedule(at, LINK_FAIL, link)

    def inject_repair(self, link: str, at: float, jitter: float = 0.0) -> None:
        self.topo.link(link)
        if jitter > 0:
            at += self.rng.uniform(0.0, jitter)
        self.schedule(at, LINK_REPAIR, link)

    # -- main loop ---------------------------------------------------------------

    def run(self) -> MetricsReport:
        if self._started:
            raise RafsimError("a Simulation can only be run once")
        self._started = True
        cfg = self.config
        horizon = cfg.horizon if cfg.horizon is not None else self._last_driver_time + HORIZON_SLACK

        self._controller_emit(self.controller.bootstrap(), 0.0, 0.0)
        if self._drivers:
            self.schedule(cfg.tick_interval, TICK)

        queue = self._queue
        handlers = (self._on_host_send, self._on_switch, self._on_host, self._on_to_controller,
                    self._on_to_switch, self._on_link_fail, self._on_link_repair, self._on_tick)
        events = 0
        while queue:
            if queue[0][0] > horizon:
                self.report.horizon_truncated = True
                break
            t, _seq, kind, payload = heapq.heappop(queue)
            self.now = t
            if kind in _DRIVERS:
                self._drivers -= 1
            if self.trace is not None:
                self.trace.append((t, KIND_NAMES[kind], _describe(payload)))
            handlers[kind](payload, horizon)
            events += 1

        return self._finish(events)

    # -- data plane ---------------------------------------------------------------

    def _on_host_send(self, payload, horizon) -> None:
        host, pkt = payload
        sw, port = host.attach
        self.schedule(self.now + host.delay, AT_SWITCH, (sw, pkt, port))

    def _on_switch(self, payload, horizon) -> None:
        sw_id, pkt, _in_port = payload
        pkt.ttl -= 1
        if pkt.ttl < 0:
            self._drop("ttl")
            return
        sw = self.switches[sw_id]
        action, rule = sw.select(pkt)
        if isinstance(action, Forward):
            sw.touch(rule, self.now)
            self._transmit(sw_id, action.port, pkt)
        elif isinstance(action, Drop):
            self._drop("acl")
        else:
            self.report.packet_ins += 1
            self.schedule(self.now + self.config.ctrl_rtt, TO_CONTROLLER, PacketIn(sw_id, pkt, action.reason))

    def _transmit(self, sw_id: str, port: int, pkt: Packet) -> None:
        if not self.switches[sw_id].ports.get(port, False):
            self._drop("dead_port")
            return
        owner = self.topo.port_owner(sw_id, port)
        depart = self.now + self.config.switch_proc
        if isinstance(owner, Link):
            peer, peer_port = owner.other_end(sw_id)
            self.schedule(depart + owner.delay, AT_SWITCH, (peer, pkt, peer_port))
        elif isinstance(owner, Host):
            self.schedule(depart + owner.delay, AT_HOST, (owner, pkt))
        else:
            self._drop("dead_port")

    def _on_host(self, payload, horizon) -> None:
        host, pkt = payload
        if host.address != pkt.dst:
            self._drop("misdelivered")
            return
        self.report.delivered += 1
        self.report.delays.append(self.now - pkt.created_at)

    def _drop(self, reason: str) -> None:
        self.report.dropped += 1
        self.report.drops[reason] += 1

    # -- control plane ------------------------------------------------------------

    def _to_controller(self, msg) -> None:
        self.schedule(self.now + self.config.ctrl_rtt, TO_CONTROLLER, msg)

    def _on_to_controller(self, msg, horizon) -> None:
        ctrl = self.controller
        before = ctrl.counters.candidates_ranked
        w0 = _time.perf_counter()
        out = ctrl.handle(msg)
        self._wall += _time.perf_counter() - w0
        if isinstance(msg, PacketIn) and not any(
                isinstance(m, PacketOut) and m.packet is msg.packet for m in out):
            inst = ctrl.installed.get(msg.packet.match())
            self._drop("acl" if inst is not None and inst.denied else "controller")
        work = self.config.ctrl_proc + self.config.ctrl_path_cost * (ctrl.counters.candidates_ranked - before)
        self._controller_emit(out, self.now, work)

    def _controller_emit(self, out, arrival: float, work: float) -> None:
        cfg = self.config
        start = max(arrival, self._ctrl_free_at)
        t = start + work
        for msg in out:
            t += cfg.ctrl_msg_cost
            self._count_outbound(msg)
            self.schedule(t + cfg.ctrl_rtt, TO_SWITCH, msg)
        self._ctrl_free_at = t

    def _count_outbound(self, msg) -> None:
        r = self.report
        if isinstance(msg, FlowModAdd):
            r.flow_mod_adds += 1
        elif isinstance(msg, FlowModDelete):
            r.flow_mod_deletes += 1
        elif isinstance(msg, PacketOut):
            r.packet_outs += 1
        elif isinstance(msg, (Hello, FeatureRequest)):
            r.bootstrap_msgs += 1

    def _on_to_switch(self, msg, horizon) -> None:
        sw = self.switches[msg.switch]
        if isinstance(msg, FlowModAdd):
            if sw.install_rule(msg.rule, self.now) is InstallResult.TABLE_FULL:
                self.report.table_full_events += 1
            elif len(sw) > self._peak[sw.id]:
                self._peak[sw.id] = len(sw)
        elif isinstance(msg, FlowModDelete):
            sw.remove_rules(cookie=msg.cookie, match=msg.match, priority=msg.priority)
        elif isinstance(msg, PacketOut):
            if msg.port is None:
                self._drop("no_route")
            else:
                self._transmit(sw.id, msg.port, msg.packet)
        elif isinstance(msg, FeatureRequest):
            self.report.bootstrap_msgs += 1
            self._to_controller(self._feature_reply(sw.id))
        # Hello needs no answer beyond the one already counted

    def _feature_reply(self, sw_id: str) -> FeatureReply:
        ports = self.switches[sw_id].ports
        reports = tuple(LinkReport(link_id, ports[port], self.topo.link(link_id).reliability)
                        for link_id, port, _peer in self.topo.neighbors(sw_id))
        return FeatureReply(sw_id, reports)

    def _on_tick(self, _payload, horizon) -> None:
        for sw_id, sw in self.switches.items():
            for rule in sw.sweep_timeouts(self.now):
                self.report.flow_removed_msgs += 1
                self._to_controller(FlowRemoved(sw_id, rule))
            self.report.feature_replies += 1
            self._to_controller(self._feature_reply(sw_id))
        nxt = self.now + self.config.tick_interval
        if self._drivers and nxt <= horizon:
            self.schedule(nxt, TICK)

    def _set_link(self, link_id: str, up: bool) -> None:
        link = self.topo.link(link_id)
        for sw_id, port in (link.end_a, link.end_b):
            notice = self.switches[sw_id].set_port_status(port, up)
            if self.config.port_status_notify:
                self.report.port_status_msgs += 1
                self._to_controller(PortStatusNotice(notice.switch, notice.port, notice.up))

    def _on_link_fail(self, link_id, horizon) -> None:
        self._set_link(link_id, False)

    def _on_link_repair(self, link_id, horizon) -> None:
        self._set_link(link_id, True)

    # -- wrap-up --------------------------------------------------------------------

    def _finish(self, events: int) -> MetricsReport:
        r = self.report
        c = self.controller.counters
        r.path_computations = c.path_computations
        r.candidates_ranked = c.candidates_ranked
        r.paths_installed = c.paths_installed
        r.in_flight = sum(1 for ev in self._queue if _carries_packet(ev[2], ev[3]))
        r.per_switch_rules = {sw: (self._peak[sw], len(state)) for sw, state in self.switches.items()}
        r.end_time = self.now
        r.events = events
        r.wall_ms = self._wall * 1000.0
        return r

    def check_invariants(self) -> list[str]:
        """Return human-readable violations of the run's bookkeeping invariants."""
        r, c = self.report, self.controller.counters
        problems = []
        if r.injected != r.delivered + r.dropped + r.in_flight:
            problems.append(f"conservation: injected {r.injected} != delivered {r.delivered} "
                            f"+ dropped {r.dropped} + in_flight {r.in_flight}")
        if len(r.delays) != r.delivered:
            problems.append("delay samples do not match delivered count")
        if r.flow_mods_sent != c.flow_mods:
            problems.append(f"flow-mods dispatched {r.flow_mods_sent} != controller count {c.flow_mods}")
        if r.packet_outs != c.packet_outs:
            problems.append(f"packet-outs dispatched {r.packet_outs} != controller count {c.packet_outs}")
        if sum(r.drops.values()) != r.dropped:
            problems.append("drop reasons do not add up")
        for sw, (peak, final) in r.per_switch_rules.items():
            if not final <= peak <= self.config.table_capacity:
                problems.append(f"{sw}: rule counts final {final} / peak {peak} out of order")
        return problems


def _carries_packet(kind: int, payload) -> bool:
    if kind in (HOST_SEND, AT_SWITCH, AT_HOST):
        return True
    return isinstance(payload, (PacketIn, PacketOut))


def _describe(payload) -> str:
    if payload is None:
        return ""
    if isinstance(payload, tuple):
        parts = []
        for p in payload:
            if isinstance(p, Host):
                parts.append(p.id)
            elif isinstance(p, Packet):
                parts.append(f"f{p.flow}#{p.seq}")
            else:
                parts.append(str(p))
        return " ".join(parts)
    if isinstance(payload, (PacketIn, PacketOut)):
        return f"{type(payload).__name__} {payload.switch} f{payload.packet.flow}#{payload.packet.seq}"
    return repr(payload)


def simulate(topo: Topology, scenario: Scenario, topology_name: str = "topology",
             trace: bool = False) -> Simulation:
    """Build a simulation for ``scenario``, run it and return it (report in ``.report``)."""
    sim = Simulation(topo, scenario.config, scenario.acl, scenario.name, topology_name, trace)
    for flow in scenario.flows:
        sim.inject_flow(flow)
    for ev in scenario.events:
        if ev.kind == "fail":
            sim.inject_failure(ev.link, ev.at, ev.jitter)
        else:
            sim.inject_repair(ev.link, ev.at, ev.jitter)
    sim.run()
    return sim


# -- scenario file ---------------------------------------------------------------------

_SECTIONS = {"config", "acl", "flows", "events"}

_SIM_KEYS = {
    "seed": int, "ctrl_rtt": float, "switch_proc": float, "ctrl_proc": float, "ctrl_msg_cost": float,
    "ctrl_path_cost": float, "tick": float, "horizon": float, "capacity": int, "port_status": bool,
    "ttl": int,
}
_SIM_FIELDS = {"tick": "tick_interval", "capacity": "table_capacity", "port_status": "port_status_notify"}
_CTRL_FIELDS = {"disjoint_alternates": "disjoint"}
_CTRL_KEYS = {
    "strategy": Strategy, "count_mode": CountMode, "path_rule": PathRule, "reliability_mode": ReliabilityMode,
    "window": int,
    "path_cap": int, "disjoint_alternates": bool, "idle_timeout": float, "hard_timeout": float,
}
_FLOW_KEYS = {"packets": ("n_packets", int), "payload": ("payload", int), "gap": ("gap", float),
              "start": ("start", float), "proto": ("nw_proto", int)}
_BOOL = {"on": True, "off": False, "true": True, "false": False, "yes": True, "no": False, "1": True, "0": False}


def _convert(kind, tok, what, source):
    if kind is int:
        return parse_int(tok, what, source)
    if kind is float:
        return parse_float(tok, what, source)
    if kind is bool:
        try:
            return _BOOL[tok.text.lower()]
        except KeyError:
            raise ParseError(f"{what}: expected on/off, got {tok.text!r}", tok.line, tok.column, source) from None
    return tok.text


def _address(tok, source) -> int | None:
    if tok.text == "any":
        return None
    try:
        return int(ipaddress.IPv4Address(tok.text))
    except ValueError:
        raise ParseError(f"bad address {tok.text!r}", tok.line, tok.column, source) from None


def parse_scenario(text: str, source: str | None = None, name: str | None = None) -> Scenario:
    """Parse a scenario file.  See README for the grammar; unknown keys are errors."""
    sim_kw: dict = {}
    ctrl_kw: dict = {}
    acl: list[AclEntry] = []
    flows: list[FlowSpec] = []
    events: list[LinkEvent] = []
    scenario_name = name

    for rec in iter_records(text, _SECTIONS, source):
        toks = rec.tokens
        if rec.section == "config":
            if len(toks) == 1:
                key, value = split_key_value(toks[0], source)
                vtok = Token(value, rec.line, toks[0].column + len(key) + 1)
            elif len(toks) == 3 and toks[1].text == "=":
                key, vtok = toks[0].text, toks[2]
            else:
                raise ParseError("config line must be 'key = value'", rec.line, toks[0].column, source)
            if key == "name":
                scenario_name = vtok.text
            elif key in _SIM_KEYS:
                sim_kw[_SIM_FIELDS.get(key, key)] = _convert(_SIM_KEYS[key], vtok, key, source)
            elif key in _CTRL_KEYS:
                kind = _CTRL_KEYS[key]
                if isinstance(kind, type) and issubclass(kind, enum.Enum):
                    choices = [m.value for m in kind]
                    if vtok.text not in choices:
                        raise ParseError(f"{key}: expected one of {', '.join(choices)}, got {vtok.text!r}",
                                         vtok.line, vtok.column, source)
                    ctrl_kw[key] = kind(vtok.text)
                else:
                    ctrl_kw[_CTRL_FIELDS.get(key, key)] = _convert(kind, vtok, key, source)
            else:
                raise ParseError(f"unknown config key {key!r}", rec.line, toks[0].column, source)
        elif rec.section == "acl":
            if len(toks) != 4 or toks[0].text not in ("allow", "deny"):
                raise ParseError("acl line must be: allow|deny src dst proto", rec.line, toks[0].column, source)
            proto = None if toks[3].text == "any" else parse_int(toks[3], "proto", source)
            acl.append(AclEntry(_address(toks[1], source), _address(toks[2], source), proto,
                                toks[0].text == "allow"))
        elif rec.section == "flows":
            if len(toks) < 2 or "=" in toks[0].text or "=" in toks[1].text:
                raise ParseError("flow line must be: src_host dst_host [key=value ...]",
                                 rec.line, toks[0].column, source)
            kw = {}
            for tok in toks[2:]:
                key, value = split_key_value(tok, source)
                if key not in _FLOW_KEYS:
                    raise ParseError(f"unknown flow key {key!r}", tok.line, tok.column, source)
                field_name, kind = _FLOW_KEYS[key]
                vt = type(tok)(value, tok.line, tok.column + len(key) + 1)
                kw[field_name] = _convert(kind, vt, key, source)
            try:
                flows.append(FlowSpec(toks[0].text, toks[1].text, **kw))
            except ValueError as exc:
                raise ParseError(str(exc), rec.line, toks[0].column, source) from None
        else:
            if len(toks) < 3 or toks[0].text not in ("fail", "repair"):
                raise ParseError("event line must be: fail|repair link at=ms [jitter=ms]",
                                 rec.line, toks[0].column, source)
            kw = {}
            for tok in toks[2:]:
                key, value = split_key_value(tok, source)
                if key not in ("at", "jitter"):
                    raise ParseError(f"unknown event key {key!r}", tok.line, tok.column, source)
                kw[key] = parse_float(type(tok)(value, tok.line, tok.column + len(key) + 1), key, source)
            if "at" not in kw:
                raise ParseError("event needs at=ms", rec.line, toks[0].column, source)
            if kw["at"] < 0 or kw.get("jitter", 0.0) < 0:
                raise ParseError("event times must be >= 0", rec.line, toks[0].column, source)
            events.append(LinkEvent(toks[0].text, toks[1].text, kw["at"], kw.get("jitter", 0.0)))

    try:
        config = SimConfig(controller=ControllerConfig(**ctrl_kw), **sim_kw)
    except ValueError as exc:
        raise InputError(f"{source or 'scenario'}: {exc}") from None
    return Scenario(scenario_name or "scenario", config, tuple(acl), tuple(flows), tuple(events))


def validate_scenario(topo: Topology, scenario: Scenario) -> None:
    """Check that every host and link a scenario names exists in ``topo``."""
    for flow in scenario.flows:
        topo.host(flow.src)
        topo.host(flow.dst)
    for ev in scenario.events:
        topo.link(ev.link)


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read(), source=str(path))

