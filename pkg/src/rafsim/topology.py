"""Static network description: switches, hosts and reliability-weighted links.

File format (see README for the full grammar)::

    [switches]
    s1 s2 s3
    [hosts]
    # id  address   attach  [delay_ms]
    h1    10.0.0.1  s1:1    0.5
    [links]
    # id  end_a  end_b  reliability  delay_ms  [up|down]
    l12   s1:2   s2:1   0.95         1.0

Port 0 is the out-of-band controller channel and never appears in the file.
"""

from __future__ import annotations

import dataclasses
import ipaddress
from dataclasses import dataclass, field

from ._text import ParseError, Token, iter_records, parse_float
from .errors import InputError

CONTROLLER_PORT = 0


class TopologyError(InputError):
    """Invalid topology content.  ``item`` names the offending id when known."""

    def __init__(self, message: str, item: str | None = None):
        self.item = item
        super().__init__(message)


class DuplicateIdError(TopologyError):
    pass


class ReliabilityRangeError(TopologyError):
    pass


class NegativeDelayError(TopologyError):
    pass


class DanglingEndpointError(TopologyError):
    pass


class PortCollisionError(TopologyError):
    pass


class SelfLoopError(TopologyError):
    pass


class ReservedPortError(TopologyError):
    pass


class UnknownSwitchError(TopologyError):
    pass


class UnknownLinkError(TopologyError):
    pass


class UnknownHostError(TopologyError):
    pass


class UnknownAddressError(TopologyError):
    pass


@dataclass(frozen=True)
class Link:
    id: str
    end_a: tuple[str, int]
    end_b: tuple[str, int]
    reliability: float
    delay: float
    up: bool = True

    def other_end(self, switch: str) -> tuple[str, int]:
        if self.end_a[0] == switch:
            return self.end_b
        if self.end_b[0] == switch:
            return self.end_a
        raise UnknownSwitchError(f"link {self.id} is not incident to {switch}", switch)

    def port_on(self, switch: str) -> int:
        if self.end_a[0] == switch:
            return self.end_a[1]
        if self.end_b[0] == switch:
            return self.end_b[1]
        raise UnknownSwitchError(f"link {self.id} is not incident to {switch}", switch)


@dataclass(frozen=True)
class Host:
    id: str
    address: int
    attach: tuple[str, int]
    delay: float = 0.0

    @property
    def ip(self) -> str:
        return str(ipaddress.IPv4Address(self.address))


@dataclass(frozen=True)
class Topology:
    switches: tuple[str, ...]
    hosts: tuple[Host, ...] = ()
    links: tuple[Link, ...] = ()

    _links_by_id: dict = field(init=False, repr=False, compare=False)
    _hosts_by_id: dict = field(init=False, repr=False, compare=False)
    _hosts_by_addr: dict = field(init=False, repr=False, compare=False)
    _adjacency: dict = field(init=False, repr=False, compare=False)
    _ports: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "switches", tuple(self.switches))
        object.__setattr__(self, "hosts", tuple(self.hosts))
        object.__setattr__(self, "links", tuple(self.links))

        declared: set[str] = set()
        for s in self.switches:
            if s in declared:
                raise DuplicateIdError(f"duplicate switch id {s!r}", s)
            declared.add(s)

        ports: dict[tuple[str, int], Link | Host] = {}

        def claim(end: tuple[str, int], owner: Link | Host) -> None:
            sw, port = end
            if sw not in declared:
                raise DanglingEndpointError(f"{owner.id}: endpoint names undeclared switch {sw!r}", owner.id)
            if port == CONTROLLER_PORT:
                raise ReservedPortError(f"{owner.id}: port 0 is reserved for the controller channel", owner.id)
            if port < 0:
                raise ReservedPortError(f"{owner.id}: negative port {port}", owner.id)
            if end in ports:
                raise PortCollisionError(
                    f"{owner.id}: port collision on {sw}:{port} (already used by {ports[end].id})", owner.id)
            ports[end] = owner

        links_by_id: dict[str, Link] = {}
        adjacency: dict[str, list[tuple[str, int, str]]] = {s: [] for s in self.switches}
        for link in self.links:
            if link.id in links_by_id:
                raise DuplicateIdError(f"duplicate link id {link.id!r}", link.id)
            if not 0.0 <= link.reliability <= 1.0:
                raise ReliabilityRangeError(
                    f"{link.id}: reliability outside [0,1] ({link.reliability})", link.id)
            if link.delay < 0:
                raise NegativeDelayError(f"{link.id}: negative delay ({link.delay})", link.id)
            if link.end_a[0] == link.end_b[0]:
                raise SelfLoopError(f"{link.id}: self-loop on {link.end_a[0]}", link.id)
            claim(link.end_a, link)
            claim(link.end_b, link)
            links_by_id[link.id] = link
            adjacency[link.end_a[0]].append((link.id, link.end_a[1], link.end_b[0]))
            adjacency[link.end_b[0]].append((link.id, link.end_b[1], link.end_a[0]))

        hosts_by_id: dict[str, Host] = {}
        hosts_by_addr: dict[int, Host] = {}
        for host in self.hosts:
            if host.id in hosts_by_id:
                raise DuplicateIdError(f"duplicate host id {host.id!r}", host.id)
            if host.address in hosts_by_addr:
                raise DuplicateIdError(
                    f"{host.id}: duplicate address {host.ip} (already {hosts_by_addr[host.address].id})", host.id)
            if not 0 <= host.address < 2**32:
                raise TopologyError(f"{host.id}: address out of 32-bit range", host.id)
            if host.delay < 0:
                raise NegativeDelayError(f"{host.id}: negative delay ({host.delay})", host.id)
            claim(host.attach, host)
            hosts_by_id[host.id] = host
            hosts_by_addr[host.address] = host

        for entries in adjacency.values():
            entries.sort(key=lambda e: e[1])

        object.__setattr__(self, "_links_by_id", links_by_id)
        object.__setattr__(self, "_hosts_by_id", hosts_by_id)
        object.__setattr__(self, "_hosts_by_addr", hosts_by_addr)
        object.__setattr__(self, "_adjacency", {s: tuple(v) for s, v in adjacency.items()})
        object.__setattr__(self, "_ports", ports)

    def link(self, link_id: str) -> Link:
        try:
            return self._links_by_id[link_id]
        except KeyError:
            raise UnknownLinkError(f"unknown link {link_id!r}", link_id) from None

    def host(self, host_id: str) -> Host:
        try:
            return self._hosts_by_id[host_id]
        except KeyError:
            raise UnknownHostError(f"unknown host {host_id!r}", host_id) from None

    def host_lookup(self, address: int | str) -> Host:
        """Resolve a network address (int or dotted quad) to its host."""
        key = int(ipaddress.IPv4Address(address))
        try:
            return self._hosts_by_addr[key]
        except KeyError:
            raise UnknownAddressError(f"unknown address {ipaddress.IPv4Address(key)}", str(address)) from None

    def neighbors(self, switch: str) -> tuple[tuple[str, int, str], ...]:
        """``(link_id, egress_port, peer_switch)`` for every incident link, sorted by port.

        Link status is ignored; callers filter down links themselves.
        """
        try:
            return self._adjacency[switch]
        except KeyError:
            raise UnknownSwitchError(f"unknown switch {switch!r}", switch) from None

    def has_switch(self, switch: str) -> bool:
        return switch in self._adjacency

    def port_owner(self, switch: str, port: int) -> Link | Host | None:
        return self._ports.get((switch, port))

    def ports_of(self, switch: str) -> list[int]:
        if switch not in self._adjacency:
            raise UnknownSwitchError(f"unknown switch {switch!r}", switch)
        return sorted(p for (s, p) in self._ports if s == switch)

    def hosts_on(self, switch: str) -> list[Host]:
        return [h for h in self.hosts if h.attach[0] == switch]

    def replace_link(self, link_id: str, **changes) -> Topology:
        """Return a copy with one link's fields changed (e.g. ``up=False``)."""
        old = self.link(link_id)
        new = dataclasses.replace(old, **changes)
        return dataclasses.replace(self, links=tuple(new if l.id == link_id else l for l in self.links))

    def with_link_status(self, link_id: str, up: bool) -> Topology:
        if self.link(link_id).up == up:
            return self
        return self.replace_link(link_id, up=up)


def neighbors(topo: Topology, switch: str):
    return topo.neighbors(switch)


def host_lookup(topo: Topology, address: int | str) -> Host:
    return topo.host_lookup(address)


_SECTIONS = {"switches", "hosts", "links"}


def _endpoint(tok: Token, source: str | None) -> tuple[str, int]:
    sw, sep, port = tok.text.rpartition(":")
    if not sep or not sw:
        raise ParseError(f"expected switch:port, got {tok.text!r}", tok.line, tok.column, source)
    try:
        return sw, int(port)
    except ValueError:
        raise ParseError(f"bad port number {port!r}", tok.line, tok.column + len(sw) + 1, source) from None


def parse_topology(text: str, source: str | None = None) -> Topology:
    """Parse topology-file contents.

    Syntax problems raise :class:`ParseError` (line/column); content problems
    raise the specific :class:`TopologyError` subclass with the line prefixed.
    """
    switches: list[str] = []
    hosts: list[Host] = []
    links: list[Link] = []
    lines: dict[str, int] = {}

    for rec in iter_records(text, _SECTIONS, source):
        toks = rec.tokens
        if rec.section == "switches":
            for tok in toks:
                switches.append(tok.text)
                lines.setdefault(tok.text, rec.line)
        elif rec.section == "hosts":
            if len(toks) not in (3, 4):
                bad = toks[min(len(toks), 4) - 1] if len(toks) > 4 else toks[-1]
                raise ParseError("host record needs: id address switch:port [delay_ms]",
                                 rec.line, bad.column, source)
            try:
                addr = int(ipaddress.IPv4Address(toks[1].text))
            except ValueError:
                raise ParseError(f"bad IPv4 address {toks[1].text!r}", rec.line, toks[1].column, source) from None
            delay = parse_float(toks[3], "host delay", source) if len(toks) == 4 else 0.0
            hosts.append(Host(toks[0].text, addr, _endpoint(toks[2], source), delay))
            lines.setdefault(toks[0].text, rec.line)
        else:
            if len(toks) not in (5, 6):
                raise ParseError("link record needs: id switch:port switch:port reliability delay_ms [up|down]",
                                 rec.line, toks[-1].column, source)
            up = True
            if len(toks) == 6:
                if toks[5].text not in ("up", "down"):
                    raise ParseError(f"link status must be up or down, got {toks[5].text!r}",
                                     rec.line, toks[5].column, source)
                up = toks[5].text == "up"
            links.append(Link(
                toks[0].text,
                _endpoint(toks[1], source),
                _endpoint(toks[2], source),
                parse_float(toks[3], "reliability", source),
                parse_float(toks[4], "delay", source),
                up,
            ))
            lines.setdefault(toks[0].text, rec.line)

    try:
        return Topology(tuple(switches), tuple(hosts), tuple(links))
    except TopologyError as exc:
        line = lines.get(exc.item) if exc.item else None
        if line is not None:
            where = f"{source}:{line}" if source else f"line {line}"
            exc.args = (f"{where}: {exc.args[0]}",)
            exc.line = line
        raise


def _fmt(x: float) -> str:
    return repr(float(x))


def render_topology(topo: Topology) -> str:
    """Inverse of :func:`parse_topology`."""
    out = ["[switches]"]
    out.extend(topo.switches)
    out.append("[hosts]")
    for h in topo.hosts:
        out.append(f"{h.id} {h.ip} {h.attach[0]}:{h.attach[1]} {_fmt(h.delay)}")
    out.append("[links]")
    for l in topo.links:
        line = f"{l.id} {l.end_a[0]}:{l.end_a[1]} {l.end_b[0]}:{l.end_b[1]} {_fmt(l.reliability)} {_fmt(l.delay)}"
        if not l.up:
            line += " down"
        out.append(line)
    return "\n".join(out) + "\n"


def load_topology(path) -> Topology:
    with open(path, encoding="utf-8") as fh:
        return parse_topology(fh.read(), source=str(path))

