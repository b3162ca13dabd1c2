import random
from importlib import resources

import pytest

from rafsim.topology import Host, Link, Topology, parse_topology
from rafsim.engine import parse_scenario


def bundled(name: str) -> str:
    return (resources.files("rafsim") / "data" / name).read_text(encoding="utf-8")


def bundled_topology(stem: str) -> Topology:
    return parse_topology(bundled(f"{stem}.topo"), f"{stem}.topo")


def bundled_scenario(stem: str):
    return parse_scenario(bundled(f"{stem}.scn"), f"{stem}.scn")


def random_topology(rng: random.Random, n_switches: int, p_edge: float, parallel: float = 0.0) -> Topology:
    """Random switch graph; ports handed out sequentially from 10 upward."""
    switches = [f"s{i}" for i in range(1, n_switches + 1)]
    next_port = dict.fromkeys(switches, 10)
    links = []

    def add(a, b):
        links.append(Link(f"l{len(links)}", (a, next_port[a]), (b, next_port[b]),
                          round(rng.uniform(0.3, 1.0), 3), 1.0))
        next_port[a] += 1
        next_port[b] += 1

    for i, a in enumerate(switches):
        for b in switches[i + 1:]:
            if rng.random() < p_edge:
                add(a, b)
                if rng.random() < parallel:
                    add(a, b)
    hosts = [Host("hsrc", 0x0A000001, (switches[0], 1)), Host("hdst", 0x0A000002, (switches[-1], 1))]
    return Topology(tuple(switches), tuple(hosts), tuple(links))


def line_topology(n: int, link_delay: float = 1.0, host_delay: float = 1.0, rel: float = 0.99) -> Topology:
    """s1 - s2 - ... - sn with host a on s1 and host b on sn."""
    switches = tuple(f"s{i}" for i in range(1, n + 1))
    links = tuple(Link(f"s{i}-s{i + 1}", (f"s{i}", 3), (f"s{i + 1}", 2), rel, link_delay)
                  for i in range(1, n))
    hosts = (Host("a", 0x0A000001, ("s1", 1), host_delay), Host("b", 0x0A000002, (f"s{n}", 1), host_delay))
    return Topology(switches, hosts, links)


@pytest.fixture
def mesh8():
    return bundled_topology("mesh8")


@pytest.fixture
def reference9():
    return bundled_topology("reference9")


# -- acceptance summary: one line per criterion at the end of the run -------------

_criteria: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call" or report.failed:
        detail = dict(report.user_properties).get("detail", "")
        prev = _criteria.get(name)
        if prev is None or prev[0] == "PASS":
            _criteria[name] = ("PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_criteria, key=lambda n: int(n.split("_")[2])):
        status, detail = _criteria[name]
        terminalreporter.write_line(f"{status}  {name}  {detail}".rstrip())
