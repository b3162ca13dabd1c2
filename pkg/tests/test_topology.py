import pytest
from hypothesis import given, settings, strategies as st

from rafsim.errors import InputError
from rafsim.topology import (DanglingEndpointError, DuplicateIdError, Host, Link, NegativeDelayError,
                             PortCollisionError, ReliabilityRangeError, ReservedPortError, SelfLoopError,
                             Topology, UnknownAddressError, UnknownLinkError, UnknownSwitchError,
                             host_lookup, neighbors, parse_topology, render_topology)
from rafsim._text import ParseError

from conftest import random_topology

SMALL = """
# two switches
[switches]
s1 s2
[hosts]
a 10.0.0.1 s1:1
b 10.0.0.2 s2:1 0.25
[links]
s1-s2 s1:2 s2:2 0.9 1.5
"""


def test_parse_small():
    t = parse_topology(SMALL)
    assert t.switches == ("s1", "s2")
    assert t.link("s1-s2").reliability == 0.9
    assert t.link("s1-s2").delay == 1.5
    assert t.link("s1-s2").up
    assert t.host("b").delay == 0.25
    assert t.host("a").delay == 0.0
    assert host_lookup(t, "10.0.0.2").id == "b"
    assert host_lookup(t, 0x0A000001).id == "a"


def test_neighbors_sorted_by_port():
    t = parse_topology("""
[switches]
s1 s2 s3
[links]
x s1:7 s2:1 0.9 1
y s1:3 s3:1 0.9 1
""")
    assert neighbors(t, "s1") == (("y", 3, "s3"), ("x", 7, "s2"))
    with pytest.raises(UnknownSwitchError):
        neighbors(t, "s9")


def test_neighbors_includes_down_links():
    t = parse_topology(SMALL).with_link_status("s1-s2", False)
    assert neighbors(t, "s1") == (("s1-s2", 2, "s2"),)
    assert not t.link("s1-s2").up


def test_unknown_lookups():
    t = parse_topology(SMALL)
    with pytest.raises(UnknownAddressError):
        host_lookup(t, "10.9.9.9")
    with pytest.raises(UnknownLinkError):
        t.link("nope")


@pytest.mark.parametrize("text, exc, line", [
    ("[switches]\ns1 s1\n", DuplicateIdError, 2),
    ("[switches]\ns1 s2\n[links]\nl s1:1 s2:1 1.2 1\n", ReliabilityRangeError, 4),
    ("[switches]\ns1 s2\n[links]\nl s1:1 s2:1 -0.1 1\n", ReliabilityRangeError, 4),
    ("[switches]\ns1 s2\n[links]\nl s1:1 s2:1 0.5 -1\n", NegativeDelayError, 4),
    ("[switches]\ns1\n[links]\nl s1:1 s9:1 0.5 1\n", DanglingEndpointError, 4),
    ("[switches]\ns1 s2\n[links]\nl s1:1 s2:1 0.5 1\nm s1:1 s2:2 0.5 1\n", PortCollisionError, 5),
    ("[switches]\ns1\n[links]\nl s1:1 s1:2 0.5 1\n", SelfLoopError, 4),
    ("[switches]\ns1 s2\n[links]\nl s1:0 s2:1 0.5 1\n", ReservedPortError, 4),
    ("[switches]\ns1\n[hosts]\nh 10.0.0.1 s1:1\nk 10.0.0.1 s1:2\n", DuplicateIdError, 5),
    ("[switches]\ns1\n[hosts]\nh 10.0.0.1 s1:1 -2\n", NegativeDelayError, 4),
])
def test_validation_errors_carry_location(text, exc, line):
    with pytest.raises(exc) as info:
        parse_topology(text, "t.topo")
    assert isinstance(info.value, InputError)
    assert f"t.topo:{line}" in str(info.value)


@pytest.mark.parametrize("text", [
    "[bogus]\nx\n",
    "s1 s2\n",
    "[switches]\ns1 s2\n[links]\nl s1:1 s2:1 abc 1\n",
    "[switches]\ns1 s2\n[links]\nl s1:1 s2:1 nan 1\n",
    "[switches]\ns1 s2\n[links]\nl s1 s2:1 0.5 1\n",
    "[switches]\ns1 s2\n[links]\nl s1:1 s2:1 0.5\n",
    "[switches]\ns1\n[hosts]\nh 999.0.0.1 s1:1\n",
])
def test_syntax_errors(text):
    with pytest.raises(ParseError) as info:
        parse_topology(text, "t.topo")
    assert info.value.line >= 1


def test_render_round_trip_bundled(mesh8, reference9):
    for t in (mesh8, reference9, mesh8.with_link_status("s1-s4", False)):
        again = parse_topology(render_topology(t))
        assert again == t
        assert render_topology(again) == render_topology(t)


def test_bundled_reference_shapes(mesh8, reference9):
    assert len(mesh8.switches) == 8
    assert len(reference9.switches) == 9
    assert len(reference9.hosts) == 25


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 9), st.floats(0.1, 0.9), st.floats(0, 0.3))
def test_round_trip_and_degree_sum(seed, n, p, parallel):
    import random
    t = random_topology(random.Random(seed), n, p, parallel)
    assert parse_topology(render_topology(t)) == t
    # every link shows up once from each end
    assert sum(len(t.neighbors(s)) for s in t.switches) == 2 * len(t.links)
    for s in t.switches:
        for link_id, port, peer in t.neighbors(s):
            assert t.port_owner(s, port).id == link_id
            assert t.link(link_id).other_end(s)[0] == peer


def test_replace_link_revalidates():
    t = parse_topology(SMALL)
    assert t.replace_link("s1-s2", reliability=0.5).link("s1-s2").reliability == 0.5
    with pytest.raises(ReliabilityRangeError):
        t.replace_link("s1-s2", reliability=2.0)


def test_direct_construction_rejects_bad_input():
    with pytest.raises(DanglingEndpointError):
        Topology(("s1",), (Host("h", 1, ("s2", 1)),))
    with pytest.raises(DuplicateIdError):
        Topology(("s1", "s2"), (), (Link("l", ("s1", 1), ("s2", 1), 1, 0),
                                    Link("l", ("s1", 2), ("s2", 2), 1, 0)))
