import pytest

from rafsim.controller import (PRIMARY_PRIORITY, AclEntry, Controller, ControllerConfig, FeatureReply,
                               FeatureRequest, FlowModAdd, FlowModDelete, FlowRemoved, Hello, LinkReport,
                               PacketIn, PacketOut, PortStatusNotice, acl_allows)
from rafsim.dataplane import DROP, Forward, FlowRule, Packet, SwitchState
from rafsim.errors import ProtocolError
from rafsim.pathfinder import enumerate_simple_paths
from rafsim.topology import UnknownAddressError

A, B = 0x0A000001, 0x0A000002


def packet_in(switch="s1", src=A, dst=B, proto=17):
    return PacketIn(switch, Packet(src, dst, nw_proto=proto))


def ready(topo, **cfg):
    ctrl = Controller(topo, ControllerConfig(**cfg))
    ctrl.bootstrap()
    for sw in topo.switches:
        ctrl.handle(full_reply(topo, sw))
    return ctrl


def full_reply(topo, sw, down=()):
    return FeatureReply(sw, tuple(LinkReport(l, topo.link(l).up and l not in down, topo.link(l).reliability)
                                  for l, _, _ in topo.neighbors(sw)))


def adds(msgs):
    return [m for m in msgs if isinstance(m, FlowModAdd)]


def test_bootstrap_counts(reference9, mesh8):
    ctrl = Controller(reference9)
    out = ctrl.bootstrap()
    assert len(out) == 18
    assert [type(m) for m in out[:2]] == [Hello, FeatureRequest]
    assert not ctrl.bootstrapped
    for sw in reference9.switches:
        ctrl.handle(full_reply(reference9, sw))
    assert ctrl.bootstrapped
    assert ctrl.counters.bootstrap_msgs == 27
    assert ctrl.counters.feature_replies == 0
    # a later reply is periodic, not bootstrap
    ctrl.handle(full_reply(reference9, "s1"))
    assert ctrl.counters.bootstrap_msgs == 27 and ctrl.counters.feature_replies == 1


def test_single_switch_bootstrap():
    from rafsim.topology import Topology
    t = Topology(("s1",))
    ctrl = Controller(t)
    ctrl.bootstrap()
    ctrl.handle(FeatureReply("s1"))
    assert ctrl.counters.bootstrap_msgs == 3


def test_protocol_errors(mesh8):
    ctrl = Controller(mesh8)
    ctrl.bootstrap()
    with pytest.raises(ProtocolError):
        ctrl.handle(FeatureReply("s99"))
    with pytest.raises(ProtocolError):
        ctrl.handle(FeatureReply("s1", (LinkReport("nope", True, 1.0),)))
    with pytest.raises(ProtocolError):
        ctrl.handle(Hello("s1"))


def test_feature_reply_observations(mesh8):
    ctrl = ready(mesh8, reliability_mode="estimated", window=4)
    assert ctrl.link_reliability("s1-s2") == 1.0
    ctrl.handle(full_reply(mesh8, "s1", down=("s1-s2",)))
    # s1 and s2 each reported up once during bootstrap, then one down: 2 up / 3
    assert ctrl.link_reliability("s1-s2") == pytest.approx(2 / 3)
    assert not ctrl.view.link("s1-s2").up
    ctrl.handle(full_reply(mesh8, "s1"))
    assert ctrl.view.link("s1-s2").up
    assert ctrl.link_reliability("s1-s2") == pytest.approx(3 / 4)
    # s4 has four links -> four observations
    before = {l: len(ctrl.estimator.windows[l].samples) for l, _, _ in mesh8.neighbors("s4")}
    ctrl.handle(full_reply(mesh8, "s4"))
    assert all(len(ctrl.estimator.windows[l].samples) == min(4, n + 1) for l, n in before.items())


def test_raf_single_path_install(mesh8):
    ctrl = ready(mesh8)
    out = ctrl.handle(packet_in())
    assert [type(m) for m in out] == [FlowModAdd] * 3 + [PacketOut]
    # destination first
    assert [m.switch for m in adds(out)] == ["s8", "s4", "s1"]
    assert {m.rule.priority for m in adds(out)} == {PRIMARY_PRIORITY}
    assert out[-1] == PacketOut("s1", out[-1].packet, mesh8.link("s1-s4").port_on("s1"))
    assert adds(out)[0].rule.action == Forward(mesh8.host("hB").attach[1])
    c = ctrl.counters
    assert (c.path_computations, c.candidates_ranked, c.flow_mod_adds, c.packet_outs) == (1, 10, 3, 1)


def test_all_paths_install_matches_enumeration(mesh8):
    ctrl = ready(mesh8, strategy="all-paths")
    out = ctrl.handle(packet_in())
    paths, _ = enumerate_simple_paths(mesh8, "s1", "s8")
    total_hops = sum(p.hop_count for p in paths)
    assert total_hops == 57
    assert len(adds(out)) == total_hops
    assert isinstance(out[-1], PacketOut) and len(out) == total_hops + 1
    prios = sorted({m.rule.priority for m in adds(out)}, reverse=True)
    assert prios == [1000 - 10 * i for i in range(10)]


def test_reverse_install_order_per_path(mesh8):
    ctrl = ready(mesh8, strategy="all-paths")
    out = adds(ctrl.handle(packet_in()))
    inst = ctrl.installed[packet_in().packet.match()]
    for prio, rp in inst.live:
        seq = [m.switch for m in out if m.rule.priority == prio]
        assert seq == list(reversed(rp.path.nodes))


def test_cookie_discipline_and_uninstall(mesh8):
    ctrl = ready(mesh8, strategy="all-paths")
    out = ctrl.handle(packet_in())
    key = packet_in().packet.match()
    cookie = ctrl.installed[key].cookie
    assert {m.rule.cookie for m in adds(out)} == {cookie}
    switches = {sw: SwitchState(sw, {p: True for p in mesh8.ports_of(sw)}) for sw in mesh8.switches}
    for m in adds(out):
        switches[m.switch].install_rule(m.rule)
    for m in ctrl.uninstall(key):
        assert isinstance(m, FlowModDelete) and m.cookie == cookie
        switches[m.switch].remove_rules(cookie=m.cookie)
    assert all(len(s) == 0 for s in switches.values())
    assert key not in ctrl.installed


def test_second_packet_in_for_same_key_only_releases(mesh8):
    ctrl = ready(mesh8)
    ctrl.handle(packet_in())
    out = ctrl.handle(packet_in())
    assert [type(m) for m in out] == [PacketOut]
    assert ctrl.counters.path_computations == 1


def test_acl_deny(mesh8):
    ctrl = Controller(mesh8, acl=[AclEntry(A, B, 17, allow=False)])
    out = ctrl.handle(packet_in())
    assert out == [FlowModAdd("s1", FlowRule(packet_in().packet.match(), PRIMARY_PRIORITY, DROP, out[0].rule.cookie))]
    assert ctrl.counters.path_computations == 0
    assert ctrl.handle(packet_in()) == []
    # other protocols are not covered by the deny entry
    out = ctrl.handle(packet_in(proto=6))
    assert isinstance(out[-1], PacketOut)
    assert all(isinstance(m.rule.action, Forward) for m in adds(out))


def test_acl_first_match():
    key = Packet(A, B).match()
    assert acl_allows([], key)
    assert not acl_allows([AclEntry(src=A, allow=False), AclEntry(allow=True)], key)
    assert acl_allows([AclEntry(dst=B, nw_proto=6, allow=False)], key)
    assert acl_allows([AclEntry(src=A, allow=True), AclEntry(allow=False)], key)


def test_no_path_discards(mesh8):
    cut = mesh8.with_link_status("s4-s8", False).with_link_status("s7-s8", False)
    ctrl = ready(cut)
    out = ctrl.handle(packet_in())
    assert out == [PacketOut("s1", out[0].packet, None)]
    assert ctrl.counters.no_path == 1


def test_unknown_host(mesh8):
    with pytest.raises(UnknownAddressError):
        ready(mesh8).handle(packet_in(dst=0x0B000001))


def test_protection_no_recompute(mesh8):
    topo = mesh8.replace_link("s1-s4", reliability=0.90)
    ctrl = ready(topo)
    ctrl.handle(packet_in())
    key = packet_in().packet.match()
    assert len(ctrl.installed[key].live) == 2
    out = ctrl.handle_link_failure("s2-s4")  # shared by alternate only, primary survives
    assert ctrl.counters.path_computations == 1
    assert all(isinstance(m, FlowModDelete) and m.priority == 990 for m in out)
    assert [m.switch for m in out] == ["s1", "s2", "s4", "s8"]
    assert len(ctrl.installed[key].live) == 1


def test_protection_primary_only_link(mesh8):
    topo = mesh8.replace_link("s1-s4", reliability=0.90)
    ctrl = ready(topo)
    ctrl.handle(packet_in())
    out = ctrl.handle(full_reply(topo, "s1", down=("s1-s4",)))
    assert ctrl.counters.path_computations == 1
    assert {m.priority for m in out} == {1000} and all(isinstance(m, FlowModDelete) for m in out)


def test_restoration_recomputes_once(mesh8):
    ctrl = ready(mesh8)
    ctrl.handle(packet_in())
    out = ctrl.handle(PortStatusNotice("s1", mesh8.link("s1-s4").port_on("s1"), False))
    assert ctrl.counters.path_computations == 2
    assert ctrl.counters.port_status == 1
    deletes = [m for m in out if isinstance(m, FlowModDelete)]
    assert len(deletes) == 3
    new = adds(out)
    assert new and all("s1-s4" not in rp.path.links for _, rp in ctrl.installed[packet_in().packet.match()].live)
    # repeated news of the same failure changes nothing
    assert ctrl.handle_link_failure("s1-s4") == []


def test_failure_on_unused_link(mesh8):
    ctrl = ready(mesh8)
    ctrl.handle(packet_in())
    assert ctrl.handle_link_failure("s5-s6") == []
    assert ctrl.counters.path_computations == 1


def test_failure_leaving_no_path_forgets_flow(mesh8):
    ctrl = ready(mesh8)
    ctrl.handle(packet_in())
    ctrl.handle_link_failure("s7-s8")
    ctrl.handle_link_failure("s4-s8")
    assert packet_in().packet.match() not in ctrl.installed


def test_flow_removed_bookkeeping(mesh8):
    ctrl = ready(mesh8)
    out = ctrl.handle(packet_in())
    rule = adds(out)[-1].rule
    ctrl.handle(FlowRemoved("s1", rule))
    assert rule.match not in ctrl.installed
    assert ctrl.counters.flow_removed == 1
    assert len(adds(ctrl.handle(packet_in()))) == 3


def test_priorities_stay_non_negative():
    from rafsim.topology import Host, Link, Topology
    # 2 switches joined by 150 parallel links
    links = tuple(Link(f"l{i}", ("s1", 10 + i), ("s2", 10 + i), 0.4, 1.0) for i in range(150))
    hosts = (Host("a", A, ("s1", 1)), Host("b", B, ("s2", 1)))
    ctrl = ready(Topology(("s1", "s2"), hosts, links), strategy="all-paths")
    out = adds(ctrl.handle(packet_in()))
    prios = {m.rule.priority for m in out}
    assert len(prios) == 150 and min(prios) >= 0
