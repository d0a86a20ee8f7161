import pytest

from mmgp.errors import (AlreadyExistsError, ConnectFailedError,
                         DiscoveryTimeoutError)
from mmgp.overlay import (Advertisement, BindingAnswer, EdgeNode,
                          OverlayConfig, SuperNode, hash_service)
from mmgp.overlay import wire
from mmgp.simnet import SimNet, ms_to_us

SEC = 1_000_000


def build(topology, seed=1, config=None, trace=False, latency_ms=1.0):
    """topology: dict name -> list of linked names; 'S*' names are supers."""
    net = SimNet(master_seed=seed, trace=trace)
    cfg = config or OverlayConfig()
    for name in topology:
        net.add_node(name)
    done = set()
    for a, neighbours in topology.items():
        for b in neighbours:
            if frozenset((a, b)) not in done:
                net.add_link(a, b, latency_ms=latency_ms)
                done.add(frozenset((a, b)))
    nodes = {}
    for name, neighbours in topology.items():
        env = net.nodes[name]
        rng = net.node_rng(name)
        if name.startswith("S"):
            peers = sorted(n for n in neighbours if n.startswith("S"))
            node = SuperNode(env, cfg, rng, peer_addrs=peers)
            node.start()
        else:
            node = EdgeNode(env, cfg, rng)
        nodes[name] = node
    return net, nodes


def test_create_input_pipe_and_duplicates():
    net, nodes = build({"A": ["S1"], "S1": ["A"]})
    addr, port = nodes["A"].create_input_pipe("video/stream")
    assert addr == "A" and port >= 1
    with pytest.raises(AlreadyExistsError):
        nodes["A"].create_input_pipe("video/stream")


def test_two_nodes_same_service_both_discoverable():
    net, nodes = build({"A": ["S1"], "B": ["S1"], "C": ["S1"],
                        "S1": ["A", "B", "C"]})
    for name in ("A", "B"):
        nodes[name].create_input_pipe("svc")
        pub = nodes[name].publish_advertisement("S1")
        net.run_until(lambda: pub.done, 5 * SEC)
        assert pub.result() is True
    bucket = hash_service("svc")
    assert len(nodes["S1"].ad_table[bucket]) == 2


def test_publish_lands_in_ad_table_and_is_idempotent():
    net, nodes = build({"A": ["S1"], "S1": ["A"]})
    nodes["A"].create_input_pipe("video/stream")
    pub = nodes["A"].publish_advertisement("S1")
    net.run_until(lambda: pub.done, 5 * SEC)
    bucket = hash_service("video/stream")
    table = nodes["S1"].ad_table[bucket]
    assert len(table) == 1
    first_issued = table[0].issued_at
    net.advance(net.now + 50_000)
    pub2 = nodes["A"].publish_advertisement("S1")
    net.run_until(lambda: pub2.done, 5 * SEC)
    table = nodes["S1"].ad_table[bucket]
    assert len(table) == 1              # upsert, not append
    assert table[0].issued_at > first_issued


def test_unreachable_super_times_out_after_retries():
    net, nodes = build({"A": ["S1"], "S1": ["A"]})
    net.link_between("A", "S1").loss = 1.0
    nodes["A"].create_input_pipe("svc")
    pub = nodes["A"].publish_advertisement("S1")
    assert net.run_until(lambda: pub.done, 60 * SEC)
    with pytest.raises(DiscoveryTimeoutError):
        pub.result()
    # exactly the configured number of attempts went out
    link = net.link_between("A", "S1")
    assert link.injected == OverlayConfig().publish_retries


def _publish_and_query(net, nodes, advertiser, adv_super, requester,
                       req_super, service="svc"):
    nodes[advertiser].create_input_pipe(service)
    pub = nodes[advertiser].publish_advertisement(adv_super)
    net.run_until(lambda: pub.done, 10 * SEC)
    assert pub.result() is True
    q = nodes[requester].query_service(service, req_super)
    net.run_until(lambda: q.done, 30 * SEC)
    return q.result()


def test_local_match_needs_no_forwarding():
    net, nodes = build({"A": ["S1"], "B": ["S1"], "S1": ["A", "B"]},
                       trace=True)
    answer = _publish_and_query(net, nodes, "A", "S1", "B", "S1")
    assert answer.found
    # the only QUERY frames on the wire: B->S1 and S1->A (the delivery)
    query_sends = [r for r in net.trace_rows
                   if r[1] == "send" and r[5] == wire.QUERY]
    assert {(r[2], r[3]) for r in query_sends} == {("B", "S1"), ("S1", "A")}


def test_three_super_line_reaches_far_end_in_two_forwards():
    net, nodes = build({
        "A": ["S3"], "B": ["S1"],
        "S1": ["B", "S2"], "S2": ["S1", "S3"], "S3": ["S2", "A"]},
        trace=True)
    answer = _publish_and_query(net, nodes, "A", "S3", "B", "S1")
    assert answer.found
    assert answer.advertisement.endpoints == [("A", nodes["A"].pipes["svc"].port)]
    # query hop counts grow along the line: S1 floods at 1, S2 floods at 2
    delivered = [r for r in net.trace_rows
                 if r[1] == "deliver" and r[5] == wire.QUERY and r[3] == "A"]
    assert delivered, "advertiser never saw the query"


def test_unknown_service_resolves_not_found_within_timeout():
    cfg = OverlayConfig(query_timeout_us=500_000)
    net, nodes = build({"B": ["S1"], "S1": ["B", "S2"], "S2": ["S1"]},
                       config=cfg)
    q = nodes["B"].query_service("ghost", "S1")
    assert net.run_until(lambda: q.done, 5 * SEC)
    answer = q.result()
    assert not answer.found
    assert net.now <= 600_000  # bounded simulated time: the timeout, not ticks


def test_withdrawn_service_returns_not_found_answer():
    net, nodes = build({"A": ["S1"], "B": ["S1"], "S1": ["A", "B"]})
    nodes["A"].create_input_pipe("svc")
    pub = nodes["A"].publish_advertisement("S1")
    net.run_until(lambda: pub.done, 5 * SEC)
    nodes["A"].withdraw_service("svc")
    q = nodes["B"].query_service("svc", "S1")
    net.run_until(lambda: q.done, 30 * SEC)
    assert not q.result().found
    assert nodes["B"].stats_negative_answers >= 1


def test_duplicate_answers_suppressed_by_requester():
    # two advertisers of one service produce two positive answers; the
    # requester takes the first and suppresses the rest by query id
    net, nodes = build({"A": ["S1"], "B": ["S1"], "C": ["S1"],
                        "S1": ["A", "B", "C"]})
    for name in ("A", "B"):
        nodes[name].create_input_pipe("svc")
        pub = nodes[name].publish_advertisement("S1")
        net.run_until(lambda: pub.done, 5 * SEC)
    q = nodes["C"].query_service("svc", "S1")
    net.run_until(lambda: q.done, 5 * SEC)
    net.advance(net.now + SEC)  # let the second answer land
    assert q.result().found
    assert nodes["C"].stats_suppressed_answers >= 1


def test_query_hop_count_never_exceeds_budget():
    cfg = OverlayConfig(max_hops=2, query_timeout_us=SEC)
    names = ["S1", "S2", "S3", "S4", "S5"]
    topology = {"B": ["S1"]}
    for i, name in enumerate(names):
        neighbours = []
        if i > 0:
            neighbours.append(names[i - 1])
        if i < len(names) - 1:
            neighbours.append(names[i + 1])
        topology[name] = neighbours
    topology["S1"] = ["B"] + topology["S1"]
    net, nodes = build(topology, config=cfg, trace=True)
    q = nodes["B"].query_service("ghost", "S1")
    net.run_until(lambda: q.done, 10 * SEC)
    assert not q.result().found
    # with max_hops=2 the flood reaches S3 and stops; S4/S5 never see it
    seen = {r[3] for r in net.trace_rows
            if r[1] == "deliver" and r[5] == wire.QUERY}
    assert "S4" not in seen and "S5" not in seen


# --- maintenance ---------------------------------------------------------------

def test_responsive_peers_never_purged_and_counters_reset():
    net, nodes = build({"S1": ["S2", "S3"], "S2": ["S1", "S3"],
                        "S3": ["S1", "S2"]})
    net.advance(10 * SEC)
    for name in ("S1", "S2", "S3"):
        node = nodes[name]
        assert len(node.peers) == 2
        assert all(v == 0 for v in node.ping_failures.values())
        assert node.stats_purged == 0


def test_silenced_peer_is_purged_after_threshold_ticks():
    net, nodes = build({"S1": ["S2", "S3", "S4"], "S2": ["S1", "S3", "S4"],
                        "S3": ["S1", "S2", "S4"], "S4": ["S1", "S2", "S3"]})
    net.advance(2 * SEC)  # everyone is known healthy
    net.partition_node("S4")
    threshold = OverlayConfig().purge_threshold
    # after threshold+1 further ticks, every live peer has dropped S4
    net.advance(net.now + (threshold + 1) * SEC + SEC // 2)
    for name in ("S1", "S2", "S3"):
        assert "S4" not in [p.address for p in nodes[name].peers]


def test_peer_exchange_unions_disjoint_lists():
    # S1 knows only S2; S3 knows only S2.  One exchange round through S2
    # spreads everyone to everyone (minus self).
    net, nodes = build({"S1": ["S2"], "S2": ["S1", "S3"], "S3": ["S2"]})
    net.advance(6 * SEC)
    for name, expected in (("S1", {"S2", "S3"}), ("S2", {"S1", "S3"}),
                           ("S3", {"S1", "S2"})):
        addresses = {p.address for p in nodes[name].peers}
        assert addresses == expected, (name, addresses)


def test_purged_peer_is_not_resurrected_by_stale_gossip():
    net, nodes = build({"S1": ["S2", "S3", "S4"], "S2": ["S1", "S3", "S4"],
                        "S3": ["S1", "S2", "S4"], "S4": ["S1", "S2", "S3"]})
    net.advance(2 * SEC)
    net.partition_node("S4")
    net.advance(net.now + 5 * SEC)
    for name in ("S1", "S2", "S3"):
        assert "S4" not in [p.address for p in nodes[name].peers]
    # keep gossiping for a long while: the tombstones must hold
    net.advance(net.now + 20 * SEC)
    for name in ("S1", "S2", "S3"):
        assert "S4" not in [p.address for p in nodes[name].peers]


def test_returning_peer_is_readmitted_by_fresh_ping():
    net, nodes = build({"S1": ["S2", "S3"], "S2": ["S1", "S3"],
                        "S3": ["S1", "S2"]})
    net.advance(2 * SEC)
    net.partition_node("S3")
    net.advance(net.now + 6 * SEC)
    assert "S3" not in [p.address for p in nodes["S1"].peers]
    for other in ("S1", "S2"):
        net.heal("S3", other)
    net.advance(net.now + 6 * SEC)  # S3's own pings re-announce it
    assert "S3" in [p.address for p in nodes["S1"].peers]


def test_advertisement_expires_without_republish():
    cfg = OverlayConfig(ad_ttl_us=3 * SEC, query_timeout_us=SEC)
    net, nodes = build({"A": ["S1"], "B": ["S1"], "S1": ["A", "B"]},
                       config=cfg)
    nodes["A"].create_input_pipe("svc")
    pub = nodes["A"].publish_advertisement("S1")
    net.run_until(lambda: pub.done, 5 * SEC)
    q1 = nodes["B"].query_service("svc", "S1")
    net.run_until(lambda: q1.done, 5 * SEC)
    assert q1.result().found
    net.advance(net.now + 10 * SEC)  # ttl long gone, table swept
    assert nodes["S1"].ad_table == {}
    q2 = nodes["B"].query_service("svc", "S1")
    net.run_until(lambda: q2.done, 5 * SEC)
    assert not q2.result().found


def test_peer_list_sorted_invariant_through_churn():
    net, nodes = build({"S1": ["S2", "S3", "S4"], "S2": ["S1", "S3", "S4"],
                        "S3": ["S1", "S2", "S4"], "S4": ["S1", "S2", "S3"]})
    for checkpoint in range(1, 14):
        net.advance(checkpoint * SEC)
        if checkpoint == 4:
            net.partition_node("S2")
        if checkpoint == 9:
            for other in ("S1", "S3", "S4"):
                net.heal("S2", other)
        for node in nodes.values():
            ids = [p.node_id for p in node.peers]
            assert ids == sorted(ids)
            assert len(ids) == len(set(ids))


# --- connection establishment ---------------------------------------------------

def test_establish_connection_single_endpoint():
    net, nodes = build({"A": ["S1", "B"], "B": ["S1", "A"],
                        "S1": ["A", "B"]})
    nodes["A"].serve_payload("svc", lambda: b"payload bytes")
    pub = nodes["A"].publish_advertisement("S1")
    net.run_until(lambda: pub.done, 5 * SEC)
    q = nodes["B"].query_service("svc", "S1")
    net.run_until(lambda: q.done, 5 * SEC)
    pending = nodes["B"].establish_connection(q.result())
    net.run_until(lambda: pending.done, 30 * SEC)
    session = pending.result()
    net.run_until(lambda: session.completion.done, 60 * SEC)
    assert session.completion.result() == b"payload bytes"
    session.close()
    session.endpoint.close()


def test_establish_connection_ordered_fallback():
    net, nodes = build({"A": ["S1", "B"], "B": ["S1", "A"],
                        "S1": ["A", "B"]})
    nodes["A"].serve_payload("svc", lambda: b"zz")
    real_port = nodes["A"].pipes["svc"].port
    answer = BindingAnswer(
        query_id=1,
        advertisement=Advertisement(
            node_id=nodes["A"].node_id, service_name="svc",
            endpoints=[("ghost", 9), ("A", real_port)],
            issued_at=net.now, ttl=60 * SEC))
    pending = nodes["B"].establish_connection(answer)
    assert net.run_until(lambda: pending.done, 60 * SEC)
    session = pending.result()  # second endpoint won
    assert session.peer == "A"
    session.close()
    session.endpoint.close()


def test_establish_connection_all_dead_lists_attempts():
    net, nodes = build({"B": ["S1"], "S1": ["B"]})
    answer = BindingAnswer(
        query_id=1,
        advertisement=Advertisement(
            node_id=7, service_name="svc",
            endpoints=[("ghost1", 9), ("ghost2", 9)],
            issued_at=net.now, ttl=60 * SEC))
    pending = nodes["B"].establish_connection(answer)
    assert net.run_until(lambda: pending.done, 120 * SEC)
    with pytest.raises(ConnectFailedError) as excinfo:
        pending.result()
    assert len(excinfo.value.attempts) == 2
