import pytest

from mmgp.errors import AlreadyExistsError, InvalidInputError
from mmgp.rng import SplitMix64, derive_seed
from mmgp.simnet import SimNet, ms_to_us

_MASK64 = (1 << 64) - 1


def _reference_splitmix(seed):
    """Independent replay of the generator, long-hand."""
    state = seed & _MASK64
    while True:
        state = (state + 0x9E3779B97F4A7C15) & _MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        yield z ^ (z >> 31)


def test_splitmix_matches_reference_stream():
    rng = SplitMix64(987654321)
    ref = _reference_splitmix(987654321)
    for _ in range(100):
        assert rng.next_u64() == next(ref)


def _two_nodes(loss=0.0, seed=None, latency_ms=1.0, bandwidth=0):
    net = SimNet(master_seed=3, trace=True)
    net.add_node("a")
    net.add_node("b")
    net.add_link("a", "b", latency_ms=latency_ms, loss=loss,
                 bandwidth=bandwidth, seed=seed)
    return net


def test_zero_loss_always_delivers():
    net = _two_nodes(loss=0.0)
    got = []
    net.nodes["b"].bind(1, lambda src, sport, data: got.append(data))
    for i in range(50):
        net.send("a", "b", 1, bytes([i]))
    net.advance(10_000)
    assert len(got) == 50


def test_full_loss_always_drops():
    net = _two_nodes(loss=1.0)
    got = []
    net.nodes["b"].bind(1, lambda src, sport, data: got.append(data))
    for i in range(20):
        net.send("a", "b", 1, b"x")
    net.advance(10_000)
    assert got == []
    link = net.link_between("a", "b")
    assert link.dropped_loss == 20


def test_drop_count_matches_independent_rng_replay():
    net = _two_nodes(loss=0.1, seed=7)
    for _ in range(1000):
        net.send("a", "b", 1, b"payload")
    # replay: the link draws exactly one uniform per injection (loss first,
    # latency is fixed so no second draw)
    ref = _reference_splitmix(7)
    expected_drops = sum(1 for _ in range(1000)
                         if next(ref) / 2.0 ** 64 < 0.1)
    assert net.link_between("a", "b").dropped_loss == expected_drops


def test_same_time_messages_deliver_in_injection_order():
    net = _two_nodes()
    got = []
    net.nodes["b"].bind(1, lambda src, sport, data: got.append(data))
    net.send("a", "b", 1, b"first")
    net.send("a", "b", 1, b"second")
    net.advance(ms_to_us(5))
    assert got == [b"first", b"second"]


def test_no_delivery_before_latency():
    net = _two_nodes(latency_ms=10.0)
    got = []
    net.nodes["b"].bind(1, lambda src, sport, data: got.append(data))
    net.send("a", "b", 1, b"x")
    net.advance(9_999)
    assert got == []
    net.advance(10_000)
    assert got == [b"x"]


def test_bandwidth_adds_serialization_delay():
    net = _two_nodes(latency_ms=0.0, bandwidth=1000)  # 1000 B/s
    got = []
    net.nodes["b"].bind(1, lambda src, sport, data: got.append(net.now))
    net.send("a", "b", 1, bytes(500))  # 0.5 s on the wire
    net.advance(499_999)
    assert got == []
    net.advance(500_000)
    assert got == [500_000]


def test_uniform_latency_range_is_drawn_from_link_rng():
    net = SimNet(master_seed=0)
    net.add_node("a")
    net.add_node("b")
    net.add_link("a", "b", latency_ms=(1.0, 2.0), loss=0.0, seed=99)
    times = []
    net.nodes["b"].bind(1, lambda src, sport, data: times.append(net.now))
    for _ in range(20):
        net.send("a", "b", 1, b"x")
    net.advance(ms_to_us(5))
    assert all(1000 <= t <= 2000 for t in times)
    assert len(set(times)) > 1  # actually varies


def test_partition_drops_in_flight_and_heal_restores():
    net = _two_nodes(latency_ms=5.0)
    got = []
    net.nodes["b"].bind(1, lambda src, sport, data: got.append(data))
    net.send("a", "b", 1, b"stranded")
    net.partition("a", "b")
    net.advance(ms_to_us(10))
    assert got == []  # in-flight at partition time never arrives
    net.send("a", "b", 1, b"blocked")
    net.advance(ms_to_us(20))
    assert got == []
    net.heal("a", "b")
    net.send("a", "b", 1, b"through")
    net.advance(ms_to_us(30))
    assert got == [b"through"]


def test_heal_of_healthy_link_is_noop():
    net = _two_nodes()
    net.heal("a", "b")
    got = []
    net.nodes["b"].bind(1, lambda src, sport, data: got.append(data))
    net.send("a", "b", 1, b"x")
    net.advance(ms_to_us(2))
    assert got == [b"x"]


def test_conservation_every_message_delivered_or_dropped():
    net = _two_nodes(loss=0.3, seed=5)
    net.nodes["b"].bind(1, lambda src, sport, data: None)
    for _ in range(500):
        net.send("a", "b", 1, b"z")
    net.advance(ms_to_us(50))
    link = net.link_between("a", "b")
    assert link.injected == 500
    assert link.delivered + link.dropped_loss + link.dropped_partition == 500


def test_trace_replay_is_byte_identical():
    def run():
        net = _two_nodes(loss=0.2, seed=11)
        net.nodes["b"].bind(1, lambda src, sport, data: None)
        for i in range(100):
            net.send("a", "b", 1, bytes([i % 7]))
        net.advance(ms_to_us(100))
        return net.trace_csv()

    assert run() == run()


def test_timers_fire_in_order_and_cancel():
    net = _two_nodes()
    fired = []
    net.call_at(100, lambda: fired.append("a"))
    timer = net.call_at(100, lambda: fired.append("b"))
    net.call_at(50, lambda: fired.append("c"))
    timer.cancel()
    net.advance(200)
    assert fired == ["c", "a"]


def test_clock_cannot_go_backwards():
    net = _two_nodes()
    net.advance(100)
    with pytest.raises(InvalidInputError):
        net.advance(50)


def test_duplicate_names_rejected():
    net = SimNet()
    net.add_node("x")
    with pytest.raises(AlreadyExistsError):
        net.add_node("x")
    net.add_node("y")
    net.add_link("x", "y")
    with pytest.raises(AlreadyExistsError):
        net.add_link("y", "x")
    with pytest.raises(InvalidInputError):
        net.add_link("x", "ghost")


def test_send_without_link_is_counted_dropped():
    net = SimNet(trace=True)
    net.add_node("x")
    net.add_node("y")
    assert net.send("x", "y", 1, b"data") is False
    assert any(row[1] == "drop_nolink" for row in net.trace_rows)


def test_derive_seed_is_stable():
    assert derive_seed(1, "link:a|b") == derive_seed(1, "link:a|b")
    assert derive_seed(1, "link:a|b") != derive_seed(2, "link:a|b")
