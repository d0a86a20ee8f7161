import hashlib

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmgp.errors import (AuthFailedError, ConnectFailedError,
                         ProtocolViolationError, TransferAbortedError)
from mmgp.rng import SplitMix64
from mmgp.simnet import SimNet, ms_to_us
from mmgp.transfer import (SenderSession, ReceiverSession, TransferConfig,
                           TransferEndpoint, wire)
from mmgp.transfer.wire import TransferPacket


def _pair(loss=0.0, seed=1, latency_ms=1.0, config=None, trace=False):
    net = SimNet(master_seed=seed, trace=trace)
    net.add_node("tx")
    net.add_node("rx")
    net.add_link("tx", "rx", latency_ms=latency_ms, loss=loss, seed=seed)
    config = config or TransferConfig()
    server = TransferEndpoint(net.nodes["tx"], config, rng=SplitMix64(seed))
    client = TransferEndpoint(net.nodes["rx"], config,
                              rng=SplitMix64(seed + 1))
    return net, server, client


def _run_copy(payload, loss=0.0, seed=1, config=None, trace=False):
    net, server, client = _pair(loss=loss, seed=seed, config=config,
                                trace=trace)
    server.listen(lambda sid, peer: payload)
    pending = client.connect("tx", server.port)
    assert net.run_until(lambda: pending.done, 10_000_000)
    session = pending.result()
    assert net.run_until(lambda: session.completion.done, 600_000_000)
    received = session.completion.result()
    sender = server.sessions[session.session_id]
    net.run_until(lambda: sender.completion.done, 10_000_000)
    return net, sender, session, received


# --- handshake ---------------------------------------------------------------

def test_handshake_with_matching_psk_establishes():
    net, sender, receiver, received = _run_copy(b"x" * 100)
    assert received == b"x" * 100
    assert sender.completion.done and not sender.completion.failed


def test_mismatched_psk_is_refused_with_zero_data_packets():
    net = SimNet(trace=True)
    net.add_node("tx")
    net.add_node("rx")
    net.add_link("tx", "rx", latency_ms=1.0)
    server = TransferEndpoint(net.nodes["tx"], TransferConfig(psk="right"))
    server.listen(lambda sid, peer: b"secret payload")
    client = TransferEndpoint(net.nodes["rx"], TransferConfig(psk="wrong"))
    pending = client.connect("tx", server.port)
    net.run_until(lambda: pending.done, 10_000_000)
    with pytest.raises(AuthFailedError):
        pending.result()
    data_frames = [row for row in net.trace_rows
                   if row[1] == "send" and row[5] == wire.DATA]
    assert data_frames == []
    assert server.sessions == {}


def test_lost_handshake_is_retransmitted():
    # deterministic drop of exactly the first packet on the link
    class DropFirst:
        def __init__(self):
            self.count = 0

        def random(self):
            self.count += 1
            return 0.0 if self.count == 1 else 1.0

        def next_u64(self):
            return 0

    net, server, client = _pair(loss=0.5)
    net.link_between("tx", "rx").rng = DropFirst()
    server.listen(lambda sid, peer: b"payload")
    pending = client.connect("tx", server.port)
    assert net.run_until(lambda: pending.done, 10_000_000)
    session = pending.result()
    assert net.run_until(lambda: session.completion.done, 60_000_000)
    assert session.completion.result() == b"payload"


def test_all_handshakes_lost_gives_connect_failed():
    net, server, client = _pair(loss=1.0)
    server.listen(lambda sid, peer: b"payload")
    pending = client.connect("tx", server.port)
    assert net.run_until(lambda: pending.done, 60_000_000)
    with pytest.raises(ConnectFailedError):
        pending.result()


# --- sender behaviour -----------------------------------------------------------

def test_zero_byte_stream_completes_with_fin_only():
    net, sender, receiver, received = _run_copy(b"")
    assert received == b""
    assert sender.stats.data_packets_sent == 0


def test_mss_partitioning_eight_packets():
    net, sender, receiver, received = _run_copy(bytes(10_000))
    assert sender.total == 8  # 7 full MSS packets + one 200-byte tail
    assert len(sender.chunks[-1]) == 200
    assert received == bytes(10_000)


def test_lossy_link_ten_percent_digest_matches():
    payload = SplitMix64(42).next_u64().to_bytes(8, "little") * 4000
    net, sender, receiver, received = _run_copy(payload, loss=0.1, seed=42)
    assert hashlib.sha256(received).hexdigest() == \
        hashlib.sha256(payload).hexdigest()
    assert sender.stats.retransmits > 0


def test_clean_link_has_no_naks_or_retransmits():
    net, sender, receiver, received = _run_copy(bytes(range(256)) * 256)
    assert sender.stats.retransmits == 0
    assert sender.stats.naks_received == 0
    assert receiver.stats.naks_sent == 0


# --- receiver behaviour: gaps, NAKs, ACK ticks ---------------------------------

class FakeEnv:
    """Hand-cranked environment for driving one session directly."""

    def __init__(self):
        self.sent = []   # (dst, port, TransferPacket)
        self.time = 0
        self.timers = []

    def now(self):
        return self.time

    def send(self, dst, port, data, src_port=0):
        self.sent.append((dst, port, TransferPacket.decode(data)))

    def call_later(self, delay, fn):
        class T:
            cancelled = False

            def cancel(self):
                self.cancelled = True

        timer = T()
        self.timers.append((self.time + delay, timer, fn))
        return timer

    def take(self):
        out = self.sent
        self.sent = []
        return out


def _receiver(env):
    return ReceiverSession(env, "peer", 9, 1, session_id=5,
                           config=TransferConfig())


def test_in_order_packet_no_nak():
    env = FakeEnv()
    rx = _receiver(env)
    rx.on_data(0, b"a")
    assert [p for _, _, p in env.take() if p.kind == wire.NAK] == []


def test_gap_triggers_immediate_nak_with_range():
    env = FakeEnv()
    rx = _receiver(env)
    for seq in range(5):
        rx.on_data(seq, b"x")
    env.take()
    rx.on_data(8, b"x")
    naks = [p for _, _, p in env.take() if p.kind == wire.NAK]
    assert len(naks) == 1 and naks[0].ranges == [(5, 7)]


def test_duplicate_is_silently_discarded():
    env = FakeEnv()
    rx = _receiver(env)
    rx.on_data(0, b"a")
    env.take()
    rx.on_data(0, b"different")
    assert env.take() == []
    assert rx.stats.duplicates == 1
    assert bytes(rx.assembled) == b"a"


def test_ack_tick_values():
    env = FakeEnv()
    rx = _receiver(env)
    rx.send_ack()
    assert env.take()[-1][2].ack_seq == 0  # nothing received -> ACK(0)
    for seq in (0, 1, 2):
        rx.on_data(seq, b"x")
    rx.on_data(5, b"x")  # creates gap 3..4
    env.take()
    rx.send_ack()
    assert env.take()[-1][2].ack_seq == 3  # cumulative stops at first gap
    rx.on_data(3, b"x")
    rx.on_data(4, b"x")
    env.take()
    rx.send_ack()
    assert env.take()[-1][2].ack_seq == 6  # gap repaired


def test_fin_reveals_tail_loss():
    env = FakeEnv()
    rx = _receiver(env)
    rx.on_data(0, b"x")
    env.take()
    rx.on_fin(4)  # packets 1..3 never arrived
    naks = [p for _, _, p in env.take() if p.kind == wire.NAK]
    assert naks and naks[0].ranges == [(1, 3)]


# --- sender rate control ---------------------------------------------------------

def _sender(env, payload=b"", config=None):
    return SenderSession(env, "peer", 9, 1, session_id=5,
                         config=config or TransferConfig(), payload=payload)


def test_two_loss_free_intervals_from_rate_100():
    env = FakeEnv()
    tx = _sender(env, config=TransferConfig(initial_rate=100.0))
    tx.on_rate_interval()
    tx.on_rate_interval()
    assert tx.effective_rate() == 126  # 100 * 1.125^2 = 126.5625, floored


def test_nak_multiplies_rate_exactly_once_per_event():
    env = FakeEnv()
    tx = _sender(env, payload=bytes(10_000))
    tx.next_new = 8
    tx.send_buffer = {i: tx.chunks[i] for i in range(8)}
    rate0 = tx.rate
    tx.on_nak([(2, 4)])
    assert tx.rate == rate0 * 0.875  # one event, one decrease
    assert tx.retransmit_q == [2, 3, 4]


def test_rate_stays_within_bounds():
    env = FakeEnv()
    config = TransferConfig(initial_rate=2.0, rate_floor=1.0, rate_ceiling=4.0)
    tx = _sender(env, config=config)
    for _ in range(50):
        tx.on_nak([(0, 0)])
    assert tx.rate == 1.0
    for _ in range(50):
        tx.on_rate_interval()
    assert tx.rate == 4.0


@settings(max_examples=40, deadline=None)
@given(st.lists(st.booleans(), min_size=1, max_size=200))
def test_rate_bounds_hold_for_arbitrary_event_interleavings(events):
    env = FakeEnv()
    config = TransferConfig(initial_rate=16.0, rate_floor=1.0,
                            rate_ceiling=64.0)
    tx = _sender(env, payload=bytes(3000), config=config)
    tx.next_new = 3
    tx.send_buffer = {i: tx.chunks[i] for i in range(3)}
    for is_nak in events:
        if is_nak:
            tx.on_nak([(0, 2)])
        else:
            tx.on_rate_interval()
        assert config.rate_floor <= tx.rate <= config.rate_ceiling


def test_ack_frees_send_buffer_and_violation_aborts():
    env = FakeEnv()
    tx = _sender(env, payload=bytes(4000))
    tx.next_new = 3
    tx.send_buffer = {i: tx.chunks[i] for i in range(3)}
    tx.on_ack(3)
    assert tx.send_buffer == {}
    tx.on_ack(99)  # beyond anything ever sent
    assert tx.completion.failed
    with pytest.raises(ProtocolViolationError):
        tx.completion.result()


def test_dead_peer_aborts_with_progress_count():
    config = TransferConfig(dead_timeout_us=200_000)
    net, server, client = _pair(config=config)
    server.listen(lambda sid, peer: bytes(5000))
    pending = client.connect("tx", server.port)
    assert net.run_until(lambda: pending.done, 10_000_000)
    session = pending.result()
    net.run_until(lambda: server.sessions != {}, 1_000_000)
    net.partition("tx", "rx")
    sender = server.sessions[session.session_id]
    net.run_until(lambda: sender.completion.done, 60_000_000)
    with pytest.raises(TransferAbortedError):
        sender.completion.result()


# --- ordering / delivery invariants ------------------------------------------------

def test_reassembly_is_in_order_and_at_most_once():
    env = FakeEnv()
    rx = _receiver(env)
    rx.on_data(2, b"C")
    rx.on_data(0, b"A")
    rx.on_data(1, b"B")
    rx.on_data(1, b"B")  # duplicate on the wire
    rx.on_fin(3)
    assert rx.completion.done
    assert rx.completion.result() == b"ABC"


def test_nak_is_in_same_event_step_as_revealing_packet():
    # On a lossy run, every NAK the receiver sends must share its timestamp
    # with a DATA delivery to the receiver: gaps are answered inside the
    # handling of the packet that revealed them, never on a later tick.
    net, sender, receiver, received = _run_copy(bytes(64_000), loss=0.15,
                                                seed=23, trace=True)
    nak_sends = [row for row in net.trace_rows
                 if row[1] == "send" and row[2] == "rx"
                 and row[5] == wire.NAK]
    assert nak_sends, "a 15% loss run must produce at least one NAK"
    for nak in nak_sends:
        same_step = [row for row in net.trace_rows
                     if row[0] == nak[0] and row[1] == "deliver"
                     and row[3] == "rx" and row[5] in (wire.DATA, wire.FIN)]
        assert same_step, f"NAK at {nak[0]} has no revealing packet"


def test_cleanup_after_close_leaves_no_state():
    net, sender, receiver, received = _run_copy(bytes(3000))
    receiver.close()
    sender.close()
    assert receiver.closed and sender.closed
    assert not receiver._timers and not sender._timers
