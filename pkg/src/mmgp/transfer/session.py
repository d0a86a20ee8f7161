"""Reliable-UDP engine: sequencing, periodic cumulative ACKs, immediate
NAKs on gap detection, and MIMD rate pacing.

Both ends are single-threaded state machines driven by an environment
(``env``) offering ``send(dst, port, data, src_port)``, ``now()`` and
``call_later(delay_us, fn)``; the simulated network and the real-UDP
runner both provide that surface.

Sender pacing: every ack-interval tick the sender pushes up to
``floor(rate)`` packets, retransmissions first.  The rate rises by the
multiplicative increase factor after every interval that saw no NAK and
falls by the decrease factor on each NAK packet, clamped to
[floor, ceiling].  A slow recovery sweep re-queues everything unacked
when several intervals pass without cumulative progress, which covers
lost NAKs and lost ACKs.

Teardown: the sender emits FIN (carrying the packet count) once all data
has been sent; the receiver echoes FIN when reassembly is complete.  The
echo is what lets the sender finish, so FIN keeps being resent until it
arrives or the dead timer fires.
"""

from dataclasses import dataclass, field

from ..errors import (AuthFailedError, ConnectFailedError,
                      ProtocolViolationError, TransferAbortedError)
from ..pending import Pending
from ..rng import SplitMix64
from . import wire
from .wire import TransferPacket


@dataclass
class TransferConfig:
    mss: int = 1400                      # max DATA payload bytes
    ack_interval_us: int = 10_000        # receiver ACK cadence and sender tick
    rate_increase: float = 1.125
    rate_decrease: float = 0.875
    rate_floor: float = 1.0
    rate_ceiling: float = 4096.0
    initial_rate: float = 16.0           # packets per ack interval
    psk: str = "mmgp-default-psk"
    handshake_timeout_us: int = 40_000
    handshake_retries: int = 5
    recovery_intervals: int = 4          # ticks without progress before re-queue
    dead_timeout_us: int = 30_000_000


@dataclass
class SessionStats:
    data_packets_sent: int = 0
    data_bytes_sent: int = 0             # DATA frame bytes incl. headers
    retransmits: int = 0
    naks_received: int = 0
    acks_received: int = 0
    data_packets_received: int = 0
    duplicates: int = 0
    naks_sent: int = 0
    acks_sent: int = 0
    started_at: int = 0
    finished_at: int = 0


class _SessionBase:
    def __init__(self, env, peer, peer_port, local_port, session_id, config):
        self.env = env
        self.peer = peer
        self.peer_port = peer_port
        self.local_port = local_port
        self.session_id = session_id
        self.config = config
        self.stats = SessionStats(started_at=env.now())
        self.completion = Pending()
        self.closed = False
        self._timers = []

    def _send(self, pkt: TransferPacket):
        self.env.send(self.peer, self.peer_port, pkt.encode(),
                      src_port=self.local_port)

    def _later(self, delay_us, fn):
        timer = self.env.call_later(delay_us, fn)
        self._timers.append(timer)
        return timer

    def close(self):
        """Drop all session state; safe to call repeatedly."""
        self.closed = True
        for timer in self._timers:
            timer.cancel()
        self._timers.clear()

    def _finish(self, value=None):
        if not self.completion.done:
            self.stats.finished_at = self.env.now()
            self.completion.resolve(value)

    def _abort(self, error):
        if not self.completion.done:
            self.stats.finished_at = self.env.now()
            self.completion.fail(error)
        self.close()


class SenderSession(_SessionBase):
    """Streams one byte payload to the peer; completes on the FIN echo."""

    def __init__(self, env, peer, peer_port, local_port, session_id, config,
                 payload: bytes):
        super().__init__(env, peer, peer_port, local_port, session_id, config)
        mss = config.mss
        self.chunks = [payload[i:i + mss] for i in range(0, len(payload), mss)]
        self.total = len(self.chunks)
        self.next_new = 0                # lowest never-sent seq
        self.cumulative_ack = 0
        self.send_buffer = {}            # seq -> payload, in flight unacked
        self.retransmit_q = []
        self.retransmit_set = set()
        self.rate = config.initial_rate
        self.rate_trace = [self.rate]    # observable rate trajectory
        self.nak_in_interval = False
        self.fin_sent = False
        self._ticks = 0
        self._last_progress_value = -1
        self._last_progress_time = env.now()
        self._first_tick_done = False

    def start(self):
        self._tick()

    # -- pacing and rate ----------------------------------------------------

    def on_rate_interval(self):
        """End-of-interval rate update: grow only if the interval was NAK-free."""
        if self.nak_in_interval:
            self.nak_in_interval = False
            return
        new_rate = min(self.rate * self.config.rate_increase,
                       self.config.rate_ceiling)
        if new_rate != self.rate:
            self.rate = new_rate
            self.rate_trace.append(self.rate)

    def effective_rate(self) -> int:
        return max(1, int(self.rate))

    def _tick(self):
        if self.closed or self.completion.done:
            return
        if self._first_tick_done:
            self.on_rate_interval()
        self._first_tick_done = True
        self._ticks += 1
        self._send_burst()
        self._recovery_sweep()
        self._check_dead()
        self._later(self.config.ack_interval_us, self._tick)

    def _send_burst(self):
        budget = self.effective_rate()
        while budget > 0:
            if self.retransmit_q:
                seq = self.retransmit_q.pop(0)
                self.retransmit_set.discard(seq)
                if seq < self.cumulative_ack or seq not in self.send_buffer:
                    continue  # acknowledged while queued
                self.stats.retransmits += 1
                self._send_data(seq, self.send_buffer[seq])
            elif self.next_new < self.total:
                seq = self.next_new
                self.next_new += 1
                self.send_buffer[seq] = self.chunks[seq]
                self._send_data(seq, self.chunks[seq])
            else:
                break
            budget -= 1
        if self.next_new >= self.total and not self.retransmit_q:
            self._send(TransferPacket(kind=wire.FIN, session_id=self.session_id,
                                      final_seq=self.total))
            self.fin_sent = True

    def _send_data(self, seq, payload):
        pkt = TransferPacket(kind=wire.DATA, session_id=self.session_id,
                             seq=seq, payload=payload)
        self.stats.data_packets_sent += 1
        self.stats.data_bytes_sent += wire.DATA_HEADER_SIZE + len(payload)
        self._send(pkt)

    def _recovery_sweep(self):
        if self._ticks % self.config.recovery_intervals != 0:
            return
        if self.cumulative_ack == self._last_progress_value and self.send_buffer:
            for seq in sorted(self.send_buffer):
                if seq not in self.retransmit_set:
                    self.retransmit_q.append(seq)
                    self.retransmit_set.add(seq)
        self._last_progress_value = self.cumulative_ack

    def _check_dead(self):
        idle = self.env.now() - self._last_progress_time
        if idle > self.config.dead_timeout_us:
            self._abort(TransferAbortedError(
                f"peer unresponsive for {idle} us",
                bytes_acked=self.bytes_acked()))

    def bytes_acked(self) -> int:
        return sum(len(self.chunks[i])
                   for i in range(min(self.cumulative_ack, self.total)))

    # -- peer events ---------------------------------------------------------

    def on_packet(self, pkt: TransferPacket):
        if self.closed:
            return
        if pkt.kind == wire.ACK:
            self.on_ack(pkt.ack_seq)
        elif pkt.kind == wire.NAK:
            self.on_nak(pkt.ranges)
        elif pkt.kind == wire.FIN:
            self.on_fin_echo()

    def on_ack(self, ack_seq: int):
        self.stats.acks_received += 1
        self._last_progress_time = self.env.now()
        if ack_seq > self.total:
            self._abort(ProtocolViolationError(
                f"ACK {ack_seq} beyond highest sequence {self.total}"))
            return
        if ack_seq > self.cumulative_ack:
            for seq in range(self.cumulative_ack, ack_seq):
                self.send_buffer.pop(seq, None)
            self.cumulative_ack = ack_seq

    def on_nak(self, ranges):
        self.stats.naks_received += 1
        self._last_progress_time = self.env.now()
        self.nak_in_interval = True
        self.rate = max(self.rate * self.config.rate_decrease,
                        self.config.rate_floor)
        self.rate_trace.append(self.rate)
        requeue = []
        for start, end in ranges:
            for seq in range(start, min(end, self.total - 1) + 1):
                if seq in self.send_buffer and seq not in self.retransmit_set:
                    requeue.append(seq)
                    self.retransmit_set.add(seq)
        # Lost packets jump the queue ahead of first transmissions.
        self.retransmit_q[:0] = requeue

    def on_fin_echo(self):
        # The receiver only echoes FIN once reassembly is complete, which
        # also implicitly acknowledges everything still in flight.
        self._last_progress_time = self.env.now()
        self.cumulative_ack = self.total
        self.send_buffer.clear()
        self._finish()


class ReceiverSession(_SessionBase):
    """Reassembles the peer's stream; NAKs gaps the moment they appear."""

    def __init__(self, env, peer, peer_port, local_port, session_id, config):
        super().__init__(env, peer, peer_port, local_port, session_id, config)
        self.recv_buf = {}
        self.next_expected = 0
        self.max_seen = -1
        self.total = None
        self.assembled = bytearray()
        self._last_packet_time = env.now()

    def start(self):
        self._ack_tick()

    def _ack_tick(self):
        if self.closed:
            return
        self.send_ack()
        self._check_dead()
        self._later(self.config.ack_interval_us, self._ack_tick)

    def _check_dead(self):
        idle = self.env.now() - self._last_packet_time
        if not self.completion.done and idle > self.config.dead_timeout_us:
            self._abort(TransferAbortedError(
                f"sender silent for {idle} us",
                bytes_acked=len(self.assembled)))

    def send_ack(self):
        self.stats.acks_sent += 1
        self._send(TransferPacket(kind=wire.ACK, session_id=self.session_id,
                                  ack_seq=self.next_expected))

    def _send_nak(self, ranges):
        self.stats.naks_sent += 1
        self._send(TransferPacket(kind=wire.NAK, session_id=self.session_id,
                                  ranges=ranges))

    def on_packet(self, pkt: TransferPacket):
        if self.closed:
            return
        if pkt.kind == wire.DATA:
            self.on_data(pkt.seq, pkt.payload)
        elif pkt.kind == wire.FIN:
            self.on_fin(pkt.final_seq)

    def on_data(self, seq: int, payload: bytes):
        self.stats.data_packets_received += 1
        self._last_packet_time = self.env.now()
        if self.total is not None and seq >= self.total:
            return  # beyond the announced end; drop as garbage
        if seq < self.next_expected or seq in self.recv_buf:
            self.stats.duplicates += 1
            return
        # Gap check comes before anything else touches the state.
        if seq > self.max_seen + 1:
            self._send_nak([(self.max_seen + 1, seq - 1)])
        if seq > self.max_seen:
            self.max_seen = seq
        self.recv_buf[seq] = payload
        while self.next_expected in self.recv_buf:
            self.assembled.extend(self.recv_buf.pop(self.next_expected))
            self.next_expected += 1
        self._check_complete()

    def on_fin(self, final_seq: int):
        self._last_packet_time = self.env.now()
        if self.total is None:
            self.total = final_seq
        # A FIN re-reveals every outstanding gap, including tail loss that
        # no later DATA packet could expose.
        missing = self.missing_ranges()
        if missing:
            self._send_nak(missing)
        self._check_complete()

    def missing_ranges(self):
        """Sorted inclusive ranges still absent below the known maximum."""
        ranges = []
        start = None
        limit = self.max_seen if self.total is None else self.total - 1
        for seq in range(self.next_expected, limit + 1):
            if seq in self.recv_buf:
                if start is not None:
                    ranges.append((start, seq - 1))
                    start = None
            elif start is None:
                start = seq
        if start is not None:
            ranges.append((start, limit))
        return ranges

    def _check_complete(self):
        if self.total is not None and self.next_expected >= self.total:
            self.send_ack()
            self._send(TransferPacket(kind=wire.FIN, session_id=self.session_id,
                                      final_seq=self.total))
            self._finish(bytes(self.assembled))


class TransferEndpoint:
    """Binds one port, parses frames, and routes them to its sessions.

    A listening endpoint accepts handshakes and spins up one session per
    initiator; a connecting endpoint drives the client half of the
    handshake and yields the established session through a Pending.
    """

    def __init__(self, env, config: TransferConfig, port: int = None,
                 rng: SplitMix64 = None):
        self.env = env
        self.config = config
        self.port = env.alloc_port() if port is None else port
        self.rng = rng or SplitMix64(0xC0FFEE)
        self.sessions = {}          # session_id -> session
        self.payload_factory = None  # set on listeners that serve data
        self._pending_connects = {}  # session_id -> connect state dict
        env.bind(self.port, self._on_frame)

    def close(self):
        for session in list(self.sessions.values()):
            session.close()
        self.sessions.clear()
        self.env.unbind(self.port)

    # -- listener side -------------------------------------------------------

    def listen(self, payload_factory):
        """Serve data: factory(session_id, peer) -> payload bytes."""
        self.payload_factory = payload_factory

    def _accept(self, src, src_port, pkt):
        expected = wire.mac_token(self.config.psk, pkt.session_id, pkt.nonce,
                                  b"I")
        if pkt.mac != expected:
            # Refuse before any session state exists; no DATA ever flows.
            self.env.send(src, src_port,
                          TransferPacket(kind=wire.FIN,
                                         session_id=pkt.session_id).encode(),
                          src_port=self.port)
            return
        session = self.sessions.get(pkt.session_id)
        if session is None:
            if self.payload_factory is None:
                return
            payload = self.payload_factory(pkt.session_id, src)
            session = SenderSession(self.env, src, src_port, self.port,
                                    pkt.session_id, self.config, payload)
            self.sessions[pkt.session_id] = session
            started = False
        else:
            started = True
        ack = TransferPacket(kind=wire.HANDSHAKE_ACK, session_id=pkt.session_id,
                             nonce=pkt.nonce,
                             mac=wire.mac_token(self.config.psk, pkt.session_id,
                                                pkt.nonce, b"R"))
        self.env.send(src, src_port, ack.encode(), src_port=self.port)
        if not started:
            session.start()

    # -- initiator side --------------------------------------------------------

    def connect(self, peer: str, peer_port: int) -> Pending:
        """Handshake toward a listener; resolves to a ReceiverSession."""
        session_id = (self.rng.next_u64() & 0xFFFFFFFF) or 1
        nonce = self.rng.next_u64() & 0xFFFFFFFF
        state = {"nonce": nonce, "peer": peer, "peer_port": peer_port,
                 "attempts": 0, "result": Pending(), "timer": None}
        self._pending_connects[session_id] = state
        self._send_handshake(session_id)
        return state["result"]

    def _send_handshake(self, session_id):
        state = self._pending_connects.get(session_id)
        if state is None or state["result"].done:
            return
        if state["attempts"] >= self.config.handshake_retries:
            del self._pending_connects[session_id]
            state["result"].fail(ConnectFailedError(
                f"no handshake answer from {state['peer']}:{state['peer_port']} "
                f"after {state['attempts']} attempts"))
            return
        state["attempts"] += 1
        pkt = TransferPacket(kind=wire.HANDSHAKE, session_id=session_id,
                             nonce=state["nonce"],
                             mac=wire.mac_token(self.config.psk, session_id,
                                                state["nonce"], b"I"))
        self.env.send(state["peer"], state["peer_port"], pkt.encode(),
                      src_port=self.port)
        state["timer"] = self.env.call_later(
            self.config.handshake_timeout_us,
            lambda: self._send_handshake(session_id))

    def _establish(self, session_id, src, src_port):
        state = self._pending_connects.pop(session_id, None)
        if state is None:
            return None
        if state["timer"] is not None:
            state["timer"].cancel()
        session = ReceiverSession(self.env, src, src_port, self.port,
                                  session_id, self.config)
        self.sessions[session_id] = session
        session.start()
        state["result"].resolve(session)
        return session

    # -- dispatch ---------------------------------------------------------------

    def _on_frame(self, src, src_port, data):
        try:
            pkt = TransferPacket.decode(data)
        except Exception:
            return  # garbage on the wire is dropped, never fatal
        if pkt.kind == wire.HANDSHAKE:
            self._accept(src, src_port, pkt)
            return
        if pkt.session_id in self._pending_connects:
            state = self._pending_connects[pkt.session_id]
            if pkt.kind == wire.HANDSHAKE_ACK:
                expected = wire.mac_token(self.config.psk, pkt.session_id,
                                          state["nonce"], b"R")
                if pkt.mac == expected and pkt.nonce == state["nonce"]:
                    self._establish(pkt.session_id, src, src_port)
                return
            if pkt.kind == wire.FIN:
                state["result"].fail(AuthFailedError(
                    f"{src}:{src_port} refused the session"))
                if state["timer"] is not None:
                    state["timer"].cancel()
                del self._pending_connects[pkt.session_id]
                return
            if pkt.kind == wire.DATA:
                # The HANDSHAKE_ACK was lost but the responder clearly
                # accepted; promote, then process the packet normally.
                session = self._establish(pkt.session_id, src, src_port)
                if session is not None:
                    session.on_packet(pkt)
                return
            return
        session = self.sessions.get(pkt.session_id)
        if session is not None:
            session.on_packet(pkt)
