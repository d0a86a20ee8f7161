"""Deterministic in-process network under a virtual clock.

Messages travel over configured point-to-point links with seeded loss,
fixed or uniform-range latency, and optional serialization delay from a
bandwidth cap.  Delivery order is the total order (deliver_at, injection
sequence number), so identical scripts replay identical traces.

Per message the link RNG draws loss first and latency second (latency
only when the message survives); keeping the draw order fixed is part of
the determinism contract.
"""

import heapq
from dataclasses import dataclass, field

from ..errors import AlreadyExistsError, InvalidInputError
from ..rng import SplitMix64, derive_seed

_EVENT_MSG = 0
_EVENT_TIMER = 1


def ms_to_us(ms: float) -> int:
    return int(round(ms * 1000.0))


@dataclass
class SimLink:
    a: str
    b: str
    latency_us: object  # int, or (lo, hi) tuple for a uniform range
    loss: float
    bandwidth: int      # bytes per virtual second; 0 = unlimited
    rng: SplitMix64
    partitioned: bool = False
    epoch: int = 0      # bumped on partition; strands in-flight messages
    injected: int = 0
    delivered: int = 0
    dropped_loss: int = 0
    dropped_partition: int = 0

    def draw_latency(self) -> int:
        if isinstance(self.latency_us, tuple):
            lo, hi = self.latency_us
            if hi < lo:
                raise InvalidInputError("latency range must have lo <= hi")
            return lo + self.rng.next_u64() % (hi - lo + 1)
        return self.latency_us


class Timer:
    __slots__ = ("fired_at", "fn", "cancelled")

    def __init__(self, fired_at, fn):
        self.fired_at = fired_at
        self.fn = fn
        self.cancelled = False

    def cancel(self):
        self.cancelled = True


class SimNode:
    """A network attachment point: named, with per-port message handlers.

    Protocol state machines use this object as their whole environment:
    ``send``/``bind`` for I/O, ``now``/``call_later`` for time.  A real
    transport runner only has to offer the same surface.
    """

    def __init__(self, net: "SimNet", name: str):
        self.net = net
        self.name = name
        self._ports = {}
        self.unrouted = 0  # deliveries to ports nobody bound

    @property
    def address(self) -> str:
        return self.name

    def now(self) -> int:
        return self.net.now

    def bind(self, port: int, handler) -> None:
        if port in self._ports:
            raise AlreadyExistsError(f"port {port} already bound on {self.name}")
        self._ports[port] = handler

    def unbind(self, port: int) -> None:
        self._ports.pop(port, None)

    def alloc_port(self) -> int:
        port = max(self._ports, default=0) + 1
        return port

    def send(self, dst: str, port: int, data: bytes, src_port: int = 0) -> None:
        self.net.send(self.name, dst, port, data, src_port=src_port)

    def call_later(self, delay_us: int, fn) -> Timer:
        return self.net.call_at(self.net.now + delay_us, fn)

    def call_at(self, at_us: int, fn) -> Timer:
        return self.net.call_at(at_us, fn)

    def deliver(self, src: str, src_port: int, port: int, data: bytes) -> None:
        handler = self._ports.get(port)
        if handler is None:
            self.unrouted += 1
            return
        handler(src, src_port, data)


class SimNet:
    def __init__(self, master_seed: int = 0, trace: bool = False):
        self.now = 0
        self.master_seed = master_seed
        self._seq = 0
        self._heap = []
        self.nodes = {}
        self.links = {}
        self.trace_enabled = trace
        self.trace_rows = []  # (time_us, event, src, dst, port, kind_byte, size)

    # -- topology ---------------------------------------------------------

    def add_node(self, name: str) -> SimNode:
        if name in self.nodes:
            raise AlreadyExistsError(f"node {name} already exists")
        node = SimNode(self, name)
        self.nodes[name] = node
        return node

    def add_link(self, a: str, b: str, latency_ms=0.0, loss: float = 0.0,
                 bandwidth: int = 0, seed=None) -> SimLink:
        if a not in self.nodes or b not in self.nodes:
            raise InvalidInputError(f"link endpoints {a}/{b} must be nodes")
        key = frozenset((a, b))
        if key in self.links:
            raise AlreadyExistsError(f"link {a}-{b} already exists")
        if not 0.0 <= loss <= 1.0:
            raise InvalidInputError("loss probability must be in [0, 1]")
        if isinstance(latency_ms, tuple):
            latency_us = (ms_to_us(latency_ms[0]), ms_to_us(latency_ms[1]))
        else:
            latency_us = ms_to_us(latency_ms)
        if seed is None:
            seed = derive_seed(self.master_seed, f"link:{min(a, b)}|{max(a, b)}")
        link = SimLink(a=a, b=b, latency_us=latency_us, loss=loss,
                       bandwidth=bandwidth, rng=SplitMix64(seed))
        self.links[key] = link
        return link

    def link_between(self, a: str, b: str):
        return self.links.get(frozenset((a, b)))

    def node_rng(self, name: str) -> SplitMix64:
        return SplitMix64(derive_seed(self.master_seed, f"node:{name}"))

    # -- traffic ----------------------------------------------------------

    def _trace(self, event, src, dst, port, data):
        if self.trace_enabled:
            kind = data[0] if data else -1
            self.trace_rows.append((self.now, event, src, dst, port, kind,
                                    len(data)))

    def send(self, src: str, dst: str, port: int, data: bytes,
             src_port: int = 0) -> bool:
        link = self.link_between(src, dst)
        if link is None:
            self._trace("drop_nolink", src, dst, port, data)
            return False
        return self.inject(link, src, dst, port, data, src_port=src_port)

    def inject(self, link: SimLink, src: str, dst: str, port: int,
               data: bytes, src_port: int = 0) -> bool:
        """Schedule one message on a link; returns False when dropped."""
        link.injected += 1
        if link.partitioned:
            link.dropped_partition += 1
            self._trace("drop_partition", src, dst, port, data)
            return False
        if link.loss > 0.0 and link.rng.random() < link.loss:
            link.dropped_loss += 1
            self._trace("drop_loss", src, dst, port, data)
            return False
        latency = link.draw_latency()
        ser = 0
        if link.bandwidth > 0:
            ser = (len(data) * 1_000_000 + link.bandwidth - 1) // link.bandwidth
        deliver_at = self.now + latency + ser
        self._seq += 1
        heapq.heappush(self._heap, (deliver_at, self._seq, _EVENT_MSG,
                                    (link, link.epoch, src, src_port, dst, port,
                                     data)))
        self._trace("send", src, dst, port, data)
        return True

    def call_at(self, at_us: int, fn) -> Timer:
        if at_us < self.now:
            at_us = self.now
        timer = Timer(at_us, fn)
        self._seq += 1
        heapq.heappush(self._heap, (at_us, self._seq, _EVENT_TIMER, timer))
        return timer

    def partition(self, a: str, b: str) -> None:
        link = self.link_between(a, b)
        if link is None:
            raise InvalidInputError(f"no link {a}-{b} to partition")
        link.partitioned = True
        link.epoch += 1  # strands everything currently in flight

    def heal(self, a: str, b: str) -> None:
        link = self.link_between(a, b)
        if link is None:
            raise InvalidInputError(f"no link {a}-{b} to heal")
        link.partitioned = False

    def partition_node(self, name: str) -> None:
        for link in self.links.values():
            if name in (link.a, link.b):
                link.partitioned = True
                link.epoch += 1

    # -- the clock --------------------------------------------------------

    def advance(self, until_us: int) -> None:
        """Deliver everything due at or before ``until_us``, in order."""
        if until_us < self.now:
            raise InvalidInputError("cannot advance the clock backwards")
        while self._heap and self._heap[0][0] <= until_us:
            at, _, event, payload = heapq.heappop(self._heap)
            self.now = at
            if event == _EVENT_TIMER:
                if not payload.cancelled:
                    payload.fn()
                continue
            link, epoch, src, src_port, dst, port, data = payload
            if link.partitioned or epoch != link.epoch:
                link.dropped_partition += 1
                self._trace("drop_partition", src, dst, port, data)
                continue
            link.delivered += 1
            self._trace("deliver", src, dst, port, data)
            node = self.nodes.get(dst)
            if node is not None:
                node.deliver(src, src_port, port, data)
        self.now = until_us

    def run_for(self, duration_us: int) -> None:
        self.advance(self.now + duration_us)

    def run_until(self, pred, timeout_us: int) -> bool:
        """Advance event by event until pred() holds; False on timeout."""
        deadline = self.now + timeout_us
        while True:
            if pred():
                return True
            if not self._heap or self._heap[0][0] > deadline:
                self.advance(deadline)
                return pred()
            self.advance(self._heap[0][0])

    # -- trace export ------------------------------------------------------

    def trace_csv(self, kind_namer=None) -> bytes:
        """The event trace as CSV (time, event, src, dst, kind, size)."""
        out = ["time_us,event,src,dst,kind,size"]
        for time_us, event, src, dst, port, kind, size in self.trace_rows:
            name = kind_namer(port, kind) if kind_namer else str(kind)
            out.append(f"{time_us},{event},{src},{dst},{name},{size}")
        return ("\n".join(out) + "\n").encode()
