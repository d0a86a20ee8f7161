"""Thin real-UDP runner for manual use.

Offers the protocol state machines the same environment surface the
simulated network does -- ``send``/``bind``/``now``/``call_later`` plus a
``run_until`` pump -- but backed by UDP sockets and the wall clock.  One
runner hosts one logical node; each bound port is its own socket, so
addresses on the wire are plain "ip" strings and ports are real UDP
ports, exactly as the wire formats expect.

All socket reads happen on the single thread that calls ``run_until`` /
``run_forever``; state machines never see concurrent access.
"""

import heapq
import select
import socket
import time

from .errors import InvalidInputError


class _UdpTimer:
    __slots__ = ("fired_at", "fn", "cancelled")

    def __init__(self, fired_at, fn):
        self.fired_at = fired_at
        self.fn = fn
        self.cancelled = False

    def cancel(self):
        self.cancelled = True


class UdpNode:
    """One node: control socket on a fixed port, extra sockets on demand."""

    def __init__(self, bind_ip: str = "0.0.0.0", control_port: int = 0,
                 public_ip: str = None):
        self._bind_ip = bind_ip
        self._sockets = {}    # logical port -> socket
        self._handlers = {}   # logical port -> handler
        self._timers = []
        self._seq = 0
        self._t0 = time.monotonic_ns()
        sock = self._make_socket(control_port)
        self._control_port = sock.getsockname()[1]
        self._sockets[0] = sock
        # ip:port keeps node identities unique even on one host.
        self.address = f"{public_ip or '127.0.0.1'}:{self._control_port}"

    def _make_socket(self, port: int):
        sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        sock.setblocking(False)
        sock.bind((self._bind_ip, port))
        return sock

    @property
    def control_port(self) -> int:
        return self._control_port

    def now(self) -> int:
        return (time.monotonic_ns() - self._t0) // 1000

    def bind(self, port: int, handler) -> None:
        self._handlers[port] = handler

    def unbind(self, port: int) -> None:
        self._handlers.pop(port, None)
        if port != 0 and port in self._sockets:
            self._sockets.pop(port).close()

    def alloc_port(self) -> int:
        sock = self._make_socket(0)
        port = sock.getsockname()[1]
        self._sockets[port] = sock
        return port

    def send(self, dst: str, port: int, data: bytes, src_port: int = 0) -> None:
        sock = self._sockets.get(src_port) or self._sockets[0]
        real_port = port if port != 0 else self._peer_control_port(dst)
        host = dst.split(":", 1)[0]
        sock.sendto(data, (host, real_port))

    @staticmethod
    def _peer_control_port(dst: str) -> int:
        if ":" not in dst:
            raise InvalidInputError(
                f"overlay peer address {dst!r} needs an ip:port form")
        return int(dst.split(":", 1)[1])

    def call_later(self, delay_us: int, fn) -> _UdpTimer:
        return self.call_at(self.now() + delay_us, fn)

    def call_at(self, at_us: int, fn) -> _UdpTimer:
        timer = _UdpTimer(at_us, fn)
        self._seq += 1
        heapq.heappush(self._timers, (at_us, self._seq, timer))
        return timer

    # -- the pump -----------------------------------------------------------

    def _poll_once(self, max_wait_us: int) -> None:
        while self._timers and self._timers[0][0] <= self.now():
            _, _, timer = heapq.heappop(self._timers)
            if not timer.cancelled:
                timer.fn()
        wait_us = max_wait_us
        if self._timers:
            wait_us = min(wait_us, max(0, self._timers[0][0] - self.now()))
        socks = list(self._sockets.values())
        by_sock = {sock: port for port, sock in self._sockets.items()}
        readable, _, _ = select.select(socks, [], [], wait_us / 1e6)
        for sock in readable:
            port = by_sock[sock]
            while True:
                try:
                    data, (ip, sport) = sock.recvfrom(65536)
                except BlockingIOError:
                    break
                except OSError:
                    break
                handler = self._handlers.get(port)
                if handler is not None:
                    # Overlay peers are addressed ip:port; transfer peers
                    # are addressed (ip, port) separately.
                    src = f"{ip}:{sport}" if port == 0 else ip
                    handler(src, sport, data)

    def run_until(self, pred, timeout_us: int) -> bool:
        deadline = self.now() + timeout_us
        while not pred():
            remaining = deadline - self.now()
            if remaining <= 0:
                return pred()
            self._poll_once(min(remaining, 50_000))
        return True

    def run_forever(self) -> None:  # pragma: no cover - interactive use
        while True:
            self._poll_once(200_000)

    def close(self) -> None:
        for sock in self._sockets.values():
            sock.close()
        self._sockets.clear()
        self._handlers.clear()
