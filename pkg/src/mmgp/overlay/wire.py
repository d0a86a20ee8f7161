"""Overlay control-plane framing.

Frames are u8 message type + u16 body length + body.  All integers are
little-endian; strings are u16-length-prefixed UTF-8; node ids are 16
raw bytes; endpoint lists are u16-counted.  ADVERTISE_ACK closes the
publish loop (an advertiser needs a positive signal to distinguish a
stored advertisement from a dead super node).
"""

import struct
from dataclasses import dataclass

from ..errors import CorruptDataError
from .types import Advertisement, BindingAnswer, BindingQuery, PeerEntry

ADVERTISE = 1
QUERY = 2
ANSWER = 3
PING = 4
PONG = 5
PEER_EXCHANGE = 6
ADVERTISE_ACK = 7

KIND_NAMES = {ADVERTISE: "ADVERTISE", QUERY: "QUERY", ANSWER: "ANSWER",
              PING: "PING", PONG: "PONG", PEER_EXCHANGE: "PEER_EXCHANGE",
              ADVERTISE_ACK: "ADVERTISE_ACK"}


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptDataError("overlay frame body truncated")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def node_id(self) -> int:
        return int.from_bytes(self.take(16), "little")

    def text(self) -> str:
        return self.take(self.u16()).decode("utf-8")

    def done(self) -> None:
        if self.pos != len(self.data):
            raise CorruptDataError("trailing bytes in overlay frame body")


def _u16(v: int) -> bytes:
    return struct.pack("<H", v)


def _u64(v: int) -> bytes:
    return struct.pack("<Q", v)


def _nid(v: int) -> bytes:
    return v.to_bytes(16, "little")


def _text(s: str) -> bytes:
    raw = s.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise CorruptDataError("string field too long for the wire")
    return _u16(len(raw)) + raw


def _frame(kind: int, body: bytes) -> bytes:
    if len(body) > 0xFFFF:
        raise CorruptDataError("overlay frame body too long")
    return struct.pack("<BH", kind, len(body)) + body


def _ad_bytes(ad: Advertisement) -> bytes:
    body = _nid(ad.node_id) + _text(ad.service_name) + _u16(len(ad.endpoints))
    for address, port in ad.endpoints:
        body += _text(address) + _u16(port)
    return body + _u64(ad.issued_at) + _u64(ad.ttl)


def _read_ad(r: _Reader) -> Advertisement:
    node_id = r.node_id()
    service = r.text()
    endpoints = [(r.text(), r.u16()) for _ in range(r.u16())]
    issued_at = r.u64()
    ttl = r.u64()
    return Advertisement(node_id=node_id, service_name=service,
                         endpoints=endpoints, issued_at=issued_at, ttl=ttl)


def encode_advertise(ad: Advertisement) -> bytes:
    return _frame(ADVERTISE, _ad_bytes(ad))


def encode_advertise_ack(node_id: int, service_name: str) -> bytes:
    return _frame(ADVERTISE_ACK, _nid(node_id) + _text(service_name))


def encode_query(q: BindingQuery) -> bytes:
    body = (_u64(q.query_id) + _nid(q.requester) + _text(q.service_name)
            + _text(q.reply_endpoint[0]) + _u16(q.reply_endpoint[1])
            + _u16(q.hop_count))
    return _frame(QUERY, body)


def encode_answer(ans: BindingAnswer) -> bytes:
    body = _u64(ans.query_id) + bytes([1 if ans.found else 0])
    if ans.found:
        body += _ad_bytes(ans.advertisement)
    return _frame(ANSWER, body)


def encode_ping(node_id: int, nonce: int) -> bytes:
    return _frame(PING, _nid(node_id) + _u64(nonce))


def encode_pong(node_id: int, nonce: int) -> bytes:
    return _frame(PONG, _nid(node_id) + _u64(nonce))


def encode_peer_exchange(sender_id: int, entries) -> bytes:
    body = _nid(sender_id) + _u16(len(entries))
    for entry in entries:
        body += _nid(entry.node_id) + _text(entry.address) + _u64(entry.last_seen)
    return _frame(PEER_EXCHANGE, body)


@dataclass
class Ping:
    node_id: int
    nonce: int


@dataclass
class PeerExchange:
    sender_id: int
    entries: list


@dataclass
class AdvertiseAck:
    node_id: int
    service_name: str


def decode_frame(data: bytes):
    """Parse one frame into (kind, message object)."""
    if len(data) < 3:
        raise CorruptDataError("overlay frame shorter than its header")
    kind, length = struct.unpack_from("<BH", data)
    body = data[3:]
    if len(body) != length:
        raise CorruptDataError("overlay frame length field mismatch")
    r = _Reader(body)
    if kind == ADVERTISE:
        msg = _read_ad(r)
    elif kind == ADVERTISE_ACK:
        msg = AdvertiseAck(node_id=r.node_id(), service_name=r.text())
    elif kind == QUERY:
        msg = BindingQuery(query_id=r.u64(), requester=r.node_id(),
                           service_name=r.text(),
                           reply_endpoint=(r.text(), r.u16()),
                           hop_count=r.u16())
    elif kind == ANSWER:
        query_id = r.u64()
        found = r.u8()
        ad = _read_ad(r) if found else None
        msg = BindingAnswer(query_id=query_id, advertisement=ad)
    elif kind == PING:
        msg = Ping(node_id=r.node_id(), nonce=r.u64())
    elif kind == PONG:
        msg = Ping(node_id=r.node_id(), nonce=r.u64())
    elif kind == PEER_EXCHANGE:
        sender = r.node_id()
        entries = [PeerEntry(node_id=r.node_id(), address=r.text(),
                             last_seen=r.u64())
                   for _ in range(r.u16())]
        msg = PeerExchange(sender_id=sender, entries=entries)
    else:
        raise CorruptDataError(f"unknown overlay message type {kind}")
    r.done()
    return kind, msg
