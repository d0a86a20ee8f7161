"""Transfer packet framing.

Every frame starts with u8 kind + u32 session_id (little-endian), then
kind-specific fields:

    DATA           u32 seq, u16 length, payload
    ACK            u32 ack_seq (cumulative: everything below it arrived)
    NAK            u16 range count, then (u32 start, u32 end) inclusive pairs
    HANDSHAKE      u32 nonce, 16-byte keyed MAC
    HANDSHAKE_ACK  u32 nonce, 16-byte keyed MAC
    FIN            u32 final_seq (total DATA packet count; 0 when refusing)

A FIN sent in response to a HANDSHAKE is a refusal; a FIN from the
receiver after reassembly completes acknowledges the sender's FIN.
"""

import hashlib
import struct
from dataclasses import dataclass, field

from ..errors import CorruptDataError

DATA = 1
ACK = 2
NAK = 3
HANDSHAKE = 4
HANDSHAKE_ACK = 5
FIN = 6

KIND_NAMES = {DATA: "DATA", ACK: "ACK", NAK: "NAK", HANDSHAKE: "HANDSHAKE",
              HANDSHAKE_ACK: "HANDSHAKE_ACK", FIN: "FIN"}

_HEAD = struct.Struct("<BI")
DATA_HEADER_SIZE = _HEAD.size + 6  # + u32 seq + u16 length


def mac_token(psk, session_id: int, nonce: int, role: bytes) -> bytes:
    """16-byte keyed MAC binding a handshake message to the session."""
    if isinstance(psk, str):
        psk = psk.encode("utf-8")
    h = hashlib.blake2b(key=psk, digest_size=16)
    h.update(struct.pack("<IIc", session_id, nonce, role))
    return h.digest()


@dataclass
class TransferPacket:
    kind: int
    session_id: int
    seq: int = 0
    payload: bytes = b""
    ack_seq: int = 0
    ranges: list = field(default_factory=list)  # [(start, end)] inclusive
    nonce: int = 0
    mac: bytes = b""
    final_seq: int = 0

    def encode(self) -> bytes:
        head = _HEAD.pack(self.kind, self.session_id)
        if self.kind == DATA:
            return head + struct.pack("<IH", self.seq, len(self.payload)) \
                + self.payload
        if self.kind == ACK:
            return head + struct.pack("<I", self.ack_seq)
        if self.kind == NAK:
            body = struct.pack("<H", len(self.ranges))
            for start, end in self.ranges:
                body += struct.pack("<II", start, end)
            return head + body
        if self.kind in (HANDSHAKE, HANDSHAKE_ACK):
            return head + struct.pack("<I", self.nonce) + self.mac
        if self.kind == FIN:
            return head + struct.pack("<I", self.final_seq)
        raise CorruptDataError(f"cannot encode unknown kind {self.kind}")

    @classmethod
    def decode(cls, data: bytes) -> "TransferPacket":
        if len(data) < _HEAD.size:
            raise CorruptDataError("transfer frame shorter than header")
        kind, session_id = _HEAD.unpack_from(data)
        body = data[_HEAD.size:]
        pkt = cls(kind=kind, session_id=session_id)
        try:
            if kind == DATA:
                pkt.seq, length = struct.unpack_from("<IH", body)
                payload = body[6:]
                if len(payload) != length:
                    raise CorruptDataError("DATA length field mismatch")
                pkt.payload = payload
            elif kind == ACK:
                (pkt.ack_seq,) = struct.unpack_from("<I", body)
            elif kind == NAK:
                (count,) = struct.unpack_from("<H", body)
                if len(body) != 2 + 8 * count:
                    raise CorruptDataError("NAK range list truncated")
                prev_end = -1
                for i in range(count):
                    start, end = struct.unpack_from("<II", body, 2 + 8 * i)
                    if start > end or start <= prev_end:
                        raise CorruptDataError("NAK ranges must be sorted")
                    prev_end = end
                    pkt.ranges.append((start, end))
                if not pkt.ranges:
                    raise CorruptDataError("NAK must list at least one range")
            elif kind in (HANDSHAKE, HANDSHAKE_ACK):
                (pkt.nonce,) = struct.unpack_from("<I", body)
                pkt.mac = body[4:20]
                if len(pkt.mac) != 16:
                    raise CorruptDataError("handshake MAC truncated")
            elif kind == FIN:
                (pkt.final_seq,) = struct.unpack_from("<I", body)
            else:
                raise CorruptDataError(f"unknown transfer kind {kind}")
        except struct.error as exc:
            raise CorruptDataError(f"transfer frame truncated: {exc}") from exc
        return pkt
