"""Reliable-UDP transfer engine and the copy command built on top of it."""

from .copy import (CodecParams, OPTION_COMPRESS, OPTION_UDT, TransferReport,
                   mmgp_copy, prepare_payload, unpack_payload)
from .session import (ReceiverSession, SenderSession, SessionStats,
                      TransferConfig, TransferEndpoint)
from .wire import (ACK, DATA, FIN, HANDSHAKE, HANDSHAKE_ACK, NAK,
                   TransferPacket, mac_token)

__all__ = [
    "CodecParams", "OPTION_COMPRESS", "OPTION_UDT", "TransferReport",
    "mmgp_copy", "prepare_payload", "unpack_payload",
    "ReceiverSession", "SenderSession", "SessionStats", "TransferConfig",
    "TransferEndpoint",
    "ACK", "DATA", "FIN", "HANDSHAKE", "HANDSHAKE_ACK", "NAK",
    "TransferPacket", "mac_token",
]
