"""Overlay record types: advertisements, queries, answers, peer entries."""

import hashlib
from dataclasses import dataclass, field

from ..errors import InvalidInputError
from ..hashing import fnv1a64


def node_id_from_name(name: str) -> int:
    """Stable non-zero 128-bit identifier derived from a node's address."""
    digest = hashlib.blake2b(name.encode("utf-8"), digest_size=16).digest()
    value = int.from_bytes(digest, "little")
    return value or 1


def hash_service(service_name: str) -> int:
    """64-bit bucket key for a service name (FNV-1a over UTF-8)."""
    if not service_name:
        raise InvalidInputError("service name must be non-empty")
    return fnv1a64(service_name)


@dataclass
class Advertisement:
    node_id: int
    service_name: str
    endpoints: list          # [(address, port)], at least one
    issued_at: int           # logical time, microseconds
    ttl: int                 # logical duration, microseconds

    def __post_init__(self):
        if not self.service_name:
            raise InvalidInputError("advertised service name must be non-empty")
        if not self.endpoints:
            raise InvalidInputError("advertisement needs at least one endpoint")

    def expired(self, now: int) -> bool:
        return now > self.issued_at + self.ttl


@dataclass
class BindingQuery:
    query_id: int
    requester: int           # requester's node id
    service_name: str
    reply_endpoint: tuple    # (address, port)
    hop_count: int = 0


@dataclass
class BindingAnswer:
    query_id: int
    advertisement: Advertisement = None  # None signals not-found

    @property
    def found(self) -> bool:
        return self.advertisement is not None


@dataclass(order=True)
class PeerEntry:
    node_id: int
    address: str = field(compare=False)
    last_seen: int = field(compare=False, default=0)
