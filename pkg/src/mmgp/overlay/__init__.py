"""Discovery plane: advertisements, super-node rendezvous, binding queries."""

from .node import OVERLAY_PORT, EdgeNode, OverlayConfig, SuperNode
from .types import (Advertisement, BindingAnswer, BindingQuery, PeerEntry,
                    hash_service, node_id_from_name)

__all__ = [
    "OVERLAY_PORT", "EdgeNode", "OverlayConfig", "SuperNode",
    "Advertisement", "BindingAnswer", "BindingQuery", "PeerEntry",
    "hash_service", "node_id_from_name",
]
