"""Overlay state machines: edge nodes publish and query; super nodes
store advertisements, route binding queries, and keep each other alive.

Routing is bounded flooding with reverse-path answers: a super node that
cannot satisfy a query locally forwards it once to every known peer
except the one it came from, as long as hop budget remains.  Each super
node remembers which neighbour first showed it a query id; answers walk
that chain back to the requester.  In any connected super-node graph a
published service is therefore found exactly when the requester's super
node can reach the advertiser's within the hop budget, which is what the
completeness suite checks with a breadth-first-search oracle.

Liveness: every maintenance tick a super node scores the pings it sent
last tick (silence increments a failure counter, a purge follows the
configured number of consecutive misses), expires stale advertisements,
pings a random subset of peers, and swaps peer lists with one random
peer.  Purged peers are tombstoned so third-party gossip cannot
resurrect them; only fresh evidence (a ping/exchange from the node
itself, or an entry strictly newer than the purge) readmits them.

Everything here is single-threaded and event-driven; the environment
(simulated or real transport) owns the clock and the wire.
"""

from collections import OrderedDict
from dataclasses import dataclass

from ..errors import (AlreadyExistsError, ConnectFailedError,
                      DiscoveryTimeoutError, InvalidInputError)
from ..hashing import fnv1a64
from ..pending import Pending
from ..rng import SplitMix64
from ..transfer.session import TransferConfig, TransferEndpoint
from . import wire
from .types import (Advertisement, BindingAnswer, BindingQuery, PeerEntry,
                    hash_service, node_id_from_name)

OVERLAY_PORT = 0

_SEEN_QUERY_LIMIT = 4096


@dataclass
class OverlayConfig:
    max_hops: int = 8
    ping_subset: int = 3             # peers pinged per maintenance tick
    purge_threshold: int = 3         # consecutive missed pings before purge
    ad_ttl_us: int = 60_000_000
    maintenance_interval_us: int = 1_000_000
    publish_timeout_us: int = 500_000
    publish_retries: int = 3
    query_timeout_us: int = 2_000_000


class _OverlayBase:
    def __init__(self, env, config: OverlayConfig, rng):
        self.env = env
        self.config = config
        self.rng = rng if rng is not None else SplitMix64(fnv1a64(env.address))
        self.node_id = node_id_from_name(env.address)
        self.malformed_frames = 0
        env.bind(OVERLAY_PORT, self._on_frame)

    def _send(self, dst: str, data: bytes) -> None:
        self.env.send(dst, OVERLAY_PORT, data, src_port=OVERLAY_PORT)

    def _on_frame(self, src: str, src_port: int, data: bytes) -> None:
        try:
            kind, msg = wire.decode_frame(data)
        except Exception:
            self.malformed_frames += 1
            return
        self.handle(src, kind, msg)

    def handle(self, src, kind, msg):  # pragma: no cover - overridden
        raise NotImplementedError


class EdgeNode(_OverlayBase):
    """A service-publishing / service-consuming endpoint."""

    def __init__(self, env, config: OverlayConfig = OverlayConfig(),
                 rng=None, transfer_config: TransferConfig = TransferConfig()):
        super().__init__(env, config, rng)
        self.transfer_config = transfer_config
        self.pipes = {}              # service -> TransferEndpoint
        self.served = {}             # service -> payload provider
        self._publishes = {}         # (super_addr, service) -> op state
        self._queries = {}           # query_id -> op state
        self._resolved_queries = set()
        self.stats_suppressed_answers = 0
        self.stats_negative_answers = 0

    # -- pipes and serving -------------------------------------------------

    def create_input_pipe(self, service_name: str):
        """Bind a listening transfer endpoint for a service."""
        if not service_name:
            raise InvalidInputError("service name must be non-empty")
        if service_name in self.pipes:
            raise AlreadyExistsError(
                f"service {service_name!r} already has an input pipe")
        endpoint = TransferEndpoint(self.env, self.transfer_config,
                                    rng=self.rng.split(f"pipe:{service_name}"))
        endpoint.listen(lambda session_id, peer, svc=service_name:
                        self._payload_for(svc))
        self.pipes[service_name] = endpoint
        return (self.env.address, endpoint.port)

    def _payload_for(self, service: str) -> bytes:
        provider = self.served.get(service)
        return provider() if provider is not None else b""

    def serve_payload(self, service_name: str, provider) -> None:
        """Arm the pipe: provider() -> bytes streamed to the next session."""
        if service_name not in self.pipes:
            self.create_input_pipe(service_name)
        self.served[service_name] = provider

    def withdraw_service(self, service_name: str) -> None:
        endpoint = self.pipes.pop(service_name, None)
        self.served.pop(service_name, None)
        if endpoint is not None:
            endpoint.close()

    def advertisement(self, service_name: str) -> Advertisement:
        endpoint = self.pipes[service_name]
        return Advertisement(node_id=self.node_id, service_name=service_name,
                             endpoints=[(self.env.address, endpoint.port)],
                             issued_at=self.env.now(),
                             ttl=self.config.ad_ttl_us)

    # -- publishing ----------------------------------------------------------

    def publish_advertisement(self, super_addr: str,
                              service_name: str = None) -> Pending:
        """Push advertisements to a super node; resolves once all are acked."""
        services = [service_name] if service_name else sorted(self.pipes)
        if not services or any(s not in self.pipes for s in services):
            raise InvalidInputError("node has no input pipe for that service")
        result = Pending()
        remaining = set(services)

        def one_done(service):
            remaining.discard(service)
            if not remaining:
                result.resolve(True)

        for service in services:
            self._publish_one(super_addr, service, one_done, result)
        return result

    def _publish_one(self, super_addr, service, on_acked, result):
        key = (super_addr, service)
        state = {"attempts": 0, "timer": None, "on_acked": on_acked,
                 "result": result}
        self._publishes[key] = state
        self._publish_attempt(key)

    def _publish_attempt(self, key):
        state = self._publishes.get(key)
        if state is None or state["result"].done:
            return
        super_addr, service = key
        if state["attempts"] >= self.config.publish_retries:
            del self._publishes[key]
            state["result"].fail(DiscoveryTimeoutError(
                f"super node {super_addr} did not acknowledge "
                f"{service!r} after {state['attempts']} attempts"))
            return
        state["attempts"] += 1
        self._send(super_addr, wire.encode_advertise(self.advertisement(service)))
        state["timer"] = self.env.call_later(
            self.config.publish_timeout_us, lambda: self._publish_attempt(key))

    # -- querying ---------------------------------------------------------------

    def query_service(self, service_name: str, super_addr: str) -> Pending:
        """Resolve a service through a super node.

        The Pending yields a BindingAnswer; one with a None advertisement
        means not-found (the query timed out or was negatively answered
        everywhere).
        """
        if not service_name:
            raise InvalidInputError("service name must be non-empty")
        query_id = self.rng.next_u64()
        query = BindingQuery(query_id=query_id, requester=self.node_id,
                             service_name=service_name,
                             reply_endpoint=(self.env.address, OVERLAY_PORT),
                             hop_count=0)
        result = Pending()
        timer = self.env.call_later(
            self.config.query_timeout_us,
            lambda: self._conclude_query(query_id,
                                         BindingAnswer(query_id=query_id)))
        self._queries[query_id] = {"result": result, "timer": timer}
        self._send(super_addr, wire.encode_query(query))
        return result

    def _conclude_query(self, query_id, answer):
        state = self._queries.pop(query_id, None)
        if state is None:
            return
        state["timer"].cancel()
        self._resolved_queries.add(query_id)
        state["result"].resolve(answer)

    # -- connection establishment --------------------------------------------

    def establish_connection(self, answer: BindingAnswer,
                             transfer_config: TransferConfig = None) -> Pending:
        """Handshake toward the answer's endpoints, first reachable wins."""
        if not answer.found or not answer.advertisement.endpoints:
            raise InvalidInputError("answer carries no endpoints to connect to")
        config = transfer_config or self.transfer_config
        endpoint = TransferEndpoint(self.env, config,
                                    rng=self.rng.split("connector"))
        result = Pending()
        endpoints = list(answer.advertisement.endpoints)
        attempts = []

        def try_next(index):
            if index >= len(endpoints):
                endpoint.close()
                result.fail(ConnectFailedError(
                    f"all {len(endpoints)} endpoints unreachable: {attempts}",
                    attempts=attempts))
                return
            address, port = endpoints[index]
            pending = endpoint.connect(address, port)

            def finished(p):
                if p.failed:
                    attempts.append((address, port, str(p.error)))
                    try_next(index + 1)
                else:
                    session = p.result()
                    session.endpoint = endpoint  # for teardown by the caller
                    result.resolve(session)

            pending.on_done(finished)

        try_next(0)
        return result

    # -- inbound ------------------------------------------------------------------

    def handle(self, src, kind, msg):
        if kind == wire.QUERY:
            self._answer_query(src, msg)
        elif kind == wire.ANSWER:
            self._on_answer(msg)
        elif kind == wire.ADVERTISE_ACK:
            self._on_advertise_ack(src, msg)
        elif kind == wire.PING:
            self._send(src, wire.encode_pong(self.node_id, msg.nonce))

    def _answer_query(self, src, query: BindingQuery):
        """A super node delivered a query naming this node as the advertiser."""
        if query.service_name in self.pipes:
            answer = BindingAnswer(query_id=query.query_id,
                                   advertisement=self.advertisement(
                                       query.service_name))
        else:
            answer = BindingAnswer(query_id=query.query_id)  # withdrawn
        self._send(src, wire.encode_answer(answer))

    def _on_answer(self, answer: BindingAnswer):
        if answer.query_id in self._resolved_queries:
            self.stats_suppressed_answers += 1
            return
        if answer.query_id not in self._queries:
            self.stats_suppressed_answers += 1
            return
        if not answer.found:
            # Negative answers (hop exhaustion, withdrawal) don't conclude
            # the search; another branch may still succeed.  The timeout does.
            self.stats_negative_answers += 1
            return
        self._conclude_query(answer.query_id, answer)

    def _on_advertise_ack(self, src, ack):
        key = (src, ack.service_name)
        state = self._publishes.pop(key, None)
        if state is None:
            return
        if state["timer"] is not None:
            state["timer"].cancel()
        state["on_acked"](ack.service_name)


class SuperNode(_OverlayBase):
    """Rendezvous node: advertisement table, peer list, query routing."""

    def __init__(self, env, config: OverlayConfig = OverlayConfig(),
                 rng=None, peer_addrs=()):
        super().__init__(env, config, rng)
        self.peers = []              # sorted PeerEntry list, self excluded
        self.ad_table = {}           # bucket key -> [Advertisement]
        self.ad_src = {}             # (node_id, service) -> advertiser address
        self.ping_failures = {}      # node_id -> consecutive misses
        self.outstanding_pings = {}  # node_id -> nonce awaiting PONG
        self.tombstones = {}         # node_id -> purge time
        self.seen_queries = OrderedDict()  # query_id -> upstream address
        self._exchange_outstanding = set()
        self.stats_purged = 0
        self.stats_queries_dropped = 0
        self._tick_timer = None
        for addr in peer_addrs:
            if addr != env.address:
                self._upsert_peer(node_id_from_name(addr), addr, 0)

    # -- peer list upkeep ----------------------------------------------------

    def peer_addresses(self):
        return [p.address for p in self.peers]

    def _find_peer(self, node_id):
        for entry in self.peers:
            if entry.node_id == node_id:
                return entry
        return None

    def _upsert_peer(self, node_id, address, last_seen, fresh=False):
        """Insert or refresh a peer, keeping the list sorted and unique.

        ``fresh`` marks first-hand evidence the node is alive (a message
        from the node itself); only that, or gossip strictly newer than
        the tombstone, may resurrect a purged peer.
        """
        if node_id == self.node_id:
            return
        purged_at = self.tombstones.get(node_id)
        if purged_at is not None:
            if not fresh and last_seen <= purged_at:
                return
            del self.tombstones[node_id]
        entry = self._find_peer(node_id)
        if entry is None:
            self.peers.append(PeerEntry(node_id=node_id, address=address,
                                        last_seen=last_seen))
            self.peers.sort()
        else:
            entry.address = address
            entry.last_seen = max(entry.last_seen, last_seen)

    def _touch_peer(self, src, node_id):
        self._upsert_peer(node_id, src, self.env.now(), fresh=True)
        self.ping_failures[node_id] = 0

    def _purge_peer(self, node_id):
        self.peers = [p for p in self.peers if p.node_id != node_id]
        self.tombstones[node_id] = self.env.now()
        self.ping_failures.pop(node_id, None)
        self.outstanding_pings.pop(node_id, None)
        self.stats_purged += 1

    # -- maintenance ------------------------------------------------------------

    def start(self):
        """Begin the periodic maintenance cycle."""
        if self._tick_timer is None:
            self._tick_timer = self.env.call_later(
                self.config.maintenance_interval_us, self._tick)

    def stop(self):
        if self._tick_timer is not None:
            self._tick_timer.cancel()
            self._tick_timer = None

    def _tick(self):
        self.maintenance_tick()
        self._tick_timer = self.env.call_later(
            self.config.maintenance_interval_us, self._tick)

    def maintenance_tick(self):
        now = self.env.now()
        # 1. Score last tick's pings: silence is a miss.
        for node_id in list(self.outstanding_pings):
            self.ping_failures[node_id] = self.ping_failures.get(node_id, 0) + 1
        self.outstanding_pings.clear()
        # 2. Purge peers that missed too many pings in a row.
        for node_id, misses in list(self.ping_failures.items()):
            if misses >= self.config.purge_threshold:
                self._purge_peer(node_id)
        # 3. Expire stale advertisements.
        for bucket in list(self.ad_table):
            kept = [ad for ad in self.ad_table[bucket] if not ad.expired(now)]
            for ad in self.ad_table[bucket]:
                if ad.expired(now):
                    self.ad_src.pop((ad.node_id, ad.service_name), None)
            if kept:
                self.ad_table[bucket] = kept
            else:
                del self.ad_table[bucket]
        # 4. Ping a random subset of the current peer list.
        for entry in self.rng.sample(self.peers, self.config.ping_subset):
            nonce = self.rng.next_u64()
            self.outstanding_pings[entry.node_id] = nonce
            self._send(entry.address, wire.encode_ping(self.node_id, nonce))
        # 5. Anti-entropy: swap peer lists with one random live peer.
        live = [p for p in self.peers
                if self.ping_failures.get(p.node_id, 0) == 0]
        if live:
            partner = self.rng.choice(live)
            self._exchange_outstanding.add(partner.address)
            self._send(partner.address, wire.encode_peer_exchange(
                self.node_id, self._exchange_entries()))

    def _exchange_entries(self):
        mine = PeerEntry(node_id=self.node_id, address=self.env.address,
                         last_seen=self.env.now())
        return self.peers + [mine]

    # -- advertisement handling ----------------------------------------------

    def _live_matches(self, service_name, now):
        bucket = hash_service(service_name)
        return [ad for ad in self.ad_table.get(bucket, [])
                if ad.service_name == service_name and not ad.expired(now)]

    def _store_ad(self, ad: Advertisement, src: str):
        bucket = hash_service(ad.service_name)
        ads = self.ad_table.setdefault(bucket, [])
        for i, existing in enumerate(ads):
            if (existing.node_id == ad.node_id
                    and existing.service_name == ad.service_name):
                ads[i] = ad  # idempotent upsert refreshes issued_at
                break
        else:
            ads.append(ad)
        self.ad_src[(ad.node_id, ad.service_name)] = src

    # -- message handling ---------------------------------------------------------

    def handle(self, src, kind, msg):
        if kind == wire.ADVERTISE:
            self._store_ad(msg, src)
            self._send(src, wire.encode_advertise_ack(msg.node_id,
                                                      msg.service_name))
        elif kind == wire.QUERY:
            self.route_query(src, msg)
        elif kind == wire.ANSWER:
            self._route_answer(msg)
        elif kind == wire.PING:
            self._touch_peer(src, msg.node_id)
            self._send(src, wire.encode_pong(self.node_id, msg.nonce))
        elif kind == wire.PONG:
            if self.outstanding_pings.get(msg.node_id) == msg.nonce:
                del self.outstanding_pings[msg.node_id]
            self._touch_peer(src, msg.node_id)
        elif kind == wire.PEER_EXCHANGE:
            self._on_peer_exchange(src, msg)

    def route_query(self, src, query: BindingQuery):
        """Local match -> deliver to the advertiser; else flood onward."""
        if query.query_id in self.seen_queries:
            return  # a copy already passed through here
        self.seen_queries[query.query_id] = src
        while len(self.seen_queries) > _SEEN_QUERY_LIMIT:
            self.seen_queries.popitem(last=False)
        now = self.env.now()
        matches = self._live_matches(query.service_name, now)
        if matches:
            for ad in matches:
                advertiser = self.ad_src.get((ad.node_id, ad.service_name))
                if advertiser is not None:
                    self._send(advertiser, wire.encode_query(query))
            return
        if query.hop_count + 1 > self.config.max_hops:
            self.stats_queries_dropped += 1
            self._send(src, wire.encode_answer(
                BindingAnswer(query_id=query.query_id)))
            return
        forwarded = BindingQuery(query_id=query.query_id,
                                 requester=query.requester,
                                 service_name=query.service_name,
                                 reply_endpoint=query.reply_endpoint,
                                 hop_count=query.hop_count + 1)
        encoded = wire.encode_query(forwarded)
        for entry in self.peers:
            if entry.address != src:
                self._send(entry.address, encoded)

    def _route_answer(self, answer: BindingAnswer):
        upstream = self.seen_queries.get(answer.query_id)
        if upstream is None:
            return  # unknown query; nothing to route back along
        self._send(upstream, wire.encode_answer(answer))

    def _on_peer_exchange(self, src, exchange):
        self._touch_peer(src, exchange.sender_id)
        for entry in exchange.entries:
            self._upsert_peer(entry.node_id, entry.address, entry.last_seen)
        if src in self._exchange_outstanding:
            self._exchange_outstanding.discard(src)  # this was the reply
        else:
            self._send(src, wire.encode_peer_exchange(
                self.node_id, self._exchange_entries()))
