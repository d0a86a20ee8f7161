"""Line-oriented scenario scripts driving the simulated network.

Grammar (one directive per line, ``#`` starts a comment):

    seed <n>
    node <id> [super]
    link <a> <b> [latency=<ms>|<lo>-<hi>] [loss=<p>] [bw=<Bps>] [seed=<n>]
    at <ms> pipe <node> <service>
    at <ms> advertise <node> <service> <super>
    at <ms> serve <node> <service> <path>
    at <ms> query <node> <service> <super>
    at <ms> partition <a> <b>
    at <ms> heal <a> <b>
    at <ms> silence <node>

Super nodes start their maintenance cycle at time zero with peer lists
seeded from their links to other super nodes.  Query outcomes are
collected on the runner for callers (tests, the CLI) to inspect.
"""

from dataclasses import dataclass, field

from ..errors import InvalidInputError
from ..overlay import EdgeNode, OverlayConfig, SuperNode
from ..overlay import wire as overlay_wire
from ..transfer import TransferConfig
from ..transfer import wire as transfer_wire
from .net import SimNet, ms_to_us

OVERLAY_PORT = 0


@dataclass
class ScenarioSpec:
    seed: int = 0
    nodes: list = field(default_factory=list)    # (name, is_super)
    links: list = field(default_factory=list)    # (a, b, kwargs)
    actions: list = field(default_factory=list)  # (at_us, tuple)


def _parse_latency(text: str):
    if "-" in text:
        lo, hi = text.split("-", 1)
        return (float(lo), float(hi))
    return float(text)


def parse_scenario(text: str) -> ScenarioSpec:
    spec = ScenarioSpec()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            head = parts[0]
            if head == "seed":
                spec.seed = int(parts[1])
            elif head == "node":
                is_super = len(parts) > 2 and parts[2] == "super"
                spec.nodes.append((parts[1], is_super))
            elif head == "link":
                a, b = parts[1], parts[2]
                kwargs = {}
                for item in parts[3:]:
                    key, value = item.split("=", 1)
                    if key == "latency":
                        kwargs["latency_ms"] = _parse_latency(value)
                    elif key == "loss":
                        kwargs["loss"] = float(value)
                    elif key == "bw":
                        kwargs["bandwidth"] = int(value)
                    elif key == "seed":
                        kwargs["seed"] = int(value)
                    else:
                        raise ValueError(f"unknown link option {key}")
                spec.links.append((a, b, kwargs))
            elif head == "at":
                at_us = ms_to_us(float(parts[1]))
                action = tuple(parts[2:])
                if not action:
                    raise ValueError("empty action")
                spec.actions.append((at_us, action))
            else:
                raise ValueError(f"unknown directive {head}")
        except (IndexError, ValueError) as exc:
            raise InvalidInputError(f"scenario line {lineno}: {exc}") from exc
    return spec


def overlay_kind_namer(port: int, kind: int) -> str:
    if kind < 0:
        return "empty"
    if port == OVERLAY_PORT:
        return overlay_wire.KIND_NAMES.get(kind, f"overlay-{kind}")
    return transfer_wire.KIND_NAMES.get(kind, f"transfer-{kind}")


class ScenarioRunner:
    """Builds the network a spec describes and executes its timeline."""

    def __init__(self, spec: ScenarioSpec,
                 overlay_config: OverlayConfig = None,
                 transfer_config: TransferConfig = None,
                 trace: bool = False):
        self.spec = spec
        self.overlay_config = overlay_config or OverlayConfig()
        self.transfer_config = transfer_config or TransferConfig()
        self.net = SimNet(master_seed=spec.seed, trace=trace)
        self.edges = {}
        self.supers = {}
        self.query_results = []  # dicts: node, service, at_us, pending
        self.publish_results = []
        self._build()

    # -- construction -------------------------------------------------------

    def _build(self):
        super_names = {name for name, is_super in self.spec.nodes if is_super}
        for name, _ in self.spec.nodes:
            self.net.add_node(name)
        for a, b, kwargs in self.spec.links:
            self.net.add_link(a, b, **kwargs)
        for name, is_super in self.spec.nodes:
            env = self.net.nodes[name]
            rng = self.net.node_rng(name)
            if is_super:
                peer_addrs = [other for other in super_names
                              if other != name
                              and self.net.link_between(name, other)]
                node = SuperNode(env, self.overlay_config, rng,
                                 peer_addrs=sorted(peer_addrs))
                node.start()
                self.supers[name] = node
            else:
                self.edges[name] = EdgeNode(env, self.overlay_config, rng,
                                            transfer_config=self.transfer_config)
        for at_us, action in sorted(self.spec.actions,
                                    key=lambda item: item[0]):
            self.net.call_at(at_us, lambda a=action: self._run_action(a))

    def node(self, name: str):
        if name in self.edges:
            return self.edges[name]
        if name in self.supers:
            return self.supers[name]
        raise InvalidInputError(f"unknown node {name}")

    def supers_linked_to(self, name: str):
        return [s for s in self.supers if self.net.link_between(name, s)]

    # -- actions -------------------------------------------------------------

    def _run_action(self, action):
        kind = action[0]
        if kind == "pipe":
            self.edges[action[1]].create_input_pipe(action[2])
        elif kind == "advertise":
            node, service, super_name = action[1], action[2], action[3]
            edge = self.edges[node]
            if service not in edge.pipes:
                edge.create_input_pipe(service)
            self.publish_results.append({
                "node": node, "service": service, "super": super_name,
                "pending": edge.publish_advertisement(super_name, service)})
        elif kind == "serve":
            node, service, path = action[1], action[2], action[3]
            edge = self.edges[node]

            def provider(p=path):
                with open(p, "rb") as fh:
                    return fh.read()

            edge.serve_payload(service, provider)
        elif kind == "query":
            node, service, super_name = action[1], action[2], action[3]
            self.query_results.append({
                "node": node, "service": service, "at_us": self.net.now,
                "pending": self.edges[node].query_service(service, super_name)})
        elif kind == "partition":
            self.net.partition(action[1], action[2])
        elif kind == "heal":
            self.net.heal(action[1], action[2])
        elif kind == "silence":
            self.net.partition_node(action[1])
        else:
            raise InvalidInputError(f"unknown scenario action {kind!r}")

    # -- execution ------------------------------------------------------------

    def last_action_time(self) -> int:
        return max((at for at, _ in self.spec.actions), default=0)

    def run(self, extra_us: int = 0) -> None:
        """Execute the whole timeline plus breathing room for replies."""
        horizon = (self.last_action_time() + extra_us
                   + self.overlay_config.query_timeout_us)
        self.net.advance(horizon)

    def trace_csv(self) -> bytes:
        return self.net.trace_csv(overlay_kind_namer)
