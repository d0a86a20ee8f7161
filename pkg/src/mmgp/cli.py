"""The mmgp command line: codec, overlay, transfer, simulation, benchmarks.

Exit codes (stable, also listed in the README):
    0  success
    1  usage error (e.g. mutually exclusive copy options)
    2  invalid input: unreadable files, bad parameters, bind failures
    3  corrupt or unsupported bitstream
    4  timeout / not-found
    5  transfer failure (authentication, connect, abort, protocol violation)
"""

import argparse
import glob
import hashlib
import math
import os
import sys

from . import codec, corpus
from .codec import (Bitstream, MODE_LOSSLESS, MODE_LOSSY, QuantizerConfig,
                    decode_video, encode_video, read_pgm_sequence, read_y8,
                    write_y8)
from .config import CONFIG_FIELDS, Config
from .errors import (AuthFailedError, ConnectFailedError, CorruptDataError,
                     DiscoveryTimeoutError, InvalidInputError, MmgpError,
                     ProtocolViolationError, TransferAbortedError,
                     UnsupportedFormatError)
from .metrics import compare_sequences, emit_report
from .overlay import EdgeNode, SuperNode
from .runner import UdpNode
from .simnet import ScenarioRunner, SimNet, parse_scenario
from .transfer import (CodecParams, OPTION_COMPRESS, OPTION_UDT,
                       TransferEndpoint, mmgp_copy)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_CORRUPT = 3
EXIT_TIMEOUT = 4
EXIT_TRANSFER = 5

_CONFIG_FLAG_SETS = {
    "codec": ("gop_size", "levels", "qstep"),
    "transfer": ("mss", "ack_interval_ms", "rate_increase", "rate_decrease",
                 "rate_floor", "rate_ceiling", "initial_rate",
                 "handshake_retries", "handshake_timeout_ms",
                 "recovery_intervals", "dead_timeout_ms", "psk"),
    "overlay": ("max_hops", "ping_subset", "purge_threshold", "ad_ttl_ms",
                "maintenance_interval_ms", "publish_timeout_ms",
                "publish_retries", "query_timeout_ms"),
}


def _add_config_flags(parser, groups):
    for group in groups:
        for name in _CONFIG_FLAG_SETS[group]:
            spec = next(f for f in CONFIG_FIELDS if f.name == name)
            if spec.type is str:
                helptext = f"{spec.help} (default {spec.default!r}, " \
                           f"env {spec.env_var})"
            else:
                helptext = f"{spec.help} (default {spec.default}, range " \
                           f"[{spec.lo}, {spec.hi}], env {spec.env_var})"
            parser.add_argument(spec.flag, dest=spec.name, type=spec.type,
                                default=None, help=helptext)


def _config_from_args(args) -> Config:
    overrides = {f.name: getattr(args, f.name, None) for f in CONFIG_FIELDS}
    return Config(overrides=overrides)


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _read_file(path: str) -> bytes:
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc}") from exc


def _write_file(path: str, data: bytes) -> None:
    with open(path, "wb") as fh:
        fh.write(data)


def _append_report_csv(path: str, report) -> None:
    payload = emit_report(report, "csv")
    if os.path.exists(path) and os.path.getsize(path) > 0:
        payload = payload.split(b"\n", 1)[1]  # drop the header line
    with open(path, "ab") as fh:
        fh.write(payload)


# ---------------------------------------------------------------- dwave --

def _load_input_sequence(args):
    if args.pgm:
        paths = sorted(glob.glob(args.input))
        if not paths:
            raise InvalidInputError(f"no PGM files match {args.input!r}")
        return read_pgm_sequence(paths)
    if not args.width or not args.height:
        raise InvalidInputError("raw Y8 input needs --width and --height")
    return read_y8(_read_file(args.input), args.width, args.height)


def cmd_dwave(args) -> int:
    cfg = _config_from_args(args)
    if args.action == "encode":
        seq = _load_input_sequence(args)
        q = QuantizerConfig(step=0.0, mode=MODE_LOSSLESS) if args.lossless \
            else QuantizerConfig(step=cfg.qstep, mode=MODE_LOSSY)
        bitstream = encode_video(seq, gop_size=cfg.gop_size,
                                 levels=cfg.levels, q=q)
        _write_file(args.output, bitstream.to_bytes())
        print(f"encoded {len(seq)} frames {seq.width}x{seq.height} -> "
              f"{bitstream.total_size} bytes ({bitstream.mode})")
        if args.report:
            report = compare_sequences(
                seq, decode_video(bitstream),
                original_size=len(seq) * seq.width * seq.height,
                compressed_size=bitstream.total_size)
            _append_report_csv(args.report, report)
        return EXIT_OK
    # decode: parse + decode fully before any output file is created,
    # so corrupt inputs never leave partial files behind.
    bitstream = Bitstream.from_bytes(_read_file(args.input))
    seq = decode_video(bitstream)
    _write_file(args.output, write_y8(seq))
    print(f"decoded {len(seq)} frames {seq.width}x{seq.height}")
    if args.pgm_dir:
        os.makedirs(args.pgm_dir, exist_ok=True)
        for frame in seq.frames:
            path = os.path.join(args.pgm_dir, f"frame{frame.index:05d}.pgm")
            _write_file(path, codec.write_pgm(frame.plane))
    return EXIT_OK


# ----------------------------------------------------------------- node --

def _scenario_runner(args, cfg, trace=False) -> ScenarioRunner:
    spec = parse_scenario(_read_file(args.scenario).decode())
    return ScenarioRunner(spec, overlay_config=cfg.overlay_config(),
                          transfer_config=cfg.transfer_config(), trace=trace)


def _pick_super(runner, node_name, flag_value):
    if flag_value:
        return flag_value
    linked = runner.supers_linked_to(node_name)
    if len(linked) != 1:
        raise InvalidInputError(
            f"{node_name} links to {len(linked)} super nodes; use --super")
    return linked[0]


def cmd_node_query(args) -> int:
    cfg = _config_from_args(args)
    if args.scenario:
        runner = _scenario_runner(args, cfg)
        runner.run()
        outcome = None
        for entry in runner.query_results:
            if entry["node"] == args.node and entry["service"] == args.service:
                outcome = entry["pending"]
        if outcome is None:
            super_name = _pick_super(runner, args.node, args.super)
            outcome = runner.node(args.node).query_service(args.service,
                                                           super_name)
            runner.net.run_until(lambda: outcome.done,
                                 cfg.overlay_config().query_timeout_us * 2)
        answer = outcome.result()
    else:
        if not args.super:
            return _fail("real-mode query needs --super ip:port", EXIT_INPUT)
        env = UdpNode()
        try:
            edge = EdgeNode(env, cfg.overlay_config(),
                            transfer_config=cfg.transfer_config())
            pending = edge.query_service(args.service, args.super)
            env.run_until(lambda: pending.done,
                          cfg.overlay_config().query_timeout_us * 2)
            answer = pending.result()
        finally:
            env.close()
    if not answer.found:
        print("not-found")
        return EXIT_TIMEOUT
    for address, port in answer.advertisement.endpoints:
        print(f"{address} {port}")
    return EXIT_OK


def cmd_node_serve(args) -> int:
    cfg = _config_from_args(args)
    peers = [p for p in (args.peers or "").split(",") if p]
    if len(set(peers)) != len(peers):
        return _fail("duplicate super-node peer in config", EXIT_INPUT)
    host, _, port_text = (args.listen or "0.0.0.0:0").partition(":")
    try:
        env = UdpNode(bind_ip=host or "0.0.0.0",
                      control_port=int(port_text or "0"),
                      public_ip=args.public_ip)
    except OSError as exc:
        return _fail(f"cannot bind {args.listen}: {exc}", EXIT_INPUT)
    print(f"listening as {env.address}")
    try:
        if args.role == "super":
            node = SuperNode(env, cfg.overlay_config(), peer_addrs=peers)
            node.start()
        else:
            node = EdgeNode(env, cfg.overlay_config(),
                            transfer_config=cfg.transfer_config())
            if args.service:
                node.create_input_pipe(args.service)
                if args.file:
                    node.serve_payload(args.service,
                                       lambda: _read_file(args.file))
                if args.super:
                    node.publish_advertisement(args.super, args.service)
        env.run_forever()
    except KeyboardInterrupt:
        print("stopped")
    finally:
        env.close()
    return EXIT_OK


def cmd_node(args) -> int:
    if args.action == "query":
        return cmd_node_query(args)
    return cmd_node_serve(args)


# ----------------------------------------------------------------- copy --

_DEFAULT_COPY_SCENARIO = """
seed 7
node client
node server
node hub super
link client hub latency=2
link server hub latency=2
link client server latency=5
at 5 advertise server file hub
"""


def cmd_copy(args) -> int:
    if args.udt and args.compress:
        print("usage: --udt and --compress are mutually exclusive",
              file=sys.stderr)
        return EXIT_USAGE
    option = OPTION_COMPRESS if args.compress else OPTION_UDT
    cfg = _config_from_args(args)

    if args.scenario:
        spec = parse_scenario(_read_file(args.scenario).decode())
    else:
        spec = parse_scenario(_DEFAULT_COPY_SCENARIO)
    runner = ScenarioRunner(spec, overlay_config=cfg.overlay_config(),
                            transfer_config=cfg.transfer_config())
    runner.run()

    if "/" in args.src:
        advertiser_name, service = args.src.split("/", 1)
    else:
        advertiser_name, service = None, args.src
    if advertiser_name is None:
        holders = [name for name, edge in runner.edges.items()
                   if service in edge.pipes]
        if len(holders) != 1:
            raise InvalidInputError(
                f"{len(holders)} nodes serve {service!r}; use node/service")
        advertiser_name = holders[0]
    advertiser = runner.edges[advertiser_name]

    requester_name = args.node
    if requester_name is None:
        others = [n for n in runner.edges if n != advertiser_name]
        if len(others) != 1:
            raise InvalidInputError(
                f"cannot pick a requester among {others}; use --node")
        requester_name = others[0]
    requester = runner.edges[requester_name]
    super_name = _pick_super(runner, requester_name, args.super)

    source = _read_file(args.source) if args.source else None
    params = CodecParams(width=args.width or 0, height=args.height or 0,
                         gop_size=cfg.gop_size, levels=cfg.levels,
                         qstep=cfg.qstep, lossless=args.lossless)
    data, report = mmgp_copy(runner.net, requester, advertiser, service,
                             super_name, option, codec=params, source=source)
    _write_file(args.dest, data)

    print(f"option: {report.option}")
    print(f"source bytes: {report.source_bytes}")
    print(f"payload bytes: {report.payload_bytes}")
    print(f"wire DATA bytes: {report.wire_data_bytes}")
    print(f"data packets: {report.data_packets}")
    print(f"retransmits: {report.retransmits}")
    print(f"naks: {report.naks}")
    print(f"duration: {report.duration_us / 1e6:.6f} s virtual")
    print(f"sha256: {hashlib.sha256(data).hexdigest()}")
    if report.quality is not None:
        cp = report.quality.cp_percent
        avg = report.quality.avg_psnr_db
        avg_text = "inf" if math.isinf(avg) else f"{avg:.4f}"
        print(f"cp_percent: {cp:.4f}")
        print(f"avg_psnr_db: {avg_text}")
        if args.report:
            _append_report_csv(args.report, report.quality)
    return EXIT_OK


# ---------------------------------------------------------------- bench --

_BUILTIN_CORPORA = {
    "moving_gradient": lambda: corpus.moving_gradient(8, 64),
    "noise_texture": lambda: corpus.noise_texture(8, 64),
    "high_redundancy": lambda: corpus.high_redundancy(8, 64),
}


def _bench_sequences(args):
    names = (args.corpus or "moving_gradient,noise_texture,high_redundancy")
    out = []
    for name in names.split(","):
        name = name.strip()
        if name in _BUILTIN_CORPORA:
            out.append((name, _BUILTIN_CORPORA[name]()))
        else:
            if not args.width or not args.height:
                raise InvalidInputError(
                    f"raw corpus {name!r} needs --width and --height")
            out.append((os.path.basename(name),
                        read_y8(_read_file(name), args.width, args.height)))
    return out


def cmd_bench_compression(args) -> int:
    cfg = _config_from_args(args)
    qsteps = [float(v) for v in args.qsteps.split(",")]
    lines = ["corpus,mode,qstep,size_bytes,compressed_bytes,cp_percent,"
             "avg_psnr_db"]
    for name, seq in _bench_sequences(args):
        raw_size = len(seq) * seq.width * seq.height
        runs = [("lossless", None)] + [("lossy", qs) for qs in qsteps]
        for mode, qs in runs:
            q = QuantizerConfig(step=0.0, mode=MODE_LOSSLESS) if qs is None \
                else QuantizerConfig(step=qs, mode=MODE_LOSSY)
            bitstream = encode_video(seq, gop_size=cfg.gop_size,
                                     levels=cfg.levels, q=q)
            report = compare_sequences(seq, decode_video(bitstream),
                                       raw_size, bitstream.total_size)
            avg = report.avg_psnr_db
            avg_text = "inf" if math.isinf(avg) else f"{avg:.4f}"
            qs_text = "-" if qs is None else f"{qs:g}"
            lines.append(f"{name},{mode},{qs_text},{raw_size},"
                         f"{bitstream.total_size},{report.cp_percent:.4f},"
                         f"{avg_text}")
    payload = ("\n".join(lines) + "\n").encode()
    _write_file(args.output, payload)
    print(f"wrote {args.output} ({len(lines) - 1} rows)")
    return EXIT_OK


def _bench_transfer_run(loss: float, seed: int, size: int, latency_ms: float,
                        transfer_config) -> dict:
    from .rng import SplitMix64
    net = SimNet(master_seed=seed)
    net.add_node("tx")
    net.add_node("rx")
    net.add_link("tx", "rx", latency_ms=latency_ms, loss=loss, seed=seed)
    payload = bytes(bytearray(SplitMix64(seed ^ 0xDA7A).next_u64() & 0xFF
                              for _ in range(size)))
    server = TransferEndpoint(net.nodes["tx"], transfer_config,
                              rng=SplitMix64(seed * 3 + 1))
    server.listen(lambda sid, peer: payload)
    client = TransferEndpoint(net.nodes["rx"], transfer_config,
                              rng=SplitMix64(seed * 5 + 2))
    pending = client.connect("tx", server.port)
    net.run_until(lambda: pending.done, 10_000_000)
    session = pending.result()
    net.run_until(lambda: session.completion.done, 600_000_000)
    received = session.completion.result()
    sender = server.sessions[session.session_id]
    row = {"loss": loss, "seed": seed,
           "delivered": received == payload,
           "duration_us": session.stats.finished_at - session.stats.started_at,
           "retransmits": sender.stats.retransmits,
           "naks": sender.stats.naks_received,
           "wire_data_bytes": sender.stats.data_bytes_sent}
    client.close()
    server.close()
    return row


def cmd_bench_transfer(args) -> int:
    cfg = _config_from_args(args)
    losses = [float(v) for v in args.loss.split(",")]
    seeds = list(range(args.seed_base, args.seed_base + args.seeds))
    lines = ["loss,seed,delivered,duration_us,retransmits,naks,"
             "wire_data_bytes"]
    for loss in losses:
        for seed in seeds:
            row = _bench_transfer_run(loss, seed, args.size, args.latency_ms,
                                      cfg.transfer_config())
            lines.append(f"{row['loss']:g},{row['seed']},"
                         f"{int(row['delivered'])},{row['duration_us']},"
                         f"{row['retransmits']},{row['naks']},"
                         f"{row['wire_data_bytes']}")
    payload = ("\n".join(lines) + "\n").encode()
    _write_file(args.output, payload)
    print(f"wrote {args.output} ({len(lines) - 1} rows)")
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.kind == "compression":
        return cmd_bench_compression(args)
    return cmd_bench_transfer(args)


# -------------------------------------------------------------- simulate --

def cmd_simulate(args) -> int:
    cfg = _config_from_args(args)
    runner = _scenario_runner(args, cfg, trace=True)
    runner.run(extra_us=int(args.extra_ms * 1000))
    if args.trace:
        _write_file(args.trace, runner.trace_csv())
    for entry in runner.query_results:
        pending = entry["pending"]
        if pending.done and pending.result().found:
            eps = pending.result().advertisement.endpoints
            status = " ".join(f"{a}:{p}" for a, p in eps)
        else:
            status = "not-found"
        print(f"query {entry['node']} {entry['service']}: {status}")
    delivered = sum(l.delivered for l in runner.net.links.values())
    dropped = sum(l.dropped_loss + l.dropped_partition
                  for l in runner.net.links.values())
    print(f"virtual time: {runner.net.now / 1e6:.3f} s, "
          f"messages delivered: {delivered}, dropped: {dropped}")
    return EXIT_OK


def cmd_config(args) -> int:
    cfg = _config_from_args(args)
    for spec in CONFIG_FIELDS:
        rng_text = "" if spec.lo is None else f" range=[{spec.lo}, {spec.hi}]"
        print(f"{spec.name}={getattr(cfg, spec.name)} (flag {spec.flag}, "
              f"env {spec.env_var}{rng_text}) {spec.help}")
    return EXIT_OK


# ----------------------------------------------------------------- main --

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmgp",
        description="Wavelet video codec, discovery overlay, and reliable-UDP "
                    "transfer over a deterministic simulated network.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dwave", help="encode/decode .dwv bitstreams")
    p.add_argument("action", choices=("encode", "decode"))
    p.add_argument("--input", required=True,
                   help="raw Y8 file, PGM glob with --pgm, or .dwv for decode")
    p.add_argument("--output", required=True, help="output file")
    p.add_argument("--width", type=int, help="Y8 frame width")
    p.add_argument("--height", type=int, help="Y8 frame height")
    p.add_argument("--pgm", action="store_true",
                   help="treat --input as a glob of P5 PGM files")
    p.add_argument("--pgm-dir", help="also write decoded frames as PGMs here")
    p.add_argument("--lossless", action="store_true",
                   help="bit-exact mode (skips the wavelet transform)")
    p.add_argument("--report", help="append a quality CSV here (encode only)")
    _add_config_flags(p, ("codec",))
    p.set_defaults(func=cmd_dwave)

    p = sub.add_parser("node", help="run or query overlay nodes")
    p.add_argument("action", choices=("serve", "query"))
    p.add_argument("--role", choices=("edge", "super"), default="super",
                   help="what to serve (serve only)")
    p.add_argument("--listen", help="ip:port to bind (serve, real mode)")
    p.add_argument("--public-ip", help="address to advertise (serve)")
    p.add_argument("--peers", help="comma-separated super peers ip:port")
    p.add_argument("--service", help="service name to publish or resolve")
    p.add_argument("--file", help="file served for --service")
    p.add_argument("--scenario", help="simnet scenario file (query)")
    p.add_argument("--node", help="requester node in the scenario (query)")
    p.add_argument("--super", help="super node name or ip:port")
    _add_config_flags(p, ("overlay", "transfer"))
    p.set_defaults(func=cmd_node)

    p = sub.add_parser("copy", help="mmgp-copy over a simulated network")
    p.add_argument("--from", dest="src", required=True,
                   metavar="NODE/SERVICE", help="what to fetch")
    p.add_argument("--to", dest="dest", required=True, help="output path")
    p.add_argument("--udt", action="store_true",
                   help="stream the file raw (default)")
    p.add_argument("--compress", action="store_true",
                   help="encode to .dwv before streaming, decode on arrival")
    p.add_argument("--scenario", help="simnet scenario file")
    p.add_argument("--node", help="requester node name")
    p.add_argument("--super", help="super node the requester queries")
    p.add_argument("--source", help="file the advertiser serves")
    p.add_argument("--width", type=int, help="Y8 width (compress)")
    p.add_argument("--height", type=int, help="Y8 height (compress)")
    p.add_argument("--lossless", action="store_true",
                   help="lossless compression (compress)")
    p.add_argument("--report", help="append the quality CSV here (compress)")
    _add_config_flags(p, ("codec", "transfer", "overlay"))
    p.set_defaults(func=cmd_copy)

    p = sub.add_parser("bench", help="compression / transfer sweeps")
    p.add_argument("kind", choices=("compression", "transfer"))
    p.add_argument("--output", required=True, help="CSV to write")
    p.add_argument("--corpus",
                   help="comma list: builtin names or Y8 paths "
                        "(default: the three builtin corpora)")
    p.add_argument("--width", type=int, help="Y8 width for file corpora")
    p.add_argument("--height", type=int, help="Y8 height for file corpora")
    p.add_argument("--qsteps", default="1,2,4,8,16",
                   help="quantizer steps swept by the compression bench")
    p.add_argument("--size", type=int, default=65536,
                   help="payload bytes per transfer run")
    p.add_argument("--loss", default="0,0.05,0.1,0.2,0.3",
                   help="loss rates swept by the transfer bench")
    p.add_argument("--seeds", type=int, default=5, help="seeds per loss rate")
    p.add_argument("--seed-base", type=int, default=1,
                   help="first seed of the sweep")
    p.add_argument("--latency-ms", type=float, default=5.0,
                   help="one-way link latency")
    _add_config_flags(p, ("codec", "transfer"))
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("simulate", help="run a scenario, export its trace")
    p.add_argument("--scenario", required=True, help="scenario file")
    p.add_argument("--trace", help="write the event trace CSV here")
    p.add_argument("--extra-ms", type=float, default=0.0,
                   help="extra virtual time after the last action")
    _add_config_flags(p, ("overlay", "transfer"))
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("config", help="print the effective configuration")
    _add_config_flags(p, ("codec", "transfer", "overlay"))
    p.set_defaults(func=cmd_config)

    return parser


_ERROR_CODES = (
    ((InvalidInputError, FileNotFoundError, IsADirectoryError,
      PermissionError), EXIT_INPUT),
    ((CorruptDataError, UnsupportedFormatError), EXIT_CORRUPT),
    ((DiscoveryTimeoutError,), EXIT_TIMEOUT),
    ((AuthFailedError, ConnectFailedError, TransferAbortedError,
      ProtocolViolationError), EXIT_TRANSFER),
)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        for types, code in _ERROR_CODES:
            if isinstance(exc, types):
                return _fail(str(exc), code)
        if isinstance(exc, MmgpError):
            return _fail(str(exc), EXIT_TRANSFER)
        raise


if __name__ == "__main__":
    sys.exit(main())
