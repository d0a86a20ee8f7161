"""mmgp-copy semantics: discover a service, establish a session, pull the
file either raw (udt option) or as a .dwv bitstream (compress option).

The serving side prepares its payload before the transfer starts: raw
file bytes for udt, or the encoded bitstream (plus a quality report
measured by a local decode probe) for compress.  The receiving side
inverts the compress option transparently, so the destination file holds
the same content the source held — bit-identical in lossless mode.

Whatever happens, both endpoints drop all session state before this
returns; cleanup is not best-effort.
"""

from dataclasses import dataclass, field

from ..codec import (Bitstream, MODE_LOSSLESS, MODE_LOSSY, QuantizerConfig,
                     decode_video, encode_video, read_y8, write_y8)
from ..errors import InvalidInputError, MmgpError
from ..metrics import QualityReport, compare_sequences
from ..pending import Pending

OPTION_UDT = "udt"
OPTION_COMPRESS = "compress"


@dataclass
class CodecParams:
    width: int = 0               # raw Y8 dims; required for compress
    height: int = 0
    gop_size: int = 2
    levels: int = 3
    qstep: float = 8.0
    lossless: bool = False

    def quantizer(self) -> QuantizerConfig:
        if self.lossless:
            return QuantizerConfig(step=0.0, mode=MODE_LOSSLESS)
        return QuantizerConfig(step=self.qstep, mode=MODE_LOSSY)


@dataclass
class TransferReport:
    option: str
    payload_bytes: int = 0           # bytes handed to the transport
    source_bytes: int = 0            # size of the original file
    output_bytes: int = 0            # bytes written at the destination
    wire_data_bytes: int = 0         # DATA frame bytes incl. retransmissions
    data_packets: int = 0
    retransmits: int = 0
    naks: int = 0
    duration_us: int = 0
    quality: QualityReport = None    # only for the compress option
    attempts: list = field(default_factory=list)


def prepare_payload(source_bytes: bytes, option: str,
                    codec: CodecParams = None):
    """Build (payload, quality_report) the serving side will stream."""
    if option == OPTION_UDT:
        return source_bytes, None
    if option != OPTION_COMPRESS:
        raise InvalidInputError(f"unknown copy option {option!r}")
    codec = codec or CodecParams()
    if codec.width < 1 or codec.height < 1:
        raise InvalidInputError("compress option needs the source Y8 dimensions")
    seq = read_y8(source_bytes, codec.width, codec.height)
    bitstream = encode_video(seq, gop_size=codec.gop_size, levels=codec.levels,
                             q=codec.quantizer())
    payload = bitstream.to_bytes()
    quality = compare_sequences(seq, decode_video(bitstream),
                                original_size=len(source_bytes),
                                compressed_size=len(payload))
    return payload, quality


def unpack_payload(received: bytes, option: str) -> bytes:
    """Invert :func:`prepare_payload` at the destination."""
    if option == OPTION_UDT:
        return received
    return write_y8(decode_video(Bitstream.from_bytes(received)))


def mmgp_copy(net, requester: "EdgeNode", advertiser: "EdgeNode",
              service: str, super_addr: str, option: str,
              codec: CodecParams = None, source: bytes = None,
              timeout_us: int = 120_000_000) -> tuple:
    """Run a full copy over a simulated network; returns (data, report).

    ``source`` overrides the advertiser's armed payload provider, which is
    how the CLI points an existing scenario at a concrete file.  The
    connection always closes afterwards, on success and on every error
    path alike.
    """
    quality_holder = {}

    if source is not None:
        def provider(payload=source):
            return payload
        advertiser.serve_payload(service, provider)
    base_provider = advertiser.served.get(service)
    if base_provider is None:
        raise InvalidInputError(
            f"advertiser {advertiser.env.address} serves nothing for "
            f"{service!r}")

    def prepared_provider():
        raw = base_provider()
        payload, quality = prepare_payload(raw, option, codec)
        quality_holder["quality"] = quality
        quality_holder["source_bytes"] = len(raw)
        quality_holder["payload_bytes"] = len(payload)
        return payload

    advertiser.served[service] = prepared_provider

    report = TransferReport(option=option)
    started = net.now
    session = None
    try:
        answer_p = requester.query_service(service, super_addr)
        net.run_until(lambda: answer_p.done, timeout_us)
        answer = answer_p.result()
        if not answer.found:
            raise MmgpError(f"service {service!r} not found")

        session_p = requester.establish_connection(answer)
        net.run_until(lambda: session_p.done, timeout_us)
        session = session_p.result()

        done = session.completion
        if not net.run_until(lambda: done.done, timeout_us):
            raise MmgpError("transfer did not finish within the scenario budget")
        received = done.result()

        sender = _peer_sender(advertiser, service)
        if sender is not None:
            sender_done = sender.completion
            net.run_until(lambda: sender_done.done, timeout_us)
            report.wire_data_bytes = sender.stats.data_bytes_sent
            report.data_packets = sender.stats.data_packets_sent
            report.retransmits = sender.stats.retransmits
            report.naks = sender.stats.naks_received
        data = unpack_payload(received, option)
        report.payload_bytes = quality_holder.get("payload_bytes", len(received))
        report.source_bytes = quality_holder.get("source_bytes", len(received))
        report.output_bytes = len(data)
        report.quality = quality_holder.get("quality")
        report.duration_us = net.now - started
        return data, report
    finally:
        advertiser.served[service] = base_provider
        if session is not None:
            session.close()
            if getattr(session, "endpoint", None) is not None:
                session.endpoint.close()
        _close_peer_sessions(advertiser, service)


def _peer_sender(advertiser, service):
    endpoint = advertiser.pipes.get(service)
    if endpoint is None or not endpoint.sessions:
        return None
    # One copy, one session: take the most recent.
    return endpoint.sessions[max(endpoint.sessions)]


def _close_peer_sessions(advertiser, service):
    endpoint = advertiser.pipes.get(service)
    if endpoint is None:
        return
    for session in list(endpoint.sessions.values()):
        session.close()
    endpoint.sessions.clear()
