"""Entropy stage: raw DEFLATE (RFC 1951) streams, no zlib/gzip wrapper."""

import zlib

from ..errors import CorruptDataError

_RAW_DEFLATE = -15  # negative wbits selects a bare RFC 1951 stream


def entropy_encode(data: bytes) -> bytes:
    comp = zlib.compressobj(zlib.Z_DEFAULT_COMPRESSION, zlib.DEFLATED, _RAW_DEFLATE)
    return comp.compress(data) + comp.flush()


def entropy_decode(data: bytes) -> bytes:
    decomp = zlib.decompressobj(_RAW_DEFLATE)
    try:
        out = decomp.decompress(data)
        out += decomp.flush()
    except zlib.error as exc:
        raise CorruptDataError(f"DEFLATE stream is corrupt: {exc}") from exc
    if not decomp.eof:
        raise CorruptDataError("DEFLATE stream is truncated")
    if decomp.unused_data:
        raise CorruptDataError("trailing bytes after DEFLATE stream")
    return out
