"""Minimal RIFF/WAVE reader and writer for PCM16 and IEEE float32.

Errors are raised as :class:`WavParseError` naming the header field that
could not be parsed, rather than a bare ``struct.error``.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import WavParseError

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE

_ENCODINGS = {"pcm16": (WAVE_FORMAT_PCM, 16), "float32": (WAVE_FORMAT_IEEE_FLOAT, 32)}


def _chunks(data: bytes):
    pos = 12
    while pos + 8 <= len(data):
        cid, size = struct.unpack_from("<4sI", data, pos)
        body = data[pos + 8:pos + 8 + size]
        if len(body) < size:
            raise WavParseError(f"chunk[{cid.decode('latin-1')!r}].size",
                                f"declares {size} bytes but only {len(body)} remain")
        yield cid, body
        pos += 8 + size + (size & 1)


def read_wav(path, full_scale: float = 1.0):
    """Read a PCM16 or float32 WAV file into a :class:`SampleBuffer`.

    ``full_scale`` is the pressure in pascals corresponding to digital full scale.
    """
    from .signals import SampleBuffer

    data = Path(path).read_bytes()
    if len(data) < 12:
        raise WavParseError("RIFF header", f"file is {len(data)} bytes, need at least 12")
    riff, _, wave = struct.unpack_from("<4sI4s", data, 0)
    if riff != b"RIFF":
        raise WavParseError("RIFF.chunk_id", f"expected b'RIFF', got {riff!r}")
    if wave != b"WAVE":
        raise WavParseError("RIFF.format", f"expected b'WAVE', got {wave!r}")

    fmt = payload = None
    for cid, body in _chunks(data):
        if cid == b"fmt ":
            fmt = body
        elif cid == b"data":
            payload = body
    if fmt is None:
        raise WavParseError("fmt", "missing 'fmt ' chunk")
    if len(fmt) < 16:
        raise WavParseError("fmt.size", f"chunk is {len(fmt)} bytes, need at least 16")
    tag, channels, rate, _, block_align, bits = struct.unpack_from("<HHIIHH", fmt, 0)
    if tag == WAVE_FORMAT_EXTENSIBLE:
        if len(fmt) < 40:
            raise WavParseError("fmt.extensible", "extensible header shorter than 40 bytes")
        tag = struct.unpack_from("<H", fmt, 24)[0]
    if channels < 1:
        raise WavParseError("fmt.channels", f"invalid channel count {channels}")
    if rate < 1:
        raise WavParseError("fmt.sample_rate", f"invalid sample rate {rate}")
    if (tag, bits) == (WAVE_FORMAT_PCM, 16):
        dtype, scale = np.dtype("<i2"), 1.0 / 32768.0
    elif (tag, bits) == (WAVE_FORMAT_IEEE_FLOAT, 32):
        dtype, scale = np.dtype("<f4"), 1.0
    else:
        raise WavParseError("fmt.audio_format",
                            f"unsupported encoding (format tag {tag:#06x}, {bits} bits); "
                            "only PCM16 and float32 are supported")
    if block_align != channels * dtype.itemsize:
        raise WavParseError("fmt.block_align",
                            f"{block_align} does not equal channels*bytes = {channels * dtype.itemsize}")
    if payload is None:
        raise WavParseError("data", "missing 'data' chunk")
    n = len(payload) // block_align
    frames = np.frombuffer(payload[:n * block_align], dtype=dtype).reshape(n, channels)
    samples = frames.T.astype(np.float64) * (scale * full_scale)
    return SampleBuffer(samples, rate)


def write_wav(buffer, path, encoding: str = "float32", full_scale: float = 1.0) -> None:
    """Write ``buffer`` as ``pcm16`` or ``float32``. PCM16 values are clipped to full scale."""
    try:
        tag, bits = _ENCODINGS[encoding]
    except KeyError:
        raise ValueError(f"encoding must be one of {sorted(_ENCODINGS)}, got {encoding!r}") from None
    x = np.asarray(buffer.samples, dtype=np.float64) / full_scale
    if encoding == "pcm16":
        frames = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")
    else:
        frames = x.astype("<f4")
    payload = np.ascontiguousarray(frames.T).tobytes()
    channels = x.shape[0]
    block_align = channels * bits // 8
    fmt = struct.pack("<HHIIHH", tag, channels, buffer.sample_rate,
                      buffer.sample_rate * block_align, block_align, bits)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload
    if len(payload) & 1:
        body += b"\x00"
    Path(path).write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)
