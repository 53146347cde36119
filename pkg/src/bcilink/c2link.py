"""Bit-exact command/feedback framing plus a seeded lossy-link simulator.

Frame layout (big-endian throughout, normative; see frames.md):

    magic(2) = BC 1F | version(1) = 01 | msg_type(1) | seq(2) |
    payload_len(2) | payload(0..1024) | crc32(4)

The CRC-32 (reflected 0x04C11DB7, init/final 0xFFFFFFFF — zlib.crc32)
covers every byte before it. The link simulator and the stop-and-wait
retransmission loop are single-owner state machines driven by a virtual
millisecond clock.
"""
from __future__ import annotations

import random
import struct
import zlib
from dataclasses import dataclass, field

from .errors import (
    BadMagicError,
    BadVersionError,
    ChecksumMismatchError,
    FrameError,
    InvalidArgumentError,
    TruncatedFrameError,
)

MAGIC = b"\xbc\x1f"
VERSION = 0x01
HEADER_LEN = 8
FRAME_OVERHEAD = 12  # header + crc
MAX_PAYLOAD = 1024

MSG_COMMAND = 0x01
MSG_FEEDBACK = 0x02
MSG_ACK = 0x03
MSG_AGENT_EVENT = 0x04

_VALID_TYPES = (MSG_COMMAND, MSG_FEEDBACK, MSG_ACK, MSG_AGENT_EVENT)

# single status byte carried by Feedback frames
STATUS_BYTE = {"NotRecognized": 0x00, "RecognizedNotExecuted": 0x01, "Executed": 0x02}


def encode_frame(msg_type: int, seq: int, payload: bytes) -> bytes:
    if msg_type not in _VALID_TYPES:
        raise InvalidArgumentError(f"unknown msg_type 0x{msg_type:02x}")
    if not (0 <= seq <= 0xFFFF):
        raise InvalidArgumentError("seq must fit 16 bits")
    if len(payload) > MAX_PAYLOAD:
        raise InvalidArgumentError(f"payload of {len(payload)} bytes exceeds {MAX_PAYLOAD}")
    head = MAGIC + struct.pack(">BBHH", VERSION, msg_type, seq, len(payload))
    body = head + payload
    return body + struct.pack(">I", zlib.crc32(body) & 0xFFFFFFFF)


@dataclass(frozen=True)
class DecodedFrame:
    msg_type: int
    seq: int
    payload: bytes


def decode_frame(buf: bytes) -> DecodedFrame:
    """Parse one frame from the start of buf.

    Validation order: magic, version, length, CRC; the first failure wins.
    Bytes beyond the declared frame length are ignored (stream slicing is
    the caller's job).
    """
    if len(buf) < 2:
        raise TruncatedFrameError(f"{len(buf)} bytes cannot hold the magic")
    if buf[:2] != MAGIC:
        raise BadMagicError(f"magic {buf[:2].hex()} != {MAGIC.hex()}")
    if len(buf) < 3:
        raise TruncatedFrameError("frame ends before the version byte")
    if buf[2] != VERSION:
        raise BadVersionError(f"version 0x{buf[2]:02x} != 0x{VERSION:02x}")
    if len(buf) < HEADER_LEN:
        raise TruncatedFrameError(f"{len(buf)} bytes cannot hold the header")
    msg_type, seq, plen = struct.unpack(">BHH", buf[3:HEADER_LEN])
    total = FRAME_OVERHEAD + plen
    if len(buf) < total:
        raise TruncatedFrameError(f"frame declares {total} bytes, got {len(buf)}")
    body = buf[: HEADER_LEN + plen]
    (crc,) = struct.unpack(">I", buf[HEADER_LEN + plen : total])
    if crc != (zlib.crc32(body) & 0xFFFFFFFF):
        raise ChecksumMismatchError("crc32 mismatch")
    return DecodedFrame(msg_type, seq, bytes(buf[HEADER_LEN : HEADER_LEN + plen]))


@dataclass
class LinkModel:
    """Seeded lossy link: drop, uniform delay, rare single-bit corruption.

    Outcomes are deterministic given the seed and the call sequence; the
    per-call draw order is fixed (drop, then latency, then corruption).
    """

    drop_prob: float = 0.0
    latency_ms_min: float = 5.0
    latency_ms_max: float = 25.0
    bit_flip_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.drop_prob <= 1.0):
            raise InvalidArgumentError("drop_prob outside [0, 1]")
        if not (0.0 <= self.bit_flip_prob <= 1.0):
            raise InvalidArgumentError("bit_flip_prob outside [0, 1]")
        if not (0.0 <= self.latency_ms_min <= self.latency_ms_max):
            raise InvalidArgumentError("latency bounds must satisfy 0 <= min <= max")
        self._rng = random.Random(self.seed)

    def reset(self) -> None:
        self._rng = random.Random(self.seed)


@dataclass(frozen=True)
class DeliveryOutcome:
    delivered: bool
    at_ms: float | None = None
    data: bytes | None = None


def transmit(frame: bytes, link: LinkModel, now_ms: float = 0.0) -> DeliveryOutcome:
    """One shot over the link: dropped, or delivered (possibly corrupted) later."""
    rng = link._rng
    if rng.random() < link.drop_prob:
        return DeliveryOutcome(delivered=False)
    delay = rng.uniform(link.latency_ms_min, link.latency_ms_max)
    data = frame
    if link.bit_flip_prob > 0.0 and rng.random() < link.bit_flip_prob:
        bit = rng.randrange(len(frame) * 8)
        corrupted = bytearray(frame)
        corrupted[bit // 8] ^= 1 << (bit % 8)
        data = bytes(corrupted)
    return DeliveryOutcome(delivered=True, at_ms=now_ms + delay, data=data)


class Receiver:
    """Frame endpoint with per-seq dedup: never hands the same seq up twice."""

    def __init__(self):
        self._seen: set[int] = set()
        self.delivered: list[DecodedFrame] = []

    def offer(self, buf: bytes) -> tuple[DecodedFrame | None, bool]:
        """Returns (frame, is_duplicate); decode failures raise FrameError."""
        frame = decode_frame(buf)
        if frame.seq in self._seen:
            return frame, True
        self._seen.add(frame.seq)
        self.delivered.append(frame)
        return frame, False


@dataclass(frozen=True)
class SendReport:
    acked: bool
    attempts: int
    elapsed_ms: float
    delivered_payload: bytes | None = None


def reliable_send(
    msg_type: int,
    seq: int,
    payload: bytes,
    link: LinkModel,
    receiver: Receiver,
    max_retries: int = 3,
    ack_timeout_ms: float = 100.0,
    now_ms: float = 0.0,
    ack_link: LinkModel | None = None,
) -> SendReport:
    """Stop-and-wait with retransmission on a virtual clock.

    Each attempt rides the lossy link; the receiver acks every decodable
    copy (duplicates included, without re-delivering them), and the attempt
    succeeds when the ack returns inside the timeout window. A corrupted
    frame is treated exactly like a drop: no ack, retransmit.
    """
    if max_retries < 0:
        raise InvalidArgumentError("max_retries must be >= 0")
    if ack_timeout_ms <= 0:
        raise InvalidArgumentError("ack_timeout_ms must be positive")
    frame = encode_frame(msg_type, seq, payload)
    t0 = now_ms
    t = now_ms
    for attempt in range(1, max_retries + 2):
        out = transmit(frame, link, t)
        if out.delivered:
            try:
                decoded, _dup = receiver.offer(out.data)
            except FrameError:
                decoded = None  # corrupted on the wire; receiver stays silent
            if decoded is not None:
                ack = encode_frame(MSG_ACK, seq, struct.pack(">H", seq))
                if ack_link is None:
                    ack_at = out.at_ms
                else:
                    ack_out = transmit(ack, ack_link, out.at_ms)
                    ack_at = ack_out.at_ms if ack_out.delivered else None
                if ack_at is not None and ack_at - t <= ack_timeout_ms:
                    return SendReport(
                        acked=True,
                        attempts=attempt,
                        elapsed_ms=ack_at - t0,
                        delivered_payload=decoded.payload,
                    )
        t += ack_timeout_ms
    return SendReport(acked=False, attempts=max_retries + 1, elapsed_ms=t - t0)
