"""n-out-of-n additive secret sharing over Z_{2^l} with fixed-point encoding.

Reals are scaled by 2^frac_bits, rounded, and embedded as two's-complement
ring elements. A value is split into I shares (I-1 uniform draws plus the
balancing element); summing all shares mod 2^l recovers it exactly. The
simulated transport serializes share-sums as length-prefixed little-endian
records.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

DEFAULT_BITS = 64
DEFAULT_FRAC_BITS = 20


class SharingError(ValueError):
    """Raised on ring misuse: bad party counts, mismatched shapes or scales."""


@dataclass(frozen=True)
class FixedPointRing:
    """Arithmetic in Z_{2^bits} with frac_bits of fixed-point precision."""

    bits: int = DEFAULT_BITS
    frac_bits: int = DEFAULT_FRAC_BITS

    def __post_init__(self):
        if not (8 <= self.bits <= 64 and self.bits % 8 == 0):
            raise SharingError("ring width must be a multiple of 8 in [8, 64]")
        if not 0 <= self.frac_bits < self.bits - 1:
            raise SharingError("frac_bits must leave room for the sign")

    @property
    def mask(self) -> np.uint64:
        return np.uint64((1 << self.bits) - 1) if self.bits < 64 else np.uint64(0xFFFFFFFFFFFFFFFF)

    @property
    def modulus(self) -> int:
        return 1 << self.bits

    @property
    def scale(self) -> float:
        return float(1 << self.frac_bits)

    def wrap(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=np.uint64) & self.mask

    def encode(self, x: np.ndarray | float) -> np.ndarray:
        """Fixed-point embed: round(x * 2^f) as two's complement."""
        arr = np.asarray(x, dtype=np.float64)
        scaled = np.round(arr * self.scale)
        limit = float(1 << (self.bits - 1))
        if np.any(np.abs(scaled) >= limit):
            raise OverflowError(
                f"value magnitude exceeds 2^{self.bits - 1 - self.frac_bits} fixed-point range"
            )
        return self.wrap(scaled.astype(np.int64).astype(np.uint64))

    def decode(self, r: np.ndarray) -> np.ndarray:
        """Invert encode: two's-complement read divided by 2^f."""
        r = self.wrap(r)
        if self.bits == 64:
            signed = np.asarray(r, dtype=np.uint64).copy().view(np.int64)
        else:
            signed = r.astype(np.int64)
            half = np.int64(1 << (self.bits - 1))
            signed = np.where(signed >= half, signed - np.int64(self.modulus), signed)
        return np.asarray(signed, dtype=np.float64) / self.scale

    def uniform(self, rng: np.random.Generator, size) -> np.ndarray:
        return self.wrap(rng.integers(0, self.modulus, size=size, dtype=np.uint64))

    def shr(self, x: np.ndarray, num_parties: int, rng: np.random.Generator) -> np.ndarray:
        """Split ring values into num_parties additive shares (first axis)."""
        if num_parties < 2:
            raise SharingError("additive sharing needs at least 2 parties")
        x = self.wrap(x)
        shares = self.uniform(rng, (num_parties - 1,) + x.shape)
        balance = self.wrap(x - self.wrap(shares.sum(axis=0)))
        return np.concatenate([shares, balance[None]], axis=0)

    def rec(self, shares: np.ndarray, num_parties: int | None = None) -> np.ndarray:
        """Recover values as the modular sum over the first axis."""
        shares = np.asarray(shares, dtype=np.uint64)
        if num_parties is not None and shares.shape[0] != num_parties:
            raise SharingError(f"expected {num_parties} shares, got {shares.shape[0]}")
        return self.wrap(shares.sum(axis=0))


DEFAULT_RING = FixedPointRing()


@dataclass
class SharedVector:
    """One client's secret vector split into one share vector per party."""

    shares: np.ndarray  # (num_parties, length) uint64
    ring: FixedPointRing = DEFAULT_RING

    def __post_init__(self):
        self.shares = np.asarray(self.shares, dtype=np.uint64)
        if self.shares.ndim != 2:
            raise SharingError("shares must be a (parties, length) array")

    @property
    def num_parties(self) -> int:
        return self.shares.shape[0]

    @property
    def length(self) -> int:
        return self.shares.shape[1]


def share_vector(
    values: np.ndarray,
    num_parties: int,
    rng: np.random.Generator,
    ring: FixedPointRing = DEFAULT_RING,
) -> SharedVector:
    """Fixed-point encode then additively share a real vector."""
    encoded = ring.encode(np.asarray(values, dtype=np.float64).reshape(-1))
    return SharedVector(shares=ring.shr(encoded, num_parties, rng), ring=ring)


def aggregate_shared_sum(inputs: list[SharedVector]) -> np.ndarray:
    """Server-side mean: modular-sum every share, decode, divide by I."""
    total = aggregate_shared_total(inputs)
    return total / len(inputs)


def aggregate_shared_total(inputs: list[SharedVector]) -> np.ndarray:
    """Server-side sum: modular-sum every share of every input, decoded."""
    if len(inputs) < 2:
        raise SharingError("aggregation needs at least 2 clients")
    ring = inputs[0].ring
    length = inputs[0].length
    for sv in inputs:
        if sv.length != length:
            raise SharingError("shared vectors have mismatched lengths")
        if sv.ring != ring:
            raise SharingError("shared vectors use different ring scales")
    stacked = np.concatenate([sv.shares for sv in inputs], axis=0)
    return ring.decode(ring.rec(stacked))


# ---------------------------------------------------------------------------
# Simulated transport


class PayloadKind(IntEnum):
    WEIGHTS = 1
    COUNTS = 2
    METRIC = 3


_HEADER = struct.Struct("<IIHBB")  # length, round, client_id, kind, scale


@dataclass
class WireRecord:
    """One length-prefixed upload record."""

    round_index: int
    client_id: int
    kind: PayloadKind
    frac_bits: int
    words: np.ndarray  # uint64, already reduced mod 2^bits

    def to_bytes(self, bits: int = DEFAULT_BITS) -> bytes:
        bytes_per = bits // 8
        raw = np.ascontiguousarray(self.words, dtype="<u8").tobytes()
        if bytes_per < 8:
            raw = (
                np.frombuffer(raw, dtype=np.uint8).reshape(-1, 8)[:, :bytes_per].tobytes()
            )
        body_len = _HEADER.size - 4 + len(raw)
        header = _HEADER.pack(
            body_len, self.round_index, self.client_id, int(self.kind), self.frac_bits
        )
        return header + raw


def parse_records(data: bytes, bits: int = DEFAULT_BITS) -> list[WireRecord]:
    """Parse a concatenation of length-prefixed records."""
    bytes_per = bits // 8
    records = []
    offset = 0
    while offset < len(data):
        if offset + _HEADER.size > len(data):
            raise SharingError("truncated record header")
        body_len, rnd, cid, kind, scale = _HEADER.unpack_from(data, offset)
        start = offset + _HEADER.size
        word_bytes = body_len - (_HEADER.size - 4)
        if word_bytes % bytes_per or start + word_bytes > len(data):
            raise SharingError("truncated or misaligned record body")
        raw = data[start : start + word_bytes]
        if bytes_per < 8:
            padded = np.zeros((word_bytes // bytes_per, 8), dtype=np.uint8)
            padded[:, :bytes_per] = np.frombuffer(raw, dtype=np.uint8).reshape(-1, bytes_per)
            words = padded.reshape(-1).view("<u8").copy()
        else:
            words = np.frombuffer(raw, dtype="<u8").copy()
        records.append(
            WireRecord(
                round_index=rnd,
                client_id=cid,
                kind=PayloadKind(kind),
                frac_bits=scale,
                words=words.astype(np.uint64),
            )
        )
        offset = start + word_bytes
    return records


@dataclass
class Transport:
    """In-memory message log standing in for the network."""

    bits: int = DEFAULT_BITS
    records: list[WireRecord] = field(default_factory=list)
    total_bytes: int = 0

    def send(self, record: WireRecord) -> None:
        self.total_bytes += len(record.to_bytes(self.bits))
        self.records.append(record)

    def count(self, kind: PayloadKind | None = None) -> int:
        if kind is None:
            return len(self.records)
        return sum(1 for r in self.records if r.kind == kind)
