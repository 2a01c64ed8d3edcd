"""Binary arithmetic coder driven by any sequential predictor, and the
``VOMC`` container format.

The coder keeps 64-bit low/high registers and quantises every predictive law
to integer frequencies with 16-bit precision and a floor of one count, so
every symbol stays decodable.  Encoder and decoder quantise identically.

Container (little-endian)::

    b"VOMC" | u8 version=1 | u8 A | u8 predictor id | u8 D | f64 lambda
    | f64 alpha[A] | u32 N | u8 padding[D] | payload (zero-padded to a byte)
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .model import CtwPrior, SourceSequence
from .predictors import PREDICTOR_IDS, PREDICTOR_NAMES, make_predictor

MAGIC = b"VOMC"
VERSION = 1
STATE_BITS = 64
FREQ_BITS = 16

_FULL = 1 << STATE_BITS
_MASK = _FULL - 1
_HALF = _FULL >> 1
_QUARTER = _HALF >> 1


class CodecError(ValueError):
    pass


def quantize(p: np.ndarray) -> list[int]:
    """Integer frequencies 1 + floor(p_a * (2^16 - A)); their sum is at most 2^16."""
    p = np.asarray(p, dtype=np.float64)
    A = p.shape[0]
    if np.any(~np.isfinite(p)) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise CodecError("predictor must emit a probability vector")
    scale = (1 << FREQ_BITS) - A
    return [1 + int(math.floor(float(v) * scale)) for v in p]


def quantized_log2_prob(freqs: Sequence[int], symbol: int) -> float:
    return math.log2(freqs[symbol] / sum(freqs))


class Encoder:
    def __init__(self):
        self.low = 0
        self.high = _MASK
        self.pending = 0
        self.bits: list[int] = []

    def _emit(self, bit: int):
        self.bits.append(bit)
        if self.pending:
            self.bits.extend([bit ^ 1] * self.pending)
            self.pending = 0

    def encode(self, freqs: Sequence[int], symbol: int) -> None:
        total = sum(freqs)
        lo = sum(freqs[:symbol])
        hi = lo + freqs[symbol]
        if freqs[symbol] <= 0:
            raise CodecError("zero-frequency symbol")
        rng = self.high - self.low + 1
        self.high = self.low + rng * hi // total - 1
        self.low = self.low + rng * lo // total
        while True:
            if self.high < _HALF:
                self._emit(0)
            elif self.low >= _HALF:
                self._emit(1)
                self.low -= _HALF
                self.high -= _HALF
            elif self.low >= _QUARTER and self.high < _HALF + _QUARTER:
                self.pending += 1
                self.low -= _QUARTER
                self.high -= _QUARTER
            else:
                break
            self.low <<= 1
            self.high = (self.high << 1) | 1

    def finish(self) -> list[int]:
        self.pending += 1
        self._emit(0 if self.low < _QUARTER else 1)
        return self.bits


class Decoder:
    def __init__(self, payload: bytes):
        self.payload = payload
        self.n_bits = 8 * len(payload)
        self.pos = 0
        self.low = 0
        self.high = _MASK
        self.value = 0
        self.shifts = 0
        for _ in range(STATE_BITS):
            self.value = (self.value << 1) | self._read()

    def _read(self) -> int:
        p = self.pos
        self.pos += 1
        if p >= self.n_bits:
            return 0
        return (self.payload[p >> 3] >> (7 - (p & 7))) & 1

    def decode(self, freqs: Sequence[int]) -> int:
        total = sum(freqs)
        rng = self.high - self.low + 1
        target = ((self.value - self.low + 1) * total - 1) // rng
        symbol = 0
        cum = 0
        while cum + freqs[symbol] <= target:
            cum += freqs[symbol]
            symbol += 1
            if symbol >= len(freqs):
                raise CodecError("corrupted payload")
        lo, hi = cum, cum + freqs[symbol]
        self.high = self.low + rng * hi // total - 1
        self.low = self.low + rng * lo // total
        while True:
            if self.high < _HALF:
                pass
            elif self.low >= _HALF:
                self.low -= _HALF
                self.high -= _HALF
                self.value -= _HALF
            elif self.low >= _QUARTER and self.high < _HALF + _QUARTER:
                self.low -= _QUARTER
                self.high -= _QUARTER
                self.value -= _QUARTER
            else:
                break
            self.low <<= 1
            self.high = (self.high << 1) | 1
            self.value = (self.value << 1) | self._read()
            self.shifts += 1
        return symbol

    def emitted_bits(self) -> int:
        """Bits the mirrored encoder would have produced once finished."""
        return self.shifts + 2


def _pack_bits(bits: Sequence[int]) -> bytes:
    out = bytearray((len(bits) + 7) // 8)
    for k, b in enumerate(bits):
        if b:
            out[k >> 3] |= 0x80 >> (k & 7)
    return bytes(out)


@dataclass(frozen=True)
class CodeStream:
    A: int
    predictor: str
    prior: CtwPrior
    N: int
    padding: tuple[int, ...]
    payload: bytes
    payload_bits: int

    def to_bytes(self) -> bytes:
        head = MAGIC + struct.pack(
            "<BBBBd", VERSION, self.A, PREDICTOR_IDS[self.predictor], self.prior.depth, self.prior.lam
        )
        head += struct.pack(f"<{self.A}d", *self.prior.alpha)
        head += struct.pack("<I", self.N)
        head += bytes(self.padding)
        return head + self.payload

    @classmethod
    def from_bytes(cls, blob: bytes) -> "CodeStream":
        if len(blob) < 16 or blob[:4] != MAGIC:
            raise CodecError("bad magic: not a VOMC stream")
        version, A, pid, D, lam = struct.unpack_from("<BBBBd", blob, 4)
        if version != VERSION:
            raise CodecError(f"unsupported version {version}")
        if pid not in PREDICTOR_NAMES:
            raise CodecError(f"unknown predictor id {pid}")
        off = 16
        need = off + 8 * A + 4 + D
        if len(blob) < need:
            raise CodecError("truncated header")
        alpha = struct.unpack_from(f"<{A}d", blob, off)
        off += 8 * A
        (N,) = struct.unpack_from("<I", blob, off)
        off += 4
        padding = tuple(blob[off:off + D])
        off += D
        payload = blob[off:]
        return cls(A, PREDICTOR_NAMES[pid], CtwPrior(D, lam, alpha), N, padding, payload, 8 * len(payload))


def encode(seq: SourceSequence, predictor_name: str, prior: CtwPrior) -> tuple[CodeStream, float]:
    """Compress ``seq``; returns the stream and log2 of the quantised model probability."""
    if seq.A != prior.A:
        raise ValueError("sequence alphabet differs from the prior's")
    padding = tuple(int(x) for x in seq.init[len(seq.init) - prior.depth:])
    pred = make_predictor(predictor_name, prior, padding)
    enc = Encoder()
    log2p = 0.0
    for x in seq.body:
        x = int(x)
        freqs = quantize(pred.predict())
        log2p += quantized_log2_prob(freqs, x)
        enc.encode(freqs, x)
        pred.update(x)
    bits = enc.finish()
    stream = CodeStream(prior.A, predictor_name, prior, len(seq.body), padding, _pack_bits(bits), len(bits))
    return stream, log2p


def decode(stream: CodeStream, factory: Callable | None = None) -> SourceSequence:
    """Inverse of ``encode``; ``factory(name, prior, padding)`` builds the predictor."""
    factory = factory or make_predictor
    pred = factory(stream.predictor, stream.prior, stream.padding)
    if stream.N and not stream.payload:
        raise CodecError("truncated payload")
    dec = Decoder(stream.payload)
    out = np.empty(stream.N, dtype=np.int64)
    for i in range(stream.N):
        x = dec.decode(quantize(pred.predict()))
        out[i] = x
        pred.update(x)
    if stream.N and 8 * len(stream.payload) < dec.emitted_bits():
        raise CodecError("truncated payload")
    return SourceSequence(np.array(stream.padding, dtype=np.int64), out, stream.A)


def compress(seq: SourceSequence, predictor_name: str, prior: CtwPrior) -> bytes:
    return encode(seq, predictor_name, prior)[0].to_bytes()


def decompress(blob: bytes) -> SourceSequence:
    return decode(CodeStream.from_bytes(blob))


def ideal_code_length(logprob: float) -> float:
    """Bits needed for an event of natural-log probability ``logprob``."""
    if logprob > 0:
        raise ValueError("log-probability must be <= 0")
    return -logprob / math.log(2)
