"""Canonical bit-packed encoding for the closed set of protocol payloads.

Every payload kind encodes deterministically: a fixed 8-bit tag followed by
fields whose widths derive from the codec context (ID width from ``n_hat``,
level width from ``n``), padded to a whole number of bytes.  ``bit size`` is
8 times the encoded byte length.  Oversized or free-form values (full
topologies, solution maps) ride in a JSON blob payload and are meant for
unbudgeted local-mode runs only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Any

from .graph import VertexLabel


class CodecError(ValueError):
    """Unknown payload kind or malformed encoding."""


@dataclass(frozen=True)
class CodecContext:
    """Field widths shared by both endpoints of every message."""

    n_hat: int
    n: int

    @property
    def id_bits(self) -> int:
        return max(1, (self.n_hat - 1).bit_length())

    @property
    def level_bits(self) -> int:
        return max(1, (self.n - 1).bit_length())


class _BitWriter:
    def __init__(self) -> None:
        self.acc = 0
        self.nbits = 0

    def write(self, value: int, bits: int) -> None:
        if value < 0 or (bits < 64 and value >= (1 << bits)):
            raise CodecError(f"value {value} does not fit in {bits} bits")
        self.acc = (self.acc << bits) | value
        self.nbits += bits

    def write_bytes(self, data: bytes) -> None:
        for b in data:
            self.write(b, 8)

    def getvalue(self) -> bytes:
        pad = (-self.nbits) % 8
        return ((self.acc << pad)).to_bytes((self.nbits + pad) // 8, "big") if self.nbits else b""


class _BitReader:
    def __init__(self, data: bytes) -> None:
        self.data = data
        self.pos = 0

    def read(self, bits: int) -> int:
        out = 0
        for _ in range(bits):
            byte = self.data[self.pos // 8]
            out = (out << 1) | ((byte >> (7 - self.pos % 8)) & 1)
            self.pos += 1
        return out

    def read_bytes(self, count: int) -> bytes:
        return bytes(self.read(8) for _ in range(count))


def _write_varint(w: _BitWriter, value: int) -> None:
    raw = value.to_bytes(max(1, (value.bit_length() + 7) // 8), "big")
    w.write(len(raw), 8)
    w.write_bytes(raw)


def _read_varint(r: _BitReader) -> int:
    length = r.read(8)
    return int.from_bytes(r.read_bytes(length), "big")


# Protocol message kinds.  Frozen so delivered objects are safe to share.


@dataclass(frozen=True)
class Dist:
    """A distance or counter bounded by the vertex count."""

    value: int


@dataclass(frozen=True)
class Uint:
    """An unbounded nonnegative integer (varint encoded)."""

    value: int


@dataclass(frozen=True)
class Candidate:
    """Best cross edge seen in a subtree: (target tree, target, source)."""

    has_smaller: bool
    w_tree: int
    w: int
    u: int


@dataclass(frozen=True)
class NoCandidate:
    """Subtree saw no cross edges at all."""


@dataclass(frozen=True)
class ChoiceConnect:
    """Root's pick: connect through (u, w) into the tree labeled w_tree."""

    u: int
    w: int
    w_tree: int


@dataclass(frozen=True)
class ChoiceLocalMin:
    """Tree is a local minimum; (fv, fu) is the fallback cross edge."""

    fv: int
    fu: int


@dataclass(frozen=True)
class ChoiceComplete:
    """Tree spans the whole graph; nothing left to do."""


@dataclass(frozen=True)
class Notify:
    """Cross-edge notification: the sender became the receiver's child."""

    child: int


@dataclass(frozen=True)
class Climb:
    """Path climb: receiver's distance from the new root, plus merge base."""

    dist: int
    base_tree: int | None = None
    base_level: int | None = None


@dataclass(frozen=True)
class Adopt:
    """Adoption flag aggregated toward a local-minimum tree's root."""

    flag: bool


@dataclass(frozen=True)
class Decision:
    """Local-minimum root's verdict: adopted (stay root tree) or attach."""

    adopted: bool


@dataclass(frozen=True)
class Gw:
    """Global-wake info: current label, parent pointer, attach request."""

    label: VertexLabel
    parent: int | None
    attach: bool


@dataclass(frozen=True)
class Propagate:
    """Relabel propagation: component tree ID, base level, sender distance."""

    tree_id: int
    base_level: int
    dist: int


@dataclass(frozen=True)
class Status:
    """Decision status for schedule-tree rounds: undecided or a value."""

    decided: bool
    value: int | None
    accum: tuple[tuple[int, int], ...] | None = None


@dataclass(frozen=True)
class Frac:
    """Exact rational carried as numerator/denominator varints."""

    numerator: int
    denominator: int

    def as_fraction(self) -> Fraction:
        return Fraction(self.numerator, self.denominator)


@dataclass(frozen=True)
class Blob:
    """Free-form JSON-serializable payload (local mode only in practice)."""

    obj: Any


_TAGS: dict[type, int] = {
    VertexLabel: 1,
    Dist: 2,
    Uint: 3,
    Candidate: 4,
    NoCandidate: 5,
    ChoiceConnect: 6,
    ChoiceLocalMin: 7,
    ChoiceComplete: 8,
    Notify: 9,
    Climb: 10,
    Adopt: 11,
    Decision: 12,
    Gw: 13,
    Propagate: 14,
    Status: 15,
    Frac: 16,
    Blob: 17,
}
_BY_TAG = {tag: cls for cls, tag in _TAGS.items()}


def _canonical_json(obj: Any) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def encode_payload(payload: Any, ctx: CodecContext) -> bytes:
    """Canonical deterministic byte encoding of one protocol payload."""
    tag = _TAGS.get(type(payload))
    if tag is None:
        raise CodecError(f"unknown payload kind {type(payload).__name__}")
    w = _BitWriter()
    w.write(tag, 8)
    idb, lvb = ctx.id_bits, ctx.level_bits

    if isinstance(payload, VertexLabel):
        w.write(payload.tree_id, idb)
        w.write(payload.level, lvb)
    elif isinstance(payload, Dist):
        w.write(payload.value, lvb)
    elif isinstance(payload, Uint):
        _write_varint(w, payload.value)
    elif isinstance(payload, Candidate):
        w.write(1 if payload.has_smaller else 0, 1)
        w.write(payload.w_tree, idb)
        w.write(payload.w, idb)
        w.write(payload.u, idb)
    elif isinstance(payload, NoCandidate):
        pass
    elif isinstance(payload, ChoiceConnect):
        w.write(payload.u, idb)
        w.write(payload.w, idb)
        w.write(payload.w_tree, idb)
    elif isinstance(payload, ChoiceLocalMin):
        w.write(payload.fv, idb)
        w.write(payload.fu, idb)
    elif isinstance(payload, ChoiceComplete):
        pass
    elif isinstance(payload, Notify):
        w.write(payload.child, idb)
    elif isinstance(payload, Climb):
        w.write(payload.dist, lvb)
        if payload.base_tree is None:
            w.write(0, 1)
        else:
            w.write(1, 1)
            w.write(payload.base_tree, idb)
            w.write(payload.base_level, lvb)
    elif isinstance(payload, Adopt):
        w.write(1 if payload.flag else 0, 1)
    elif isinstance(payload, Decision):
        w.write(1 if payload.adopted else 0, 1)
    elif isinstance(payload, Gw):
        w.write(payload.label.tree_id, idb)
        w.write(payload.label.level, lvb)
        if payload.parent is None:
            w.write(0, 1)
        else:
            w.write(1, 1)
            w.write(payload.parent, idb)
        w.write(1 if payload.attach else 0, 1)
    elif isinstance(payload, Propagate):
        w.write(payload.tree_id, idb)
        w.write(payload.base_level, lvb)
        w.write(payload.dist, lvb)
    elif isinstance(payload, Status):
        w.write(1 if payload.decided else 0, 1)
        if payload.value is None:
            w.write(0, 1)
        else:
            w.write(1, 1)
            _write_varint(w, payload.value)
        if payload.accum is None:
            w.write(0, 1)
        else:
            w.write(1, 1)
            _write_varint(w, len(payload.accum))
            for vertex, value in payload.accum:
                w.write(vertex, idb)
                _write_varint(w, value)
    elif isinstance(payload, Frac):
        _write_varint(w, payload.numerator)
        _write_varint(w, payload.denominator)
    elif isinstance(payload, Blob):
        raw = _canonical_json(payload.obj)
        w.write(len(raw), 32)
        w.write_bytes(raw)
    return w.getvalue()


def decode_payload(data: bytes, ctx: CodecContext) -> Any:
    """Inverse of :func:`encode_payload` (padding bits ignored)."""
    r = _BitReader(data)
    tag = r.read(8)
    cls = _BY_TAG.get(tag)
    if cls is None:
        raise CodecError(f"unknown payload tag {tag}")
    idb, lvb = ctx.id_bits, ctx.level_bits

    if cls is VertexLabel:
        return VertexLabel(r.read(idb), r.read(lvb))
    if cls is Dist:
        return Dist(r.read(lvb))
    if cls is Uint:
        return Uint(_read_varint(r))
    if cls is Candidate:
        return Candidate(bool(r.read(1)), r.read(idb), r.read(idb), r.read(idb))
    if cls is NoCandidate:
        return NoCandidate()
    if cls is ChoiceConnect:
        return ChoiceConnect(r.read(idb), r.read(idb), r.read(idb))
    if cls is ChoiceLocalMin:
        return ChoiceLocalMin(r.read(idb), r.read(idb))
    if cls is ChoiceComplete:
        return ChoiceComplete()
    if cls is Notify:
        return Notify(r.read(idb))
    if cls is Climb:
        dist = r.read(lvb)
        if r.read(1):
            return Climb(dist, r.read(idb), r.read(lvb))
        return Climb(dist)
    if cls is Adopt:
        return Adopt(bool(r.read(1)))
    if cls is Decision:
        return Decision(bool(r.read(1)))
    if cls is Gw:
        label = VertexLabel(r.read(idb), r.read(lvb))
        parent = r.read(idb) if r.read(1) else None
        return Gw(label, parent, bool(r.read(1)))
    if cls is Propagate:
        return Propagate(r.read(idb), r.read(lvb), r.read(lvb))
    if cls is Status:
        decided = bool(r.read(1))
        value = _read_varint(r) if r.read(1) else None
        accum = None
        if r.read(1):
            count = _read_varint(r)
            accum = tuple((r.read(idb), _read_varint(r)) for _ in range(count))
        return Status(decided, value, accum)
    if cls is Frac:
        return Frac(_read_varint(r), _read_varint(r))
    if cls is Blob:
        length = r.read(32)
        return Blob(json.loads(r.read_bytes(length).decode("utf-8")))
    raise AssertionError(cls)


def payload_bits(payload: Any, ctx: CodecContext) -> int:
    """Bit size of a payload: 8 times its canonical byte length."""
    return 8 * len(encode_payload(payload, ctx))
