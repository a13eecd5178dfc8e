"""Protocol message types and their canonical octet encodings.

Every variable-length field is written as a 4-byte big-endian length followed
by the field octets, in the order the fields are declared. Coordinates and
times are IEEE-754 binary64, big-endian. These encodings fix h(M), so they
must not change.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field

from vue.crypto import GroupKey, derive_token, hash_data

NONCE_LEN = 16
DEFAULT_TOKEN_VALIDITY = 300.0


def _lp(data: bytes) -> bytes:
    return struct.pack(">I", len(data)) + data


class _Reader:
    def __init__(self, data: bytes):
        self.data = bytes(data)
        self.pos = 0

    def field(self) -> bytes:
        if self.pos + 4 > len(self.data):
            raise ValueError("truncated encoding")
        (n,) = struct.unpack_from(">I", self.data, self.pos)
        start = self.pos + 4
        end = start + n
        if end > len(self.data):
            raise ValueError("truncated encoding")
        self.pos = end
        return self.data[start:end]

    def u32(self) -> int:
        if self.pos + 4 > len(self.data):
            raise ValueError("truncated encoding")
        (n,) = struct.unpack_from(">I", self.data, self.pos)
        self.pos += 4
        return n

    def done(self):
        if self.pos != len(self.data):
            raise ValueError("trailing bytes after encoding")


def _f64(v: float) -> bytes:
    return struct.pack(">d", float(v))


def _unf64(b: bytes) -> float:
    if len(b) != 8:
        raise ValueError("bad float field")
    return struct.unpack(">d", b)[0]


class Decision(str, enum.Enum):
    TRUE = "true"
    FALSE = "false"
    UNSURE = "unsure"
    DEFER = "defer"

    @property
    def code(self) -> int:
        return _DECISION_CODES[self]


_DECISION_CODES = {Decision.TRUE: 1, Decision.FALSE: 2, Decision.UNSURE: 3, Decision.DEFER: 4}
_CODE_DECISIONS = {v: k for k, v in _DECISION_CODES.items()}


@dataclass(frozen=True)
class TokenRecord:
    """A negotiated (tau, K) pair plus the window in which it may be used in reports."""

    tau: bytes
    group_key: GroupKey
    received_at: float
    validity: float = DEFAULT_TOKEN_VALIDITY

    @classmethod
    def from_key(cls, key: GroupKey, received_at: float, validity: float = DEFAULT_TOKEN_VALIDITY):
        return cls(derive_token(key), key, received_at, validity)

    def valid_at(self, t: float) -> bool:
        return self.received_at <= t < self.received_at + self.validity


@dataclass(frozen=True)
class ReportMessage:
    r: bytes
    x: float
    y: float
    t: float
    m: bytes

    def encode(self) -> bytes:
        return b"".join(
            (_lp(self.r), _lp(_f64(self.x)), _lp(_f64(self.y)), _lp(_f64(self.t)), _lp(self.m))
        )

    @classmethod
    def decode(cls, data: bytes) -> "ReportMessage":
        rd = _Reader(data)
        r = rd.field()
        x, y, t = (_unf64(rd.field()) for _ in range(3))
        m = rd.field()
        rd.done()
        return cls(r, x, y, t, m)

    def digest(self) -> bytes:
        return hash_data(self.encode())


@dataclass(frozen=True)
class VotingTicket:
    upsilon: bytes
    sig: bytes

    def encode(self) -> bytes:
        return _lp(self.upsilon) + _lp(self.sig)

    @classmethod
    def decode(cls, data: bytes) -> "VotingTicket":
        rd = _Reader(data)
        t = cls(rd.field(), rd.field())
        rd.done()
        return t


def ticket_payload(hm: bytes, upsilon: bytes) -> bytes:
    """Bytes signed by the identity server: h(M) || upsilon (both fixed width)."""
    return bytes(hm) + bytes(upsilon)


@dataclass(frozen=True)
class Report:
    ticket: VotingTicket
    message: ReportMessage
    alphas: tuple[tuple[bytes, bytes], ...] = field(default_factory=tuple)

    @property
    def hm(self) -> bytes:
        return self.message.digest()

    def encode(self) -> bytes:
        parts = [_lp(self.ticket.encode()), _lp(self.message.encode()), struct.pack(">I", len(self.alphas))]
        for tau, ct in self.alphas:
            parts.append(_lp(tau))
            parts.append(_lp(ct))
        return b"".join(parts)

    @classmethod
    def decode(cls, data: bytes) -> "Report":
        rd = _Reader(data)
        ticket = VotingTicket.decode(rd.field())
        message = ReportMessage.decode(rd.field())
        alphas = tuple((rd.field(), rd.field()) for _ in range(rd.u32()))
        rd.done()
        return cls(ticket, message, alphas)


@dataclass(frozen=True)
class Vote:
    ticket: VotingTicket
    decision: Decision

    def encode(self) -> bytes:
        return _lp(self.ticket.encode()) + _lp(bytes([self.decision.code]))

    @classmethod
    def decode(cls, data: bytes) -> "Vote":
        rd = _Reader(data)
        ticket = VotingTicket.decode(rd.field())
        code = rd.field()
        rd.done()
        if len(code) != 1 or code[0] not in _CODE_DECISIONS:
            raise ValueError("unknown decision code")
        return cls(ticket, _CODE_DECISIONS[code[0]])
