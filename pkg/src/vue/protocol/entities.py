"""State machines for the identity server, verifier, rendezvous points and UEs."""

from __future__ import annotations

import os
import random
import struct
from collections.abc import Iterable
from dataclasses import dataclass, field

from vue import crypto
from vue.crypto import AuthFailure, SigningKeyPair
from vue.protocol.messages import (
    Decision,
    Report,
    ReportMessage,
    TokenRecord,
    Vote,
    VotingTicket,
    ticket_payload,
)
from vue.protocol.ratelimit import TokenBucket

DEFAULT_DEADLINE = 600.0


class Rejected(Exception):
    """A submission was refused. ``reason`` is one of the module-level reason strings."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


UNKNOWN_IDENTITY = "unknown identity"
RATE_LIMITED = "rate limited"
BAD_SIGNATURE = "bad signature"
DUPLICATE = "duplicate upsilon"
UNKNOWN_REPORT = "unknown report"


def _id_bytes(user_id) -> bytes:
    if isinstance(user_id, bytes):
        return user_id
    if isinstance(user_id, str):
        return user_id.encode("utf-8")
    if isinstance(user_id, int):
        if user_id < 0:
            raise ValueError("integer identifiers must be non-negative")
        return user_id.to_bytes(max(8, (user_id.bit_length() + 7) // 8), "big")
    raise TypeError(f"unsupported identifier type {type(user_id).__name__}")


def compute_vote_identifier(user_id, hm: bytes, k_is: bytes) -> bytes:
    """upsilon = h(id, h(M), K_IS) over a length-prefixed encoding."""
    parts = (_id_bytes(user_id), bytes(hm), bytes(k_is))
    return crypto.hash_data(b"".join(struct.pack(">I", len(p)) + p for p in parts))


def recover_identity(upsilon: bytes, hm: bytes, k_is: bytes, id_universe: Iterable):
    """Brute-force the identifier behind ``upsilon``; returns None when not found."""
    for candidate in id_universe:
        if compute_vote_identifier(candidate, hm, k_is) == upsilon:
            return candidate
    return None


class IdentityServer:
    """Authenticates users and issues voting tickets for a report digest.

    The server only ever sees h(M), never the report.
    """

    def __init__(self, registered_ids: Iterable = (), rng: random.Random | None = None,
                 rate_limiter: TokenBucket | None = None):
        self.k_is = rng.randbytes(32) if rng is not None else os.urandom(32)
        self.keypair = SigningKeyPair.generate(rng)
        self.registered_ids = set(registered_ids)
        self.rate_limiter = rate_limiter if rate_limiter is not None else TokenBucket()

    @property
    def public_key(self) -> bytes:
        return self.keypair.public

    def register(self, user_id):
        self.registered_ids.add(user_id)

    def issue_ticket(self, user_id, hm: bytes, now: float = 0.0) -> VotingTicket:
        if user_id not in self.registered_ids:
            raise Rejected(UNKNOWN_IDENTITY)
        if not self.rate_limiter.allow(user_id, now):
            raise Rejected(RATE_LIMITED)
        upsilon = compute_vote_identifier(user_id, hm, self.k_is)
        return VotingTicket(upsilon, crypto.sign(self.keypair, ticket_payload(hm, upsilon)))


@dataclass
class Tally:
    true: int = 0
    false: int = 0
    unsure: int = 0
    defer: int = 0
    status: str = "pending"

    def count(self, decision: Decision) -> int:
        return getattr(self, decision.value)

    def resolve(self, now: float, deadline: float) -> "Tally":
        if self.defer > 0 and now < deadline:
            status = "pending"
        elif self.true > self.false:
            status = "confirmed"
        elif self.false > self.true:
            status = "rejected"
        else:
            status = "undecided"
        return Tally(self.true, self.false, self.unsure, self.defer, status)


@dataclass
class _Entry:
    report: Report
    received_at: float
    votes: dict = field(default_factory=dict)  # upsilon -> Decision
    tally: Tally = field(default_factory=Tally)


class Verifier:
    """Accepts reports and votes, deposits confirmation requests, tallies."""

    def __init__(self, is_public_key: bytes, rate_limiter: TokenBucket | None = None,
                 deadline: float = DEFAULT_DEADLINE):
        self.is_public_key = is_public_key
        self.rate_limiter = rate_limiter if rate_limiter is not None else TokenBucket()
        self.deadline = deadline
        self.reports: dict[bytes, _Entry] = {}
        self.seen_upsilons: dict[bytes, set] = {}

    def _check_ticket(self, hm: bytes, ticket: VotingTicket):
        if not crypto.verify(self.is_public_key, ticket_payload(hm, ticket.upsilon), ticket.sig):
            raise Rejected(BAD_SIGNATURE)

    def accept_report(self, report: Report, now: float = 0.0, source=None) -> bytes:
        """Store ``report`` and return its h(M), or raise Rejected."""
        if not self.rate_limiter.allow(source, now):
            raise Rejected(RATE_LIMITED)
        hm = report.hm
        self._check_ticket(hm, report.ticket)
        seen = self.seen_upsilons.setdefault(hm, set())
        if report.ticket.upsilon in seen or hm in self.reports:
            raise Rejected(DUPLICATE)
        seen.add(report.ticket.upsilon)
        self.reports[hm] = _Entry(report, now)
        return hm

    def accept_vote(self, hm: bytes, vote: Vote, now: float = 0.0, source=None):
        if not self.rate_limiter.allow(source, now):
            raise Rejected(RATE_LIMITED)
        entry = self.reports.get(hm)
        if entry is None:
            raise Rejected(UNKNOWN_REPORT)
        self._check_ticket(hm, vote.ticket)
        ups = vote.ticket.upsilon
        tally = entry.tally
        if ups in self.seen_upsilons[hm]:
            previous = entry.votes.get(ups)
            # a decisive vote may replace the same user's earlier defer
            if previous is not Decision.DEFER or vote.decision is Decision.DEFER:
                raise Rejected(DUPLICATE)
            tally.defer -= 1
        self.seen_upsilons[hm].add(ups)
        entry.votes[ups] = vote.decision
        setattr(tally, vote.decision.value, tally.count(vote.decision) + 1)

    def deposit_requests(self, report: Report, registry: "RendezvousRegistry") -> int:
        for tau, ct in report.alphas:
            registry.deposit(tau, ct)
        return len(report.alphas)

    def tally(self, hm: bytes, now: float, deadline: float | None = None) -> Tally:
        entry = self.reports.get(hm)
        if entry is None:
            raise KeyError("unknown report")
        if deadline is None:
            deadline = entry.received_at + self.deadline
        return entry.tally.resolve(now, deadline)


def rp_index(tau: bytes, n: int) -> int:
    if n < 1:
        raise ValueError("number of rendezvous points must be >= 1")
    return int.from_bytes(crypto.hash_data(tau), "big") % n


class RendezvousRegistry:
    """N untrusted stores; a request for token tau lives only at rp_index(tau, N)."""

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("number of rendezvous points must be >= 1")
        self.n = n
        self.stores: list[dict[bytes, list[bytes]]] = [{} for _ in range(n)]

    def index(self, tau: bytes) -> int:
        return rp_index(tau, self.n)

    def deposit(self, tau: bytes, ct: bytes) -> int:
        i = self.index(tau)
        self.stores[i].setdefault(tau, []).append(ct)
        return i

    def poll(self, taus: Iterable[bytes]) -> list[tuple[bytes, bytes]]:
        out = []
        for tau in taus:
            out.extend((tau, ct) for ct in self.stores[self.index(tau)].get(tau, ()))
        return out


# ---------------------------------------------------------------------------
# User equipment
# ---------------------------------------------------------------------------

def build_report(tokens: Iterable[TokenRecord], message: ReportMessage, ticket: VotingTicket,
                 now: float, rng: random.Random | None = None) -> Report:
    plaintext = message.encode()
    alphas = tuple(
        (rec.tau, crypto.encrypt(crypto.derive_sym_key(rec.group_key), plaintext, rng))
        for rec in tokens
        if rec.valid_at(now)
    )
    return Report(ticket, message, alphas)


def open_request(tokens: Iterable[TokenRecord], tau: bytes, ct: bytes) -> ReportMessage:
    for rec in tokens:
        if rec.tau == tau:
            plaintext = crypto.decrypt(crypto.derive_sym_key(rec.group_key), ct)
            return ReportMessage.decode(plaintext)
    raise AuthFailure("no stored token matches the request")


class UserEquipment:
    """A participant's device: token store, request dedup, proactive decisions."""

    def __init__(self, user_id, rng: random.Random | None = None):
        self.user_id = user_id
        self.rng = rng
        self.tokens: list[TokenRecord] = []
        self.seen_requests: set[bytes] = set()
        self.proactive: dict[bytes, Decision] = {}

    def store_token(self, record: TokenRecord):
        self.tokens.append(record)

    def valid_tokens(self, now: float) -> list[TokenRecord]:
        return [t for t in self.tokens if t.valid_at(now)]

    def new_message(self, x: float, y: float, t: float, text: bytes) -> ReportMessage:
        r = self.rng.randbytes(16) if self.rng is not None else os.urandom(16)
        return ReportMessage(r, x, y, t, text)

    def build_report(self, message: ReportMessage, ticket: VotingTicket, now: float) -> Report:
        return build_report(self.tokens, message, ticket, now, self.rng)

    def confirm_proactively(self, hm: bytes, decision: Decision):
        self.proactive[hm] = decision

    def poll(self, registry: RendezvousRegistry) -> list[ReportMessage]:
        """Fetch and decrypt requests not seen before; undecryptable entries are skipped."""
        found = []
        for tau, ct in registry.poll(t.tau for t in self.tokens):
            key = crypto.hash_data(ct)
            if key in self.seen_requests:
                continue
            self.seen_requests.add(key)
            try:
                found.append(open_request(self.tokens, tau, ct))
            except (AuthFailure, ValueError):
                continue
        return found

    def decide(self, message: ReportMessage, default: Decision = Decision.DEFER) -> Decision:
        return self.proactive.get(message.digest(), default)
