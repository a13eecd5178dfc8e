import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from vue import crypto
from vue.protocol import (
    BAD_SIGNATURE,
    DUPLICATE,
    RATE_LIMITED,
    UNKNOWN_IDENTITY,
    Decision,
    IdentityServer,
    Rejected,
    RendezvousRegistry,
    Report,
    ReportMessage,
    Tally,
    TokenBucket,
    TokenRecord,
    UserEquipment,
    Verifier,
    Vote,
    VotingTicket,
    build_report,
    compute_vote_identifier,
    open_request,
    recover_identity,
    rp_index,
)


def unlimited():
    return TokenBucket(capacity=float("inf"), refill_per_second=0.0)


def token(rng, received_at=0.0, validity=300.0):
    return TokenRecord.from_key(crypto.GroupKey(rng.randbytes(32)), received_at, validity)


@pytest.fixture
def world():
    rng = random.Random(11)
    identity = IdentityServer(range(20), rng, rate_limiter=unlimited())
    verifier = Verifier(identity.public_key, rate_limiter=unlimited())
    msg = ReportMessage(rng.randbytes(16), 10.0, 20.0, 30.0, b"fire")
    return rng, identity, verifier, msg


# --- encodings ---------------------------------------------------------------

@settings(max_examples=50)
@given(st.binary(max_size=32), st.floats(allow_nan=False), st.floats(allow_nan=False),
       st.floats(allow_nan=False), st.binary(max_size=200))
def test_report_message_roundtrip(r, x, y, t, m):
    msg = ReportMessage(r, x, y, t, m)
    assert ReportMessage.decode(msg.encode()) == msg


def test_report_and_vote_roundtrip(world):
    rng, identity, _, msg = world
    ticket = identity.issue_ticket(3, msg.digest())
    report = build_report([token(rng), token(rng)], msg, ticket, 10.0, rng)
    assert Report.decode(report.encode()) == report
    vote = Vote(ticket, Decision.UNSURE)
    assert Vote.decode(vote.encode()) == vote
    assert VotingTicket.decode(ticket.encode()) == ticket


def test_decode_rejects_trailing_bytes(world):
    _, _, _, msg = world
    with pytest.raises(ValueError):
        ReportMessage.decode(msg.encode() + b"\x00")


def test_digest_is_hash_of_canonical_encoding(world):
    _, _, _, msg = world
    assert msg.digest() == crypto.hash_data(msg.encode())


# --- vote identifiers and tickets ----------------------------------------------

def test_vote_identifier_properties():
    k_is = bytes(32)
    hm = crypto.hash_data(b"a")
    assert compute_vote_identifier(1, hm, k_is) == compute_vote_identifier(1, hm, k_is)
    assert len({compute_vote_identifier(i, hm, k_is) for i in range(100)}) == 100
    assert compute_vote_identifier(1, hm, k_is) != compute_vote_identifier(1, crypto.hash_data(b"b"), k_is)


def test_ticket_verifies(world):
    _, identity, _, msg = world
    ticket = identity.issue_ticket(4, msg.digest())
    assert crypto.verify(identity.public_key, msg.digest() + ticket.upsilon, ticket.sig)
    assert ticket.upsilon == compute_vote_identifier(4, msg.digest(), identity.k_is)


def test_unregistered_identity_rejected(world):
    _, identity, _, msg = world
    with pytest.raises(Rejected) as exc:
        identity.issue_ticket(999, msg.digest())
    assert exc.value.reason == UNKNOWN_IDENTITY


def test_eleventh_request_in_a_minute_is_rate_limited():
    identity = IdentityServer([1], random.Random(0))
    hm = bytes(32)
    for i in range(10):
        identity.issue_ticket(1, hm, now=i * 0.5)
    with pytest.raises(Rejected) as exc:
        identity.issue_ticket(1, hm, now=5.5)
    assert exc.value.reason == RATE_LIMITED
    # one token refills after six seconds
    identity.issue_ticket(1, hm, now=12.0)


def test_token_bucket_is_per_key():
    bucket = TokenBucket(capacity=2, refill_per_second=0.0)
    assert bucket.allow("a", 0) and bucket.allow("a", 0)
    assert not bucket.allow("a", 0)
    assert bucket.allow("b", 0)


# --- reports -----------------------------------------------------------------------

def test_build_report_filters_expired_tokens(world):
    rng, identity, _, msg = world
    tokens = [token(rng, 100.0) for _ in range(3)] + [token(rng, 0.0, 50.0) for _ in range(2)]
    report = build_report(tokens, msg, identity.issue_ticket(0, msg.digest()), 120.0, rng)
    assert len(report.alphas) == 3
    assert {tau for tau, _ in report.alphas} == {t.tau for t in tokens[:3]}
    assert build_report([], msg, identity.issue_ticket(0, msg.digest()), 0.0, rng).alphas == ()


def test_token_validity_window():
    rec = TokenRecord(b"t" * 32, crypto.GroupKey(bytes(32)), 100.0, 300.0)
    assert not rec.valid_at(99.9)
    assert rec.valid_at(100.0) and rec.valid_at(399.9)
    assert not rec.valid_at(400.0)


def test_accept_report_and_duplicate(world):
    rng, identity, verifier, msg = world
    report = build_report([token(rng)], msg, identity.issue_ticket(0, msg.digest()), 0.0, rng)
    assert verifier.accept_report(report, 0.0) == msg.digest()
    with pytest.raises(Rejected) as exc:
        verifier.accept_report(report, 1.0)
    assert exc.value.reason == DUPLICATE


def test_forged_ticket_rejected(world):
    rng, identity, verifier, msg = world
    rogue = crypto.SigningKeyPair.generate(rng)
    ups = compute_vote_identifier(0, msg.digest(), identity.k_is)
    forged = VotingTicket(ups, crypto.sign(rogue, msg.digest() + ups))
    with pytest.raises(Rejected) as exc:
        verifier.accept_report(Report(forged, msg, ()), 0.0)
    assert exc.value.reason == BAD_SIGNATURE


def test_ticket_bound_to_report(world):
    rng, identity, verifier, msg = world
    other = ReportMessage(rng.randbytes(16), 0.0, 0.0, 0.0, b"other")
    ticket = identity.issue_ticket(0, other.digest())
    with pytest.raises(Rejected):
        verifier.accept_report(Report(ticket, msg, ()), 0.0)


def test_verifier_rate_limits_sources():
    rng = random.Random(1)
    identity = IdentityServer(range(5), rng, rate_limiter=unlimited())
    verifier = Verifier(identity.public_key, rate_limiter=TokenBucket(capacity=1, refill_per_second=0.0))
    msgs = [ReportMessage(rng.randbytes(16), 0, 0, 0, b"x") for _ in range(2)]
    verifier.accept_report(Report(identity.issue_ticket(0, msgs[0].digest()), msgs[0]), 0.0, source="ip")
    with pytest.raises(Rejected) as exc:
        verifier.accept_report(Report(identity.issue_ticket(1, msgs[1].digest()), msgs[1]), 0.0, source="ip")
    assert exc.value.reason == RATE_LIMITED


# --- rendezvous points -----------------------------------------------------------------

def test_rp_index_basics():
    rng = random.Random(2)
    tau = rng.randbytes(32)
    assert rp_index(tau, 1) == 0
    assert rp_index(tau, 16) == rp_index(tau, 16)
    assert rp_index(tau, 16) == int.from_bytes(crypto.hash_data(tau), "big") % 16
    with pytest.raises(ValueError):
        rp_index(tau, 0)


def test_rp_index_uniform():
    rng = random.Random(3)
    counts = np.bincount([rp_index(rng.randbytes(32), 16) for _ in range(10_000)], minlength=16)
    assert stats.chisquare(counts).pvalue > 0.01


def test_deposit_and_poll(world):
    rng, identity, verifier, msg = world
    tokens = [token(rng) for _ in range(3)]
    report = build_report(tokens, msg, identity.issue_ticket(0, msg.digest()), 0.0, rng)
    registry = RendezvousRegistry(4)
    assert verifier.deposit_requests(report, registry) == 3
    for tau, ct in report.alphas:
        assert registry.poll([tau]) == [(tau, ct)]
        # only the addressed store holds it
        holders = [i for i, store in enumerate(registry.stores) if tau in store]
        assert holders == [rp_index(tau, 4)]
    empty = Report(report.ticket, msg, ())
    assert verifier.deposit_requests(empty, registry) == 0
    assert registry.poll([rng.randbytes(32)]) == []


def test_shared_token_lists_both_requests():
    registry = RendezvousRegistry(8)
    registry.deposit(b"t" * 32, b"ct1")
    registry.deposit(b"t" * 32, b"ct2")
    assert [ct for _, ct in registry.poll([b"t" * 32])] == [b"ct1", b"ct2"]


def test_poll_across_stores():
    rng = random.Random(4)
    registry = RendezvousRegistry(8)
    a = rng.randbytes(32)
    b = next(t for t in (rng.randbytes(32) for _ in range(100)) if rp_index(t, 8) != rp_index(a, 8))
    registry.deposit(a, b"A")
    registry.deposit(b, b"B")
    assert sorted(ct for _, ct in registry.poll([a, b])) == [b"A", b"B"]


def test_open_request(world):
    rng, identity, _, msg = world
    mine, theirs = token(rng), token(rng)
    report = build_report([mine], msg, identity.issue_ticket(0, msg.digest()), 0.0, rng)
    tau, ct = report.alphas[0]
    assert open_request([mine], tau, ct) == msg
    with pytest.raises(crypto.AuthFailure):
        open_request([theirs], tau, ct)
    # cross-wired: right tau label, wrong key behind it
    crossed = TokenRecord(mine.tau, theirs.group_key, 0.0)
    with pytest.raises(crypto.AuthFailure):
        open_request([crossed], tau, ct)


def test_ue_poll_dedups_and_skips_foreign(world):
    rng, identity, _, msg = world
    ue = UserEquipment(1, rng)
    rec = token(rng)
    ue.store_token(rec)
    registry = RendezvousRegistry(4)
    report = build_report([rec], msg, identity.issue_ticket(0, msg.digest()), 0.0, rng)
    registry.deposit(*report.alphas[0])
    registry.deposit(rec.tau, b"garbage ciphertext that will not authenticate")
    assert ue.poll(registry) == [msg]
    assert ue.poll(registry) == []
    ue.confirm_proactively(msg.digest(), Decision.TRUE)
    assert ue.decide(msg) is Decision.TRUE
    assert ue.decide(ReportMessage(b"", 0, 0, 0, b"")) is Decision.DEFER


# --- votes and tallies ---------------------------------------------------------------

def _accepted(world):
    rng, identity, verifier, msg = world
    verifier.accept_report(Report(identity.issue_ticket(0, msg.digest()), msg, ()), 0.0)
    return msg.digest()


def test_vote_accepted_and_duplicate(world):
    _, identity, verifier, _ = world
    hm = _accepted(world)
    ticket = identity.issue_ticket(1, hm)
    verifier.accept_vote(hm, Vote(ticket, Decision.TRUE), 1.0)
    assert verifier.tally(hm, 1.0).true == 1
    with pytest.raises(Rejected) as exc:
        verifier.accept_vote(hm, Vote(ticket, Decision.FALSE), 2.0)
    assert exc.value.reason == DUPLICATE


def test_defer_then_decisive_replaces(world):
    _, identity, verifier, _ = world
    hm = _accepted(world)
    ticket = identity.issue_ticket(1, hm)
    verifier.accept_vote(hm, Vote(ticket, Decision.DEFER), 1.0)
    with pytest.raises(Rejected):
        verifier.accept_vote(hm, Vote(ticket, Decision.DEFER), 1.5)
    verifier.accept_vote(hm, Vote(ticket, Decision.TRUE), 2.0)
    t = verifier.tally(hm, 2.0)
    assert (t.true, t.defer) == (1, 0)
    with pytest.raises(Rejected):
        verifier.accept_vote(hm, Vote(ticket, Decision.TRUE), 3.0)


def test_reporter_cannot_vote_on_own_report(world):
    _, identity, verifier, msg = world
    hm = _accepted(world)
    with pytest.raises(Rejected):
        verifier.accept_vote(hm, Vote(identity.issue_ticket(0, hm), Decision.TRUE), 1.0)


def test_vote_with_corrupted_signature_not_tallied(world):
    _, identity, verifier, _ = world
    hm = _accepted(world)
    ticket = identity.issue_ticket(1, hm)
    bad = VotingTicket(ticket.upsilon, bytes([ticket.sig[0] ^ 1]) + ticket.sig[1:])
    with pytest.raises(Rejected) as exc:
        verifier.accept_vote(hm, Vote(bad, Decision.TRUE), 1.0)
    assert exc.value.reason == BAD_SIGNATURE
    assert verifier.tally(hm, 1.0).true == 0


def test_vote_on_unknown_report(world):
    _, identity, verifier, msg = world
    with pytest.raises(Rejected):
        verifier.accept_vote(msg.digest(), Vote(identity.issue_ticket(1, msg.digest()), Decision.TRUE))
    with pytest.raises(KeyError):
        verifier.tally(msg.digest(), 0.0)


@pytest.mark.parametrize("counts, status", [
    ((3, 1, 2, 0), "confirmed"),
    ((1, 1, 0, 0), "undecided"),
    ((0, 2, 5, 0), "rejected"),
    ((0, 0, 0, 0), "undecided"),
])
def test_tally_rule(counts, status):
    assert Tally(*counts).resolve(0.0, 600.0).status == status


def test_defer_gates_until_deadline():
    t = Tally(2, 0, 0, 1)
    assert t.resolve(100.0, 600.0).status == "pending"
    assert t.resolve(600.0, 600.0).status == "confirmed"


def test_tally_deadline_from_receipt(world):
    _, identity, verifier, _ = world
    hm = _accepted(world)
    verifier.accept_vote(hm, Vote(identity.issue_ticket(1, hm), Decision.TRUE), 1.0)
    verifier.accept_vote(hm, Vote(identity.issue_ticket(2, hm), Decision.DEFER), 1.0)
    assert verifier.tally(hm, 599.0).status == "pending"
    assert verifier.tally(hm, 600.0).status == "confirmed"


@settings(max_examples=200)
@given(st.integers(0, 6), st.integers(0, 6), st.integers(0, 3), st.integers(0, 3))
def test_tally_monotone_in_true_votes(t, f, u, d):
    order = {"rejected": 0, "undecided": 1, "pending": 1, "confirmed": 2}
    for now in (0.0, 1000.0):
        before = Tally(t, f, u, d).resolve(now, 600.0).status
        after = Tally(t + 1, f, u, d).resolve(now, 600.0).status
        assert order[after] >= order[before]
        after_false = Tally(t, f + 1, u, d).resolve(now, 600.0).status
        assert order[after_false] <= order[before]


def test_one_decisive_submission_per_upsilon_under_interleavings():
    rng = random.Random(12)
    identity = IdentityServer(range(6), rng, rate_limiter=unlimited())
    msg = ReportMessage(rng.randbytes(16), 0, 0, 0, b"quake")
    hm = msg.digest()
    report = Report(identity.issue_ticket(0, hm), msg, ())
    tickets = [identity.issue_ticket(i, hm) for i in range(1, 6)] + [report.ticket]
    for _ in range(1000):
        verifier = Verifier(identity.public_key, rate_limiter=unlimited())
        subs = [(None, None)] + [(t, d) for t in tickets for d in Decision for _ in range(rng.randint(0, 2))]
        rng.shuffle(subs)
        decisive = {}
        for t, d in subs:
            try:
                if t is None:
                    verifier.accept_report(report, 0.0)
                    decisive[report.ticket.upsilon] = decisive.get(report.ticket.upsilon, 0) + 1
                else:
                    verifier.accept_vote(hm, Vote(t, d), 0.0)
                    if d is not Decision.DEFER:
                        decisive[t.upsilon] = decisive.get(t.upsilon, 0) + 1
            except Rejected:
                pass
        assert all(v == 1 for v in decisive.values())
        tally = verifier.tally(hm, 0.0)
        assert tally.true + tally.false + tally.unsure + tally.defer <= 5


# --- accountability ----------------------------------------------------------------------

def test_recover_small_universe():
    k_is, hm = bytes(range(32)), crypto.hash_data(b"m")
    ups = compute_vote_identifier(7, hm, k_is)
    assert recover_identity(ups, hm, k_is, range(10)) == 7
    assert recover_identity(ups, hm, k_is, [i for i in range(10) if i != 7]) is None


@settings(max_examples=30)
@given(st.integers(0, 10_000), st.binary(min_size=1, max_size=50))
def test_recover_roundtrip_property(user_id, text):
    k_is, hm = b"k" * 32, crypto.hash_data(text)
    ups = compute_vote_identifier(user_id, hm, k_is)
    assert recover_identity(ups, hm, k_is, range(user_id - 5 if user_id >= 5 else 0, user_id + 5)) == user_id


def test_recover_large_universe_single_hit():
    rng = random.Random(13)
    k_is, hm = rng.randbytes(32), rng.randbytes(32)
    planted = 73_519
    ups = compute_vote_identifier(planted, hm, k_is)
    hits = [i for i in range(100_000) if compute_vote_identifier(i, hm, k_is) == ups]
    assert hits == [planted]
