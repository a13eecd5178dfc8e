"""Scripted five-node walk through the whole protocol with real cryptography.

Node 0 reports an event; nodes 1-4 share its token and act as witnesses.
Three witnesses confirm, node 4 first auto-defers and then rejects, and the
reporter's attempt to vote on its own report is refused.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np

from vue import crypto
from vue.connectivity import RadioConfig, build_graph, k_hop_neighbors
from vue.protocol import (
    Decision,
    IdentityServer,
    ProtocolTrace,
    Rejected,
    RendezvousRegistry,
    TokenRecord,
    UserEquipment,
    Verifier,
    Vote,
)

POSITIONS = [(500.0, 500.0), (530.0, 520.0), (470.0, 480.0), (560.0, 470.0), (440.0, 540.0)]
WITNESS_DECISIONS = {1: Decision.TRUE, 2: Decision.TRUE, 3: Decision.TRUE, 4: Decision.FALSE}
SLOW_TO_ANSWER = {4}  # device auto-replies defer, user answers later


@dataclass
class DemoOutcome:
    trace: ProtocolTrace
    status: str
    duplicate_rejected: bool
    tickets_issued: dict
    deposits: list  # (tau, rp index)

    @property
    def ok(self) -> bool:
        return self.status == "confirmed" and self.duplicate_rejected


def run_demo(seed: int = 0, rp_count: int = 8, params: crypto.GroupParams = crypto.MODP_2048) -> DemoOutcome:
    rng = random.Random(seed)
    trace = ProtocolTrace()
    ues = [UserEquipment(i, rng) for i in range(len(POSITIONS))]
    identity = IdentityServer(range(len(ues)), rng)
    verifier = Verifier(identity.public_key)
    registry = RendezvousRegistry(rp_count)
    tickets_issued = {i: 0 for i in range(len(ues))}

    def ticket_for(node: int, hm: bytes, now: float):
        trace.log(now, f"UE{node}", "IS", "ticket-request", hm)
        ticket = identity.issue_ticket(node, hm, now)
        tickets_issued[node] += 1
        trace.log(now, "IS", f"UE{node}", "ticket", hm, f"upsilon={ticket.upsilon[:4].hex()}")
        return ticket

    # token negotiation among UE0's one-hop neighbourhood
    now = 0.0
    trace.log(now, "-", "-", "phase", detail="token negotiation")
    graph = build_graph(np.array(POSITIONS), RadioConfig())
    group = [0] + sorted(k_hop_neighbors(graph, 0, 1))
    result = crypto.gdh_exchange([params.random_exponent(rng) for _ in group], params)
    for msg in result.transcript:
        receiver = "all" if msg.receiver is None else f"UE{group[msg.receiver]}"
        kind = "gdh-broadcast" if msg.receiver is None else "gdh-upflow"
        trace.log(now, f"UE{group[msg.sender]}", receiver, kind, detail=f"values={len(msg.values)}")
    for node, key in zip(group, result.member_keys):
        ues[node].store_token(TokenRecord.from_key(key, now))
    tau = ues[0].tokens[0].tau
    trace.log(now, "-", "-", "token", detail=f"tau={tau.hex()} members={len(group)}")

    # event reporting
    now = 60.0
    trace.log(now, "-", "-", "phase", detail="event reporting")
    reporter = ues[0]
    message = reporter.new_message(*POSITIONS[0], now, b"collapsed building, people trapped")
    hm = message.digest()
    report_ticket = ticket_for(0, hm, now)
    report = reporter.build_report(message, report_ticket, now)
    trace.log(now, "UE0", "Verifier", "report", hm, f"tokens={len(report.alphas)}")
    verifier.accept_report(report, now, source="UE0")
    trace.log(now, "Verifier", "UE0", "report-accepted", hm)
    # witnesses who saw the event confirm ahead of time
    for node in (1, 2):
        ues[node].confirm_proactively(hm, Decision.TRUE)

    # confirmation request
    trace.log(now, "-", "-", "phase", detail="confirmation request")
    deposits = []
    for a_tau, ct in report.alphas:
        index = registry.deposit(a_tau, ct)
        deposits.append((a_tau, index))
        trace.log(now, "Verifier", f"RP{index}", "deposit", hm, f"rp={index} tau={a_tau.hex()}")

    # witness feedback
    now = 120.0
    trace.log(now, "-", "-", "phase", detail="witness feedback")
    for node in (1, 2, 3, 4):
        ue = ues[node]
        trace.log(now, f"UE{node}", f"RP{registry.index(tau)}", "poll")
        for opened in ue.poll(registry):
            if opened.digest() != hm:
                continue
            trace.log(now, f"RP{registry.index(tau)}", f"UE{node}", "request", hm, "decrypted")
            ticket = ticket_for(node, hm, now)
            decision = ue.decide(opened, default=Decision.DEFER)
            if decision is Decision.DEFER and node not in SLOW_TO_ANSWER:
                decision = WITNESS_DECISIONS[node]
            trace.log(now, f"UE{node}", "Verifier", "vote", hm, decision.value)
            verifier.accept_vote(hm, Vote(ticket, decision), now, source=f"UE{node}")
            trace.log(now, "Verifier", f"UE{node}", "vote-accepted", hm)
            if decision is Decision.DEFER:
                later = now + 30.0
                final = WITNESS_DECISIONS[node]
                trace.log(later, f"UE{node}", "Verifier", "vote", hm, f"{final.value} (replaces defer)")
                verifier.accept_vote(hm, Vote(ticket, final), later, source=f"UE{node}")
                trace.log(later, "Verifier", f"UE{node}", "vote-accepted", hm)

    # the reporter shares the token but its upsilon is already spent on the report
    now = 180.0
    duplicate_rejected = False
    trace.log(now, "UE0", "Verifier", "vote", hm, Decision.TRUE.value)
    try:
        verifier.accept_vote(hm, Vote(report_ticket, Decision.TRUE), now, source="UE0")
        trace.log(now, "Verifier", "UE0", "vote-accepted", hm)
    except Rejected as exc:
        duplicate_rejected = True
        trace.log(now, "Verifier", "UE0", "vote-rejected", hm, exc.reason)

    tally = verifier.tally(hm, now)
    trace.log(now, "Verifier", "-", "tally", hm,
              f"true={tally.true} false={tally.false} unsure={tally.unsure} defer={tally.defer} -> {tally.status}")
    return DemoOutcome(trace, tally.status, duplicate_rejected, tickets_issued, deposits)
