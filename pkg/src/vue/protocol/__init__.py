"""Protocol entities, messages and encodings."""

from vue.protocol.entities import (
    BAD_SIGNATURE,
    DUPLICATE,
    RATE_LIMITED,
    UNKNOWN_IDENTITY,
    UNKNOWN_REPORT,
    IdentityServer,
    Rejected,
    RendezvousRegistry,
    Tally,
    UserEquipment,
    Verifier,
    build_report,
    compute_vote_identifier,
    open_request,
    recover_identity,
    rp_index,
)
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
from vue.protocol.trace import ProtocolTrace

__all__ = [
    "BAD_SIGNATURE", "DUPLICATE", "RATE_LIMITED", "UNKNOWN_IDENTITY", "UNKNOWN_REPORT",
    "Decision", "IdentityServer", "ProtocolTrace", "Rejected", "RendezvousRegistry", "Report",
    "ReportMessage", "Tally", "TokenBucket", "TokenRecord", "UserEquipment", "Verifier", "Vote",
    "VotingTicket", "build_report", "compute_vote_identifier", "open_request", "recover_identity",
    "rp_index", "ticket_payload",
]
