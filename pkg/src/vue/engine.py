"""Seeded scenario simulation: mobility, token negotiation, reporting, voting.

One call to :func:`simulate` moves the population once and evaluates any
number of hop limits and malicious ratios on that trajectory. Every source of
randomness draws from its own stream (mobility, timers, events, adversary
selection, key material, shadowing), so the numbers for a given
(hop limit, malicious ratio) pair do not depend on which other pairs are
evaluated alongside it. :func:`run_scenario` is the single-pair case.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from vue import crypto
from vue.config import ConfigError, ScenarioConfig
from vue.connectivity import build_graph, hop_distances
from vue.crypto import GroupKey
from vue.mobility import init_population
from vue.protocol import (
    Decision,
    IdentityServer,
    RendezvousRegistry,
    TokenBucket,
    TokenRecord,
    UserEquipment,
    Verifier,
    Vote,
)
from vue.protocol.entities import open_request

_MOBILITY, _TIMERS, _EVENTS, _ADVERSARY, _CRYPTO, _SHADOWING = range(6)
_EPS = 1e-9


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


def _py_random(seed: int, *key: int) -> random.Random:
    return random.Random(int(stream(seed, *key).integers(0, 2**63)))


def malicious_count(ratio: float, n: int) -> int:
    return int(np.floor(ratio * n + 0.5 + _EPS))


@dataclass(frozen=True)
class Event:
    event_id: int
    center: tuple[float, float]
    radius: float


@dataclass(frozen=True)
class ReportDetail:
    report_id: int
    event_id: int
    reporter: int
    time: float
    tokens: int
    witnesses: tuple[int, ...]
    decisive_benign: int
    malicious: int
    unsure: int
    benign_majority: bool
    status: str = ""

    @property
    def witness_count(self) -> int:
        return len(self.witnesses)


@dataclass(frozen=True)
class ScenarioResult:
    hop_limit: int
    malicious_ratio: float
    reports_total: int
    avg_witnesses: float
    avg_benign_witnesses: float
    unsure_ratio: float
    benign_majority_ratio: float
    no_reports: bool
    witness_counts: tuple[int, ...] = ()
    details: tuple[ReportDetail, ...] = field(default=(), repr=False)

    def metrics(self) -> dict[str, float]:
        return {
            "reports": float(self.reports_total),
            "avg_witnesses": self.avg_witnesses,
            "unsure_ratio": self.unsure_ratio,
            "benign_majority_ratio": self.benign_majority_ratio,
        }


def decide_vote(malicious: bool, in_area: bool, report_true: bool = True) -> Decision:
    """Witness behaviour: adversaries always vote against the truth, benign
    witnesses only decide when they were inside the event circle."""
    truth = Decision.TRUE if report_true else Decision.FALSE
    lie = Decision.FALSE if report_true else Decision.TRUE
    if malicious:
        return lie
    return truth if in_area else Decision.UNSURE


def benign_majority(decisive_benign: int, malicious: int) -> bool:
    return decisive_benign > malicious


# ---------------------------------------------------------------------------
# Simulation state helpers
# ---------------------------------------------------------------------------

def stationary_phase(lo: float, hi: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """First firing times of n renewal timers with U(lo, hi) intervals, in steady state.

    The interval straddling t=0 is length-biased (density proportional to its
    length) and t=0 falls uniformly inside it. Drawn this way the firing rate
    is flat from the start instead of bunching around multiples of the mean.
    """
    length = np.sqrt(lo * lo + rng.random(n) * (hi * hi - lo * lo))
    return rng.random(n) * length


def place_events(cfg: ScenarioConfig, rng: np.random.Generator) -> list[Event]:
    m = cfg.event_count
    xs = rng.uniform(0.0, cfg.field.width, m)
    ys = rng.uniform(0.0, cfg.field.height, m)
    radii = rng.uniform(cfg.event_radius_min, cfg.event_radius_max, m)
    return [Event(i, (float(xs[i]), float(ys[i])), float(radii[i])) for i in range(m)]


class _NegotiationLog:
    """Groups formed at one hop limit, in firing order."""

    def __init__(self):
        self.times: list[float] = []
        self.groups: list[np.ndarray] = []

    def add(self, t: float, members: np.ndarray):
        self.times.append(t)
        self.groups.append(members)

    def freeze(self, n: int):
        self.time = np.array(self.times, dtype=float)
        count = len(self.groups)
        lengths = np.array([len(g) for g in self.groups], dtype=np.int64)
        cols = np.concatenate(self.groups) if count else np.empty(0, dtype=np.int64)
        rows = np.repeat(np.arange(count), lengths)
        member = sp.csr_matrix((np.ones(len(cols), dtype=bool), (rows, cols)), shape=(count, n))
        self.by_group = member
        self.by_node = member.tocsc()

    def groups_of(self, node: int) -> np.ndarray:
        c = self.by_node
        return c.indices[c.indptr[node]:c.indptr[node + 1]]

    def members(self, group: int) -> np.ndarray:
        r = self.by_group
        return r.indices[r.indptr[group]:r.indptr[group + 1]]


class _EventTracker:
    """Records, per event, nodes crossing into the circle in tick order.

    An event stops being tracked once an entrant outside ``never_reporters``
    appears: that entrant reports under every evaluated malicious ratio.
    """

    def __init__(self, events: list[Event], n: int, never_reporters: np.ndarray):
        self.centers = np.array([e.center for e in events], dtype=float).reshape(-1, 2)
        self.r2 = np.array([e.radius for e in events], dtype=float) ** 2
        self.pending = list(range(len(events)))
        self.was_inside = np.zeros((len(events), n), dtype=bool)
        self.entrants: list[list[tuple[int, int]]] = [[] for _ in events]
        self.never = never_reporters

    def observe(self, tick: int, pos: np.ndarray) -> bool:
        idx = np.array(self.pending)
        diff = pos[None, :, :] - self.centers[idx, None, :]
        inside = np.einsum("ijk,ijk->ij", diff, diff) <= self.r2[idx, None]
        new = inside & ~self.was_inside[idx]
        self.was_inside[idx] = inside
        recorded = False
        still = []
        for row, e in enumerate(idx):
            nodes = np.flatnonzero(new[row])
            if len(nodes):
                self.entrants[e].extend((tick, int(v)) for v in nodes)
                recorded = True
                if not self.never[nodes].all():
                    continue
            still.append(int(e))
        self.pending = still
        return recorded


@dataclass
class _Trajectory:
    """Everything the evaluation needs from one simulated run."""

    cfg: ScenarioConfig
    events: list[Event]
    rank: np.ndarray
    logs: dict
    entrants: list
    snapshots: dict


def _simulate_trajectory(cfg: ScenarioConfig, hop_limits: list[int], max_ratio: float) -> _Trajectory:
    if cfg.negotiation_interval_min < cfg.dt:
        raise ConfigError("negotiation.interval_min_s", "must be at least one time step")
    n = cfg.node_count
    seed = cfg.seed
    mob_rng = stream(seed, _MOBILITY)
    timer_rng = stream(seed, _TIMERS)
    pop = init_population(n, cfg.mobility, cfg.field, mob_rng)
    next_fire = stationary_phase(cfg.negotiation_interval_min, cfg.negotiation_interval_max, n, timer_rng)
    events = place_events(cfg, stream(seed, _EVENTS))
    rank = np.empty(n, dtype=np.int64)
    rank[stream(seed, _ADVERSARY).permutation(n)] = np.arange(n)
    never = rank < malicious_count(max_ratio, n)

    ks = sorted(set(hop_limits))
    kmax = ks[-1]
    logs = {k: _NegotiationLog() for k in ks}
    tracker = _EventTracker(events, n, never)
    snapshots: dict[int, np.ndarray] = {}
    steps = int(round(cfg.duration / cfg.dt))
    first_event_tick = int(np.ceil(cfg.warmup / cfg.dt - _EPS))
    lognormal = cfg.radio.mode == "lognormal"

    for i in range(steps):
        t = i * cfg.dt
        if i:
            pop.step(cfg.dt, mob_rng)
        fired = np.flatnonzero(next_fire <= t + _EPS)
        if len(fired):
            next_fire[fired] += timer_rng.uniform(
                cfg.negotiation_interval_min, cfg.negotiation_interval_max, len(fired)
            )
            # tokens that expire before events activate can never be used
            if t + cfg.token_validity > cfg.warmup:
                graph = build_graph(pop.positions, cfg.radio, stream(seed, _SHADOWING, i) if lognormal else None)
                hops = hop_distances(graph, fired, kmax)
                for k in ks:
                    within = (hops >= 0) & (hops <= k)
                    for row in range(len(fired)):
                        members = np.flatnonzero(within[row])
                        if len(members) >= 2:
                            logs[k].add(t, members)
        if i >= first_event_tick and tracker.pending:
            if tracker.observe(i, pop.positions):
                snapshots[i] = pop.positions.copy()

    for log in logs.values():
        log.freeze(n)
    return _Trajectory(cfg, events, rank, logs, tracker.entrants, snapshots)


# ---------------------------------------------------------------------------
# Key material
# ---------------------------------------------------------------------------

class _Keys:
    """Group keys for every negotiation at one hop limit.

    Model mode draws one random 256-bit key per group. Real mode runs GDH.2
    and keeps each member's own derived key.
    """

    def __init__(self, cfg: ScenarioConfig, k: int, log: _NegotiationLog):
        self.mode = cfg.crypto_mode
        self.log = log
        self.validity = cfg.token_validity
        count = len(log.times)
        if self.mode == "model":
            raw = stream(cfg.seed, _CRYPTO, k).bytes(32 * count)
            self.shared = [GroupKey(raw[32 * g:32 * g + 32]) for g in range(count)]
            self.member_keys = None
            return
        params = crypto.GROUPS[cfg.crypto_group]
        rng = _py_random(cfg.seed, _CRYPTO, k)
        self.shared, self.member_keys = [], []
        for g in range(count):
            members = log.members(g)
            result = crypto.gdh_exchange([params.random_exponent(rng) for _ in members], params)
            self.shared.append(result.key)
            self.member_keys.append(dict(zip(members.tolist(), result.member_keys)))

    def record(self, group: int, node: int) -> TokenRecord:
        key = self.shared[group] if self.member_keys is None else self.member_keys[group][node]
        return TokenRecord.from_key(key, self.log.time[group], self.validity)

    def tokens_of(self, node: int) -> list[TokenRecord]:
        return [self.record(int(g), node) for g in self.log.groups_of(node)]


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def _valid_groups(log: _NegotiationLog, node: int, t: float, validity: float) -> np.ndarray:
    groups = log.groups_of(node)
    times = log.time[groups]
    return groups[(times <= t + _EPS) & (t < times + validity - _EPS)]


class _Protocol:
    """Full message flow for crypto_mode=real: tickets, report, RP deposit,
    witness polling and decryption, votes and tally."""

    def __init__(self, cfg: ScenarioConfig, k: int, ratio: float, keys: _Keys):
        salt = int(round(ratio * 1_000_000))
        self.rng = _py_random(cfg.seed, _CRYPTO, k, salt)
        unlimited = TokenBucket(capacity=float("inf"), refill_per_second=0.0)
        self.identity = IdentityServer(range(cfg.node_count), self.rng, rate_limiter=unlimited)
        self.verifier = Verifier(self.identity.public_key, rate_limiter=TokenBucket(float("inf"), 0.0))
        self.registry = RendezvousRegistry(cfg.rp_count)
        self.keys = keys
        self.ues: dict[int, UserEquipment] = {}

    def ue(self, node: int) -> UserEquipment:
        ue = self.ues.get(node)
        if ue is None:
            ue = UserEquipment(node, self.rng)
            for rec in self.keys.tokens_of(node):
                ue.store_token(rec)
            self.ues[node] = ue
        return ue

    def report(self, reporter: int, event: Event, t: float):
        ue = self.ue(reporter)
        msg = ue.new_message(event.center[0], event.center[1], t, f"event {event.event_id}".encode())
        hm = msg.digest()
        ticket = self.identity.issue_ticket(reporter, hm, t)
        report = ue.build_report(msg, ticket, t)
        self.verifier.accept_report(report, t, source=reporter)
        self.verifier.deposit_requests(report, self.registry)
        return report, hm

    def witness(self, node: int, report, hm: bytes) -> bool:
        """Poll the RPs for the report's tokens this node holds and try to open them."""
        ue = self.ue(node)
        wanted = {tau for tau, _ in report.alphas}
        for tau, ct in self.registry.poll(rec.tau for rec in ue.tokens if rec.tau in wanted):
            try:
                if open_request(ue.tokens, tau, ct).digest() == hm:
                    return True
            except (crypto.AuthFailure, ValueError):
                continue
        return False

    def vote(self, node: int, hm: bytes, decision: Decision, t: float):
        ticket = self.identity.issue_ticket(node, hm, t)
        self.verifier.accept_vote(hm, Vote(ticket, decision), t, source=node)

    def status(self, hm: bytes, t: float) -> str:
        return self.verifier.tally(hm, t + self.verifier.deadline).status


def _evaluate(traj: _Trajectory, k: int, ratio: float, keys: _Keys | None) -> ScenarioResult:
    cfg = traj.cfg
    n = cfg.node_count
    malicious = traj.rank < malicious_count(ratio, n)
    log = traj.logs[k]
    proto = _Protocol(cfg, k, ratio, keys) if cfg.crypto_mode == "real" else None

    reports = []
    for event in traj.events:
        pick = next(((tick, v) for tick, v in traj.entrants[event.event_id] if not malicious[v]), None)
        if pick is not None:
            reports.append((pick[0], event.event_id, pick[1]))
    reports.sort()

    details = []
    for report_id, (tick, event_id, reporter) in enumerate(reports):
        event = traj.events[event_id]
        t = tick * cfg.dt
        groups = _valid_groups(log, reporter, t, cfg.token_validity)
        holders = set()
        for g in groups:
            holders.update(log.members(int(g)).tolist())
        holders.discard(reporter)
        status = ""
        if proto is not None:
            report, hm = proto.report(reporter, event, t)
            witnesses = sorted(v for v in holders if proto.witness(v, report, hm))
        else:
            witnesses = sorted(holders)
        pos = traj.snapshots[tick]
        cx, cy = event.center
        benign_dec = mal = unsure = 0
        for w in witnesses:
            in_area = (pos[w, 0] - cx) ** 2 + (pos[w, 1] - cy) ** 2 <= event.radius ** 2
            decision = decide_vote(bool(malicious[w]), bool(in_area))
            if malicious[w]:
                mal += 1
            elif decision is Decision.UNSURE:
                unsure += 1
            else:
                benign_dec += 1
            if proto is not None:
                proto.vote(w, hm, decision, t)
        if proto is not None:
            status = proto.status(hm, t)
        details.append(ReportDetail(
            report_id, event_id, reporter, t, len(groups), tuple(witnesses),
            benign_dec, mal, unsure, benign_majority(benign_dec, mal), status,
        ))

    return _summarise(k, ratio, details)


def _summarise(k: int, ratio: float, details: list[ReportDetail]) -> ScenarioResult:
    total = len(details)
    if total == 0:
        return ScenarioResult(k, ratio, 0, 0.0, 0.0, 0.0, 0.0, True)
    counts = tuple(d.witness_count for d in details)
    benign_votes = sum(d.decisive_benign + d.unsure for d in details)
    unsure_votes = sum(d.unsure for d in details)
    return ScenarioResult(
        hop_limit=k,
        malicious_ratio=ratio,
        reports_total=total,
        avg_witnesses=sum(counts) / total,
        avg_benign_witnesses=benign_votes / total,
        unsure_ratio=unsure_votes / benign_votes if benign_votes else 0.0,
        benign_majority_ratio=sum(d.benign_majority for d in details) / total,
        no_reports=False,
        witness_counts=counts,
        details=tuple(details),
    )


def simulate(cfg: ScenarioConfig, hop_limits=None, malicious_ratios=None) -> dict[tuple[int, float], ScenarioResult]:
    """Run one seeded trajectory and evaluate every (hop limit, ratio) pair.

    Returns a dict keyed by ``(hop_limit, malicious_ratio)``.
    """
    ks = sorted(set(hop_limits)) if hop_limits is not None else [cfg.hop_limit]
    ratios = sorted(set(malicious_ratios)) if malicious_ratios is not None else [cfg.malicious_ratio]
    if not ks or min(ks) < 1:
        raise ConfigError("negotiation.hop_limit", "hop limits must be >= 1")
    if not ratios or not all(0.0 <= r <= 1.0 for r in ratios):
        raise ConfigError("adversary.malicious_ratio", "ratios must lie in [0, 1]")
    if cfg.seed < 0:
        raise ConfigError("sim.seed", "must be >= 0")
    traj = _simulate_trajectory(cfg, ks, ratios[-1])
    out = {}
    for k in ks:
        keys = _Keys(cfg, k, traj.logs[k])
        for r in ratios:
            out[(k, r)] = _evaluate(traj, k, r, keys)
    return out


def run_scenario(cfg: ScenarioConfig) -> ScenarioResult:
    return simulate(cfg)[(cfg.hop_limit, cfg.malicious_ratio)]
