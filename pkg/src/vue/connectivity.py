"""Radio link abstraction and k-hop neighbourhoods.

Links are evaluated on position snapshots. Disk mode connects nodes closer
than ``range``; lognormal mode applies log-distance path loss plus one
Gaussian shadowing draw per unordered pair and snapshot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

SPEED_OF_LIGHT = 299_792_458.0


def free_space_loss_db(distance: float, frequency_hz: float) -> float:
    return 20.0 * math.log10(4.0 * math.pi * distance * frequency_hz / SPEED_OF_LIGHT)


@dataclass(frozen=True)
class RadioConfig:
    mode: str = "disk"
    range: float = 100.0
    tx_power: float = 17.0
    path_loss_exponent: float = 3.0
    shadowing_sigma: float = 9.5
    sensitivity: float = -83.05
    reference_loss_db: float = 40.05
    shadowing_cutoff_sigmas: float = 4.0

    def __post_init__(self):
        if self.mode not in ("disk", "lognormal"):
            raise ValueError(f"unknown radio mode {self.mode!r}")
        if self.range <= 0:
            raise ValueError("range must be positive")
        if self.path_loss_exponent <= 0:
            raise ValueError("path loss exponent must be positive")
        if self.shadowing_sigma < 0:
            raise ValueError("shadowing sigma must be >= 0")

    @property
    def max_distance(self) -> float:
        """Largest distance at which a link can exist (candidate search radius)."""
        if self.mode == "disk":
            return self.range
        budget = self.tx_power - self.sensitivity - self.reference_loss_db
        budget += self.shadowing_cutoff_sigmas * self.shadowing_sigma
        return 10.0 ** (budget / (10.0 * self.path_loss_exponent))


def path_loss_db(distance, cfg: RadioConfig):
    d = np.asarray(distance, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    out = cfg.reference_loss_db + 10.0 * cfg.path_loss_exponent * np.log10(d)
    return float(out) if out.ndim == 0 else out


def _links(dist: np.ndarray, cfg: RadioConfig, shadowing: np.ndarray | None) -> np.ndarray:
    if cfg.mode == "disk":
        return dist <= cfg.range
    # co-located nodes always hear each other
    safe = np.maximum(dist, 1e-9)
    received = cfg.tx_power - path_loss_db(safe, cfg) - shadowing
    return (received >= cfg.sensitivity) | (dist <= 0)


def link_up(pos_a, pos_b, cfg: RadioConfig, rng: np.random.Generator | None = None) -> bool:
    d = math.dist(pos_a, pos_b)
    if cfg.mode == "disk":
        return d <= cfg.range
    if d <= 0:
        return True
    shadow = rng.normal(0.0, cfg.shadowing_sigma) if cfg.shadowing_sigma > 0 else 0.0
    return cfg.tx_power - path_loss_db(d, cfg) - shadow >= cfg.sensitivity


@dataclass
class ConnectivityGraph:
    """Symmetric, irreflexive adjacency over node indices, stored as CSR."""

    n: int
    adjacency: sp.csr_matrix

    @classmethod
    def from_pairs(cls, n: int, i: np.ndarray, j: np.ndarray) -> "ConnectivityGraph":
        rows = np.concatenate((i, j))
        cols = np.concatenate((j, i))
        data = np.ones(len(rows), dtype=bool)
        adj = sp.csr_matrix((data, (rows, cols)), shape=(n, n), dtype=bool)
        return cls(n, adj)

    def edges(self) -> set[tuple[int, int]]:
        coo = sp.triu(self.adjacency, k=1).tocoo()
        return set(zip(coo.row.tolist(), coo.col.tolist()))

    def neighbors(self, node: int) -> np.ndarray:
        a = self.adjacency
        return a.indices[a.indptr[node]:a.indptr[node + 1]]


def candidate_pairs(positions: np.ndarray, radius: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All pairs i < j within ``radius`` found through a uniform spatial hash grid.

    Returns (i, j, distance), sorted lexicographically by (i, j).
    """
    pos = np.asarray(positions, dtype=float).reshape(-1, 2)
    n = len(pos)
    empty = (np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64), np.empty(0))
    if n < 2:
        return empty
    cell = np.floor((pos - pos.min(axis=0)) / radius).astype(np.int64)
    ncols = int(cell[:, 1].max()) + 3
    key = (cell[:, 0] + 1) * ncols + (cell[:, 1] + 1)
    order = np.argsort(key, kind="stable")
    skey = key[order]
    is_, js = [], []
    # half stencil: same cell plus four of the eight neighbours
    for dx, dy in ((0, 0), (0, 1), (1, -1), (1, 0), (1, 1)):
        # querying with sorted keys keeps searchsorted fast
        target = skey + dx * ncols + dy
        lo = np.searchsorted(skey, target, side="left")
        hi = np.searchsorted(skey, target, side="right")
        counts = hi - lo
        total = int(counts.sum())
        if total == 0:
            continue
        src = np.repeat(order, counts)
        starts = np.repeat(lo - np.cumsum(counts) + counts, counts)
        dst = order[np.arange(total) + starts]
        if (dx, dy) == (0, 0):
            keep = src < dst
            src, dst = src[keep], dst[keep]
        is_.append(src)
        js.append(dst)
    if not is_:
        return empty
    a = np.concatenate(is_)
    b = np.concatenate(js)
    i, j = np.minimum(a, b), np.maximum(a, b)
    d = np.hypot(*(pos[i] - pos[j]).T)
    keep = d <= radius
    i, j, d = i[keep], j[keep], d[keep]
    srt = np.argsort(i * n + j, kind="stable")
    return i[srt], j[srt], d[srt]


def build_graph(positions, cfg: RadioConfig, rng: np.random.Generator | None = None) -> ConnectivityGraph:
    """Connectivity snapshot.

    In lognormal mode one shadowing value is drawn per candidate pair, in
    (i, j) order, so the result depends only on the positions and ``rng``.
    """
    pos = np.asarray(positions, dtype=float).reshape(-1, 2)
    i, j, d = candidate_pairs(pos, cfg.max_distance)
    shadow = None
    if cfg.mode == "lognormal":
        shadow = rng.normal(0.0, cfg.shadowing_sigma, len(i)) if cfg.shadowing_sigma > 0 else np.zeros(len(i))
    keep = _links(d, cfg, shadow)
    return ConnectivityGraph.from_pairs(len(pos), i[keep], j[keep])


def brute_force_graph(positions, cfg: RadioConfig, rng: np.random.Generator | None = None) -> ConnectivityGraph:
    """All-pairs reference used to check ``build_graph``."""
    pos = np.asarray(positions, dtype=float).reshape(-1, 2)
    n = len(pos)
    i, j = np.triu_indices(n, k=1)
    d = np.hypot(pos[j, 0] - pos[i, 0], pos[j, 1] - pos[i, 1])
    cand = d <= cfg.max_distance
    i, j, d = i[cand], j[cand], d[cand]
    shadow = None
    if cfg.mode == "lognormal":
        shadow = rng.normal(0.0, cfg.shadowing_sigma, len(i)) if cfg.shadowing_sigma > 0 else np.zeros(len(i))
    keep = _links(d, cfg, shadow)
    return ConnectivityGraph.from_pairs(n, i[keep], j[keep])


def hop_distances(graph: ConnectivityGraph, sources, max_hops: int) -> np.ndarray:
    """Breadth-first hop counts from each source, capped at ``max_hops``.

    Returns an int array of shape (len(sources), n); unreachable entries and
    anything beyond ``max_hops`` are -1. Each BFS level is one sparse product,
    so all sources expand together.
    """
    sources = np.asarray(sources, dtype=np.int64)
    s, n = len(sources), graph.n
    dist = np.full((s, n), -1, dtype=np.int64)
    if s == 0 or n == 0:
        return dist
    dist[np.arange(s), sources] = 0
    frontier = sp.csr_matrix(
        (np.ones(s, dtype=bool), (np.arange(s), sources)), shape=(s, n), dtype=bool
    )
    adj = graph.adjacency
    for hop in range(1, max_hops + 1):
        reach = (frontier @ adj).tocoo()
        r, c = reach.row, reach.col
        fresh = dist[r, c] < 0
        r, c = r[fresh], c[fresh]
        if len(r) == 0:
            break
        dist[r, c] = hop
        frontier = sp.csr_matrix((np.ones(len(r), dtype=bool), (r, c)), shape=(s, n), dtype=bool)
    return dist


def k_hop_neighbors(graph: ConnectivityGraph, node: int, k: int) -> set[int]:
    if k < 1:
        raise ValueError("k must be >= 1")
    d = hop_distances(graph, [node], k)[0]
    return set(np.flatnonzero(d > 0).tolist())
