"""Random Waypoint, Reference Point Group Mobility and Nomadic Community.

A population is kept as struct-of-arrays so that one ``step`` advances all
nodes with a handful of numpy operations.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

MODELS = ("rwp", "rpgm", "nc")

_DEFAULT_PAUSE = {"rwp": 60.0, "rpgm": 60.0, "nc": 900.0}


@dataclass(frozen=True)
class Field:
    width: float = 5000.0
    height: float = 5000.0

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("field dimensions must be positive")


@dataclass(frozen=True)
class MobilityConfig:
    model: str = "rwp"
    speed_min: float = 0.5
    speed_max: float = 1.5
    pause_max: float | None = None  # None: 60 s for rwp/rpgm, 15 min for nc
    group_mean: float = 4.0
    group_var: float = 4.0
    group_radius: float = 5.0
    roaming_radius: float = 25.0

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown mobility model {self.model!r}")
        if not 0 < self.speed_min <= self.speed_max:
            raise ValueError("need 0 < speed_min <= speed_max")
        if self.pause_max is not None and self.pause_max < 0:
            raise ValueError("pause_max must be >= 0")
        if self.group_radius <= 0 or self.roaming_radius <= 0:
            raise ValueError("group and roaming radii must be positive")
        if self.group_var < 0:
            raise ValueError("group_var must be >= 0")

    @property
    def pause(self) -> float:
        return _DEFAULT_PAUSE[self.model] if self.pause_max is None else self.pause_max

    def with_model(self, model: str) -> "MobilityConfig":
        return replace(self, model=model)


def uniform_in_disc(rng: np.random.Generator, count: int, radius: float) -> np.ndarray:
    r = radius * np.sqrt(rng.random(count))
    theta = 2.0 * np.pi * rng.random(count)
    return np.column_stack((r * np.cos(theta), r * np.sin(theta)))


def draw_group_sizes(n: int, mean: float, var: float, rng: np.random.Generator) -> list[int]:
    """Partition n nodes into groups of size round(Normal(mean, var)), at least 1.

    The last group takes whatever remains.
    """
    sizes = []
    left = n
    sd = float(np.sqrt(var))
    while left > 0:
        s = max(1, int(np.rint(rng.normal(mean, sd))))
        s = min(s, left)
        sizes.append(s)
        left -= s
    return sizes


class WaypointWalk:
    """Vectorised random-waypoint movers.

    Movers travel in straight lines at a speed drawn U(speed_min, speed_max)
    and pause U(0, pause_max) on arrival before drawing the next leg.
    ``sampler(rng, count)`` draws destinations.
    """

    def __init__(self, pos, sampler, speed_min, speed_max, pause_max, rng):
        self.pos = np.array(pos, dtype=float)
        self.sampler = sampler
        self.speed_min = speed_min
        self.speed_max = speed_max
        self.pause_max = pause_max
        m = len(self.pos)
        self.dest = sampler(rng, m)
        self.speed = rng.uniform(speed_min, speed_max, m)
        self.pause = np.zeros(m)
        self.arrived = np.zeros(m, dtype=bool)

    def step(self, dt: float, rng: np.random.Generator) -> None:
        paused = self.pause > 0
        self.pause[paused] -= dt

        renew = ~paused & self.arrived
        k = int(renew.sum())
        if k:
            self.dest[renew] = self.sampler(rng, k)
            self.speed[renew] = rng.uniform(self.speed_min, self.speed_max, k)
            self.arrived[renew] = False

        moving = ~paused & ~self.arrived
        delta = self.dest - self.pos
        dist = np.hypot(delta[:, 0], delta[:, 1])
        travel = self.speed * dt
        reach = moving & (dist <= travel)
        go = moving & ~reach
        scale = np.where(go, travel / np.where(dist > 0, dist, 1.0), 0.0)
        self.pos += delta * scale[:, None]
        self.pos[reach] = self.dest[reach]
        k = int(reach.sum())
        if k:
            self.arrived[reach] = True
            self.pause[reach] = rng.uniform(0.0, self.pause_max, k) if self.pause_max > 0 else 0.0


class Population:
    """Node positions plus per-model movement state.

    ``group`` holds each node's group index (-1 under RWP) and ``reference``
    the group reference points (None under RWP).
    """

    def __init__(self, n: int, cfg: MobilityConfig, field: Field, rng: np.random.Generator):
        if n < 0:
            raise ValueError("node count must be >= 0")
        self.n = n
        self.cfg = cfg
        self.field = field
        self._upper = np.array([field.width, field.height])
        pause = cfg.pause

        def in_field(r, count):
            return r.random((count, 2)) * self._upper

        if cfg.model == "rwp":
            self.group = np.full(n, -1)
            self.walk = WaypointWalk(in_field(rng, n), in_field, cfg.speed_min, cfg.speed_max, pause, rng)
            self.offset = None
            self.member_walk = None
            self.positions = self.walk.pos
            return

        sizes = draw_group_sizes(n, cfg.group_mean, cfg.group_var, rng)
        self.group = np.repeat(np.arange(len(sizes)), sizes)
        self.walk = WaypointWalk(in_field(rng, len(sizes)), in_field, cfg.speed_min, cfg.speed_max, pause, rng)
        if cfg.model == "rpgm":
            self.radius = cfg.group_radius
            self.offset = uniform_in_disc(rng, n, self.radius)
            self.member_walk = None
        else:
            self.radius = cfg.roaming_radius
            radius = self.radius

            def in_disc(r, count):
                return uniform_in_disc(r, count, radius)

            self.member_walk = WaypointWalk(
                in_disc(rng, n), in_disc, cfg.speed_min, cfg.speed_max, pause, rng
            )
            self.offset = self.member_walk.pos
        self._place_members()

    @property
    def reference(self):
        return None if self.cfg.model == "rwp" else self.walk.pos

    def reference_of_nodes(self) -> np.ndarray:
        return self.walk.pos[self.group]

    def _place_members(self):
        pos = self.walk.pos[self.group] + self.offset
        self.positions = np.clip(pos, 0.0, self._upper)

    def step(self, dt: float, rng: np.random.Generator) -> None:
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.walk.step(dt, rng)
        if self.cfg.model == "rwp":
            self.positions = self.walk.pos
            return
        if self.cfg.model == "rpgm":
            self.offset = uniform_in_disc(rng, self.n, self.radius)
        else:
            self.member_walk.step(dt, rng)
            self.offset = self.member_walk.pos
        self._place_members()


def init_population(n: int, cfg: MobilityConfig, field: Field, rng: np.random.Generator) -> Population:
    return Population(n, cfg, field, rng)


def step(population: Population, dt: float, rng: np.random.Generator) -> Population:
    population.step(dt, rng)
    return population


def write_trajectory(path, n: int, cfg: MobilityConfig, field: Field, duration: float,
                     dt: float = 1.0, sample_every: float = 10.0, seed: int = 0) -> int:
    """Simulate and dump one ``time,node,x,y`` row per node per sample; returns rows written."""
    rng = np.random.default_rng(seed)
    pop = init_population(n, cfg, field, rng)
    every = max(1, int(round(sample_every / dt)))
    rows = 0
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", "node", "x", "y"])
        for i in range(int(round(duration / dt)) + 1):
            if i:
                pop.step(dt, rng)
            if i % every == 0:
                t = i * dt
                for node, (x, y) in enumerate(pop.positions):
                    w.writerow([f"{t:g}", node, f"{x:.3f}", f"{y:.3f}"])
                    rows += 1
    return rows
