"""Parameter sweeps over mobility model, hop limit and malicious ratio.

Each (model, repetition) unit simulates one trajectory and evaluates every
hop limit and malicious ratio on it, so cells of the same repetition share
their random numbers. Units are independent and may run in worker
processes; rows are always written in the same order.
"""

from __future__ import annotations

import csv
import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from vue.config import SweepSpec
from vue.engine import ScenarioResult, simulate
from vue.stats import METRICS, mean_ci

RAW_COLUMNS = (
    "model", "k", "malicious_ratio", "repetition", "seed",
    "reports", "avg_witnesses", "unsure_ratio", "benign_majority_ratio",
)
SUMMARY_COLUMNS = ("model", "k", "malicious_ratio", "repetitions") + tuple(
    f"{m}_{suffix}" for m in METRICS for suffix in ("mean", "ci99_low", "ci99_high")
)


def derive_seed(master: int, unit: int, repetition: int) -> int:
    data = b"vue-sweep" + master.to_bytes(16, "big", signed=True) + unit.to_bytes(4, "big") + repetition.to_bytes(4, "big")
    return int.from_bytes(hashlib.sha256(data).digest()[:8], "big") >> 1


@dataclass(frozen=True)
class RawRow:
    model: str
    k: int
    malicious_ratio: float
    repetition: int
    seed: int
    result: ScenarioResult

    def values(self) -> list:
        m = self.result.metrics()
        return [self.model, self.k, self.malicious_ratio, self.repetition, self.seed,
                self.result.reports_total, m["avg_witnesses"], m["unsure_ratio"], m["benign_majority_ratio"]]


def _run_unit(args) -> list[RawRow]:
    spec, model_index, repetition = args
    model = spec.models[model_index]
    seed = derive_seed(spec.base.seed, model_index, repetition)
    cfg = replace(spec.base, mobility=replace(spec.base.mobility, model=model), seed=seed)
    results = simulate(cfg, spec.hop_limits, spec.malicious_ratios)
    return [RawRow(model, k, r, repetition, seed, res) for (k, r), res in sorted(results.items())]


def run_sweep(spec: SweepSpec, parallelism: int = 1) -> list[RawRow]:
    """Rows ordered by model (as listed), k, malicious ratio, repetition."""
    units = [(spec, mi, rep) for mi in range(len(spec.models)) for rep in range(spec.repetitions)]
    if parallelism > 1 and len(units) > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            chunks = list(pool.map(_run_unit, units))
    else:
        chunks = [_run_unit(u) for u in units]
    rows = [row for chunk in chunks for row in chunk]
    order = {m: i for i, m in enumerate(spec.models)}
    rows.sort(key=lambda r: (order[r.model], r.k, r.malicious_ratio, r.repetition))
    return rows


def summarise(rows: list[RawRow]) -> list[dict]:
    cells: dict[tuple, list[RawRow]] = {}
    for row in rows:
        cells.setdefault((row.model, row.k, row.malicious_ratio), []).append(row)
    out = []
    for (model, k, ratio), members in cells.items():
        entry = {"model": model, "k": k, "malicious_ratio": ratio, "repetitions": len(members)}
        for m in METRICS:
            values = [r.result.metrics()[m] for r in members]
            if len(values) >= 2:
                s = mean_ci(values)
                entry[f"{m}_mean"], entry[f"{m}_ci99_low"], entry[f"{m}_ci99_high"] = s.mean, s.low, s.high
            else:
                entry[f"{m}_mean"] = values[0]
                entry[f"{m}_ci99_low"] = entry[f"{m}_ci99_high"] = math.nan
        out.append(entry)
    return out


def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def write_csv(path, columns, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def write_raw(path, rows: list[RawRow]) -> Path:
    return write_csv(path, RAW_COLUMNS, (r.values() for r in rows))


def write_summary(path, summary: list[dict]) -> Path:
    return write_csv(path, SUMMARY_COLUMNS, ([e[c] for c in SUMMARY_COLUMNS] for e in summary))


def read_summary(path) -> list[dict]:
    with Path(path).open(encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        for key, value in row.items():
            if key == "model":
                continue
            row[key] = int(value) if key in ("k", "repetitions") else float(value)
    return rows
