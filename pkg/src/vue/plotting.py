"""Sweep figures: witnesses and unsure ratio over hop limit, benign
majorities over malicious ratio. Rendered with the Agg backend to PNG."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

LABELS = {"rwp": "RWP", "rpgm": "RPGM", "nc": "NC"}
MARKERS = {"rwp": "o", "rpgm": "s", "nc": "^"}

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "figure.figsize": (3.4, 2.6),
    "savefig.dpi": 150,
}


def _series(summary, metric, x_key, fixed_key, fixed_value):
    by_model: dict[str, list] = {}
    for row in summary:
        if abs(row[fixed_key] - fixed_value) > 1e-9:
            continue
        by_model.setdefault(row["model"], []).append(row)
    out = {}
    for model, rows in by_model.items():
        rows.sort(key=lambda r: r[x_key])
        xs = [r[x_key] for r in rows]
        mean = [r[f"{metric}_mean"] for r in rows]
        lo = [r[f"{metric}_ci99_low"] for r in rows]
        hi = [r[f"{metric}_ci99_high"] for r in rows]
        out[model] = (xs, mean, lo, hi)
    return out


def _panel(summary, metric, x_key, fixed_key, fixed_value, xlabel, ylabel, path):
    series = _series(summary, metric, x_key, fixed_key, fixed_value)
    if not series:
        return None
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        for model, (xs, mean, lo, hi) in series.items():
            err = [[m - low for m, low in zip(mean, lo)], [high - m for m, high in zip(mean, hi)]]
            if any(v != v for pair in err for v in pair):  # NaN: single repetition
                err = None
            ax.errorbar(xs, mean, yerr=err, marker=MARKERS.get(model, "o"), ms=4, capsize=2,
                        label=LABELS.get(model, model))
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return Path(path)


def render_sweep_figures(summary: list[dict], out_dir) -> list[Path]:
    """Write the three panels next to summary.csv; returns the files written.

    Hop-limit panels use the smallest malicious ratio in the sweep; the
    malicious-ratio panel uses the smallest hop limit.
    """
    if not summary:
        return []
    out_dir = Path(out_dir)
    ratio0 = min(r["malicious_ratio"] for r in summary)
    k0 = min(r["k"] for r in summary)
    written = [
        _panel(summary, "avg_witnesses", "k", "malicious_ratio", ratio0,
               "hop limit k", "witnesses per report", out_dir / "witnesses_vs_k.png"),
        _panel(summary, "unsure_ratio", "k", "malicious_ratio", ratio0,
               "hop limit k", "ratio of unsure witnesses", out_dir / "unsure_vs_k.png"),
        _panel(summary, "benign_majority_ratio", "malicious_ratio", "k", k0,
               "ratio of malicious nodes", "ratio of benign majorities", out_dir / "benign_majority_vs_malicious.png"),
    ]
    return [p for p in written if p is not None]
