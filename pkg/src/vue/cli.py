"""Command line entry point: ``vue run | sweep | demo | recover``.

Exit codes: 0 success, 1 malformed configuration or input, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from vue.config import ConfigError, build_scenario, build_sweep, dump_scenario, dump_sweep, load_values

log = logging.getLogger("vue")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

RESULT_COLUMNS = (
    "model", "k", "malicious_ratio", "seed", "reports", "avg_witnesses",
    "avg_benign_witnesses", "unsure_ratio", "benign_majority_ratio", "no_reports",
)
DETAIL_COLUMNS = (
    "report_id", "event_id", "reporter", "time", "tokens", "witnesses",
    "decisive_benign", "malicious", "unsure", "benign_majority",
)


class _InputError(Exception):
    pass


def _load(path, seed):
    try:
        values = load_values(path)
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror or exc}") from None
    if seed is not None:
        values["sim.seed"] = str(seed)
    return values


def cmd_run(args) -> int:
    from vue.engine import run_scenario
    from vue.sweep import write_csv

    cfg = build_scenario(_load(args.config, args.seed))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.resolved.txt").write_text(dump_scenario(cfg), encoding="utf-8")
    res = run_scenario(cfg)
    row = [cfg.mobility.model, res.hop_limit, res.malicious_ratio, cfg.seed, res.reports_total,
           res.avg_witnesses, res.avg_benign_witnesses, res.unsure_ratio, res.benign_majority_ratio,
           int(res.no_reports)]
    write_csv(out / "results.csv", RESULT_COLUMNS, [row])
    write_csv(out / "reports.csv", DETAIL_COLUMNS, (
        [d.report_id, d.event_id, d.reporter, d.time, d.tokens, d.witness_count,
         d.decisive_benign, d.malicious, d.unsure, int(d.benign_majority)] for d in res.details))
    if res.no_reports:
        log.warning("no reports were generated; ratios are reported as 0")
    print(f"reports={res.reports_total} witnesses={res.avg_witnesses:.3f} "
          f"unsure={res.unsure_ratio:.3f} benign_majority={res.benign_majority_ratio:.3f}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    from vue.sweep import run_sweep, summarise, write_raw, write_summary

    spec = build_sweep(_load(args.config, args.seed))
    if args.repetitions is not None:
        if args.repetitions < 1:
            raise ConfigError("sweep.repetitions", "must be >= 1")
        spec = dataclasses.replace(spec, repetitions=args.repetitions)
    if args.parallelism < 1:
        raise ConfigError("--parallelism", "must be >= 1")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.resolved.txt").write_text(dump_sweep(spec), encoding="utf-8")
    rows = run_sweep(spec, args.parallelism)
    write_raw(out / "raw.csv", rows)
    summary = summarise(rows)
    write_summary(out / "summary.csv", summary)
    if not args.no_figures:
        from vue.plotting import render_sweep_figures

        for path in render_sweep_figures(summary, out):
            log.info("wrote %s", path)
    print(f"{len(rows)} raw rows, {len(summary)} cells -> {out}")
    return EXIT_OK


def cmd_demo(args) -> int:
    from vue.demo import run_demo

    outcome = run_demo(seed=args.seed or 0)
    print(outcome.trace.render())
    return EXIT_OK if outcome.ok else EXIT_RUNTIME


def _hex(name: str, text: str) -> bytes:
    try:
        return bytes.fromhex(text)
    except ValueError:
        raise _InputError(f"{name}: malformed hex") from None


def _id_range(text: str) -> range:
    try:
        lo, _, hi = text.partition(":")
        return range(int(lo), int(hi))
    except ValueError:
        raise _InputError("--ids: expected START:STOP") from None


def cmd_recover(args) -> int:
    from vue.protocol import recover_identity

    upsilon = _hex("--upsilon", args.upsilon)
    hm = _hex("--hm", args.hm)
    k_is = _hex("--k-is", args.k_is)
    found = recover_identity(upsilon, hm, k_is, _id_range(args.ids))
    print("not found" if found is None else found)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vue", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one scenario")
    p.add_argument("--config", help="key = value config file (VUE_* env vars override)")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run the model x hop limit x malicious ratio grid")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--repetitions", type=int)
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--no-figures", action="store_true", help="skip the PNG panels")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("demo", help="print a scripted five-node protocol trace")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("recover", help="search an id range for the owner of a vote identifier")
    p.add_argument("--upsilon", required=True)
    p.add_argument("--hm", required=True)
    p.add_argument("--k-is", required=True)
    p.add_argument("--ids", required=True, help="START:STOP, half open")
    p.set_defaults(func=cmd_recover)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
