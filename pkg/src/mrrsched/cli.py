"""Command-line entry point: run sweeps, report results, verify oracles.

`run` executes a (policy x arrival-rate x replication) grid from a JSON
config (or the built-in desk-scale default), writing per-run and summary
CSVs. Replication i uses seed base_seed + i for *every* policy, so policies
are compared on identical packet streams and channels. `report` prints the
mean-utility matrix from a results directory; `verify` runs the oracle
cross-check suites.

Output files: runs.csv and summary.csv are deterministic (byte-identical
across reruns of one config); wall-clock timings go to timings.csv, keyed by
(seed, policy, lambda).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import metrics, sim, verify
from .channel import ChannelConfig
from .traffic import TrafficClass, TrafficConfig, default_mixture

WORKERS_ENV = "MRRSCHED_WORKERS"

PAPER_SCALE_RBS = 15
PAPER_SCALE_SUBSCRIBERS = 24
PAPER_LAMBDA_SWEEP = (4000.0, 6000.0, 8000.0)
DEFAULT_POLICIES = ("mrr-lp2", "mrr-ilp:4", "edf", "mxrate", "mud", "mlwdf")


@dataclass
class RunConfig:
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    policies: list[str] = field(default_factory=lambda: list(DEFAULT_POLICIES))
    replications: int = 10
    lambda_sweep: list[float] = field(default_factory=lambda: list(PAPER_LAMBDA_SWEEP))
    base_seed: int = 1234
    output_dir: str = "runs"

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("need at least one replication")
        if not self.policies:
            raise ValueError("need at least one policy")
        if not self.lambda_sweep:
            raise ValueError("need at least one arrival rate")


def desk_config(scale: float = 1 / 3, total_packets: int = 1000,
                replications: int = 10) -> RunConfig:
    """Full-protocol constants shrunk by `scale` so a sweep runs in minutes."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    channel = ChannelConfig(
        n_rbs=max(1, round(PAPER_SCALE_RBS * scale)),
        n_subscribers=max(2, round(PAPER_SCALE_SUBSCRIBERS * scale)),
    )
    return RunConfig(
        channel=channel,
        traffic=TrafficConfig(total_packets=total_packets),
        replications=replications,
        lambda_sweep=[round(l * scale) for l in PAPER_LAMBDA_SWEEP],
    )


# ---------------------------------------------------------------------------
# Config file round-trip
# ---------------------------------------------------------------------------


def _class_to_json(tc: TrafficClass) -> dict:
    out = {
        "share": tc.share,
        "length_bytes": (tc.length_bytes_lo if tc.length_bytes_lo == tc.length_bytes_hi
                         else [tc.length_bytes_lo, tc.length_bytes_hi]),
        "deadline": {tc.deadline_kind: tc.deadline_s},
    }
    if tc.urllc:
        out["urllc"] = True
    else:
        out["priority_per_byte"] = tc.priority_per_byte
    return out


def _class_from_json(obj: dict) -> TrafficClass:
    length = obj["length_bytes"]
    lo, hi = (length, length) if isinstance(length, int) else (length[0], length[1])
    (kind, value), = obj["deadline"].items()
    return TrafficClass(
        share=obj["share"], length_bytes_lo=lo, length_bytes_hi=hi,
        deadline_kind=kind, deadline_s=value,
        priority_per_byte=obj.get("priority_per_byte", 0.0),
        urllc=obj.get("urllc", False),
    )


def config_to_json(cfg: RunConfig) -> dict:
    channel = dataclasses.asdict(cfg.channel)
    traffic = dataclasses.asdict(cfg.traffic)
    traffic["mixture"] = [_class_to_json(tc) for tc in cfg.traffic.mixture]
    return {
        "channel": channel,
        "traffic": traffic,
        "policies": list(cfg.policies),
        "replications": cfg.replications,
        "lambda_sweep": list(cfg.lambda_sweep),
        "base_seed": cfg.base_seed,
        "output_dir": cfg.output_dir,
    }


def config_from_json(obj: dict) -> RunConfig:
    traffic_obj = dict(obj.get("traffic", {}))
    if "mixture" in traffic_obj:
        traffic_obj["mixture"] = [_class_from_json(c) for c in traffic_obj["mixture"]]
    else:
        traffic_obj["mixture"] = default_mixture()
    kwargs = {}
    for name in ("policies", "replications", "lambda_sweep", "base_seed", "output_dir"):
        if name in obj:
            kwargs[name] = obj[name]
    return RunConfig(
        channel=ChannelConfig(**obj.get("channel", {})),
        traffic=TrafficConfig(**traffic_obj),
        **kwargs,
    )


def load_config(path: str) -> RunConfig:
    with open(path) as fh:
        return config_from_json(json.load(fh))


# ---------------------------------------------------------------------------
# Grid execution
# ---------------------------------------------------------------------------


def _one_job(args):
    policy, lam, seed, traffic, channel = args
    return sim.run(policy, traffic, channel, seed=seed, lam=lam)


def execute_grid(cfg: RunConfig, workers: int | None = None) -> list[metrics.SimReport]:
    """All replications of every (policy, lambda) cell, deterministically merged."""
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    jobs = [
        (policy, lam, cfg.base_seed + rep, cfg.traffic, cfg.channel)
        for policy in cfg.policies
        for lam in cfg.lambda_sweep
        for rep in range(cfg.replications)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_one_job, jobs, chunksize=1))
    else:
        reports = [_one_job(j) for j in jobs]
    reports.sort(key=lambda r: (r.policy, r.lam, r.seed))
    return reports


RUN_COLUMNS = ("seed", "policy", "lambda", "utility", "delivered_bytes_fraction",
               "urllc_missed", "decision_histogram")


def write_csvs(out_dir: Path, reports: list[metrics.SimReport]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "runs.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RUN_COLUMNS)
        for r in reports:
            w.writerow([r.seed, r.policy, repr(float(r.lam)),
                        "" if r.utility is None else repr(r.utility),
                        repr(r.delivered_bytes_fraction), r.urllc_missed,
                        json.dumps(r.decision_histogram, sort_keys=True)])
    with open(out_dir / "timings.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("seed", "policy", "lambda", "wall_ms"))
        for r in reports:
            w.writerow([r.seed, r.policy, repr(float(r.lam)), f"{r.wall_ms:.3f}"])
    with open(out_dir / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("policy", "lambda", "runs", "utility_mean", "utility_std",
                    "utility_ci95", "bytes_fraction_mean", "urllc_missed_total",
                    "urllc_overloads_total"))
        for s in metrics.aggregate(reports):
            w.writerow([s.policy, repr(float(s.lam)), s.runs, repr(s.utility_mean),
                        repr(s.utility_std), repr(s.utility_ci95),
                        repr(s.bytes_fraction_mean), s.urllc_missed_total,
                        s.urllc_overloads_total])


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_run(args) -> int:
    try:
        if args.config is not None:
            cfg = load_config(args.config)
        else:
            cfg = desk_config(scale=args.scale if args.scale else 1 / 3)
        if args.scale and args.config is not None:
            scaled = desk_config(scale=args.scale,
                                 total_packets=cfg.traffic.total_packets,
                                 replications=cfg.replications)
            cfg.channel = dataclasses.replace(
                scaled.channel, seed=cfg.channel.seed)
            cfg.lambda_sweep = scaled.lambda_sweep
        if args.seed is not None:
            cfg.base_seed = args.seed
        if args.out is not None:
            cfg.output_dir = args.out
    except (OSError, ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    reports = execute_grid(cfg)
    try:
        write_csvs(Path(cfg.output_dir), reports)
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    print(f"wrote {len(reports)} runs to {cfg.output_dir}/runs.csv")
    return 0


def _utility_matrix(rows):
    policies_ = sorted({r["policy"] for r in rows})
    lams = sorted({float(r["lambda"]) for r in rows})
    cells = {}
    for r in rows:
        key = (r["policy"], float(r["lambda"]))
        if r["utility"]:
            cells.setdefault(key, []).append(float(r["utility"]))
    return policies_, lams, cells


def cmd_report(args) -> int:
    path = Path(args.dir) / "runs.csv"
    if not path.exists():
        print("no runs found", file=sys.stderr)
        return 1
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        print("no runs found", file=sys.stderr)
        return 1
    policies_, lams, cells = _utility_matrix(rows)
    width = max(len(p) for p in policies_) + 2
    header = "mean utility".ljust(width) + "".join(f"{lam:>12.0f}" for lam in lams)
    print(header)
    for p in policies_:
        line = p.ljust(width)
        for lam in lams:
            vals = cells.get((p, lam), [])
            line += f"{sum(vals) / len(vals):>12.4f}" if vals else f"{'-':>12}"
        print(line)
    return 0


def cmd_verify(args) -> int:
    results = verify.run_all(quick=args.quick)
    ok = True
    for r in results:
        status = "ok" if r.ok else "FAIL"
        print(f"{r.name:<24} {r.passed}/{r.total} {status}")
        ok &= r.ok
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mrrsched",
                                     description="Deadline/priority downlink "
                                                 "scheduling experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a sweep from a JSON config")
    run_p.add_argument("config", nargs="?", default=None,
                       help="JSON config path (omit for the desk-scale default)")
    run_p.add_argument("--seed", type=int, default=None, help="override base seed")
    run_p.add_argument("--scale", type=float, default=None,
                       help="shrink the full protocol by this factor (RBs, MSs, rates)")
    run_p.add_argument("--out", default=None, help="output directory")
    run_p.set_defaults(func=cmd_run)

    rep_p = sub.add_parser("report", help="print the mean-utility matrix")
    rep_p.add_argument("dir", help="directory containing runs.csv")
    rep_p.set_defaults(func=cmd_report)

    ver_p = sub.add_parser("verify", help="run the oracle cross-check suites")
    ver_p.add_argument("--quick", action="store_true",
                       help="smaller instance counts for a fast smoke check")
    ver_p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
