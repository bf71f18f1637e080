"""Command-line front end: route, simulate, experiment, oracle, validate."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys

from .experiment import ScenarioConfig, load_config, run_configs
from .model import TopologyError, read_document, load_topology
from .oracle import build_dependency_graph, worst_case_exact
from .routing import RouteRequest, RouterKind, route
from .samples import INSTANCES
from .sim import SchedulingPolicy
from .snapshot import Snapshot, instance_document, load_snapshot
from .traffic import CdfTable, TrafficPattern

log = logging.getLogger("bwr")


def _snapshot(args) -> Snapshot:
    if args.builtin:
        return load_snapshot(instance_document(INSTANCES[args.builtin]()))
    if not args.state:
        raise SystemExit("need --state <file> or --builtin <name>")
    return load_snapshot(args.state)


def cmd_route(args):
    snap = _snapshot(args)
    kind = RouterKind.parse(args.router)
    res = route(kind, RouteRequest(snap.new_flow, snap.state, snap.rates))
    names = snap.state.graph.names
    print(json.dumps({
        "router": kind.value,
        "path": [names[n] for n in res.path.nodes],
        "hops": res.path.hops,
        "cost": res.cost,
        "paths_examined": res.paths_examined,
        "elapsed_micros": round(res.elapsed * 1e6),
    }, indent=2))


def cmd_oracle(args):
    snap = _snapshot(args)
    if snap.candidate is None:
        raise SystemExit("snapshot has no candidate path")
    res = worst_case_exact(snap.state, snap.candidate, snap.new_flow.total_volume, args.max_conflicts)
    dep = build_dependency_graph(snap.state, snap.candidate)
    print(json.dumps({
        "worst_time": res.worst_time,
        "witness_order": list(res.witness_order),
        "serial_bound": res.serial_bound,
        "edge_sum_bound": res.edge_sum_bound,
        "permutations": res.permutations,
        "dependency_edges": dep.edge_list(),
    }, indent=2))
    if args.histogram:
        with open(args.histogram, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["completion_time", "orders"])
            for t, n in sorted(res.histogram.items()):
                w.writerow([t, n])


def _configs(args) -> list[ScenarioConfig]:
    if args.config:
        configs = load_config(args.config)
    else:
        configs = [ScenarioConfig()]
    for cfg in configs:
        if args.seed is not None:
            cfg.base_seed = args.seed
        if args.timing:
            cfg.record_timing = True
        if args.router:
            cfg.routers = [RouterKind.parse(r) for r in args.router]
        if args.policy:
            cfg.policies = [SchedulingPolicy.parse(p) for p in args.policy]
    return configs


def cmd_experiment(args):
    configs = _configs(args)
    runs, flows, summary = run_configs(configs, args.out, args.jobs)
    log.info("%d runs, %d flow records written to %s", len(runs), len(flows), args.out)
    for row in summary:
        print(f"{row['topology']:>10} {row['pattern']:>18} {row['router']:>16} {row['policy']:>5}  "
              f"mean={row['mean_fct_mean']:.2f}±{row['mean_fct_std']:.2f}  p99={row['p99_fct_mean']:.2f}")


def cmd_simulate(args):
    configs = _configs(args)
    cfg = configs[0]
    if args.topology:
        cfg.topology = args.topology
    if args.flows or args.pattern or args.mean:
        p = cfg.pattern
        cfg.pattern = TrafficPattern(args.pattern or p.kind, args.mean or p.mean, p.arrival_rate,
                                     args.flows or p.flow_count, p.cdf, p.cdf_source)
    cfg.routers, cfg.policies, cfg.repetitions = cfg.routers[:1], cfg.policies[:1], 1
    runs, _, _ = run_configs([cfg], args.out)
    for m in runs:
        print(f"{m.run_id}: flows={m.flows} mean_fct={m.mean_fct:.3f} p99_fct={m.p99_fct:.3f} max_fct={m.max_fct:.3f}")


def validate_file(path: str) -> str:
    if path.endswith(".csv"):
        table = CdfTable.from_csv(path)
        return f"CDF table with {len(table)} rows, sizes {table.sizes[0]:g}..{table.sizes[-1]:g}"
    doc = read_document(path)
    if isinstance(doc, dict) and "nodes" in doc and "links" in doc:
        g = load_topology(doc)
        return f"topology with {g.num_nodes} nodes, {len(g.edges)} directed edges"
    configs = load_config(path)
    return f"experiment config with {len(configs)} scenario(s)"


def cmd_validate(args):
    bad = 0
    for path in args.files:
        try:
            print(f"{path}: ok ({validate_file(path)})")
        except (TopologyError, ValueError, KeyError, OSError) as exc:
            bad += 1
            print(f"{path}: error: {exc}")
    return 1 if bad else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bwr", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def add_state(p):
        p.add_argument("--state", help="snapshot document (JSON/YAML)")
        p.add_argument("--builtin", choices=sorted(INSTANCES), help="use a built-in instance")

    p = sub.add_parser("route", help="one-shot path query on a state snapshot")
    add_state(p)
    p.add_argument("--router", default="bwrhf", choices=[k.value for k in RouterKind])
    p.set_defaults(func=cmd_route)

    def add_run(p):
        p.add_argument("--config", help="scenario config (JSON/YAML)")
        p.add_argument("--seed", type=int, help="override the base seed")
        p.add_argument("--out", default="out", help="output directory for flows/runs/summary CSV")
        p.add_argument("--timing", action="store_true",
                       help="write router CPU times (makes output non-reproducible)")
        p.add_argument("--router", action="append", choices=[k.value for k in RouterKind],
                       help="router(s) to run; overrides the config")
        p.add_argument("--policy", action="append", choices=[p.value for p in SchedulingPolicy],
                       help="scheduling policy(ies); overrides the config")

    p = sub.add_parser("simulate", help="single run: one router, one policy, one repetition")
    add_run(p)
    p.add_argument("--topology")
    p.add_argument("--pattern", choices=["light", "heavy"])
    p.add_argument("--mean", type=float)
    p.add_argument("--flows", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("experiment", help="full sweep over routers x policies x repetitions")
    add_run(p)
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("oracle", help="exact worst-case completion time for a candidate path")
    add_state(p)
    p.add_argument("--max-conflicts", type=int, default=8)
    p.add_argument("--histogram", help="write per-completion-time order counts to this CSV")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("validate", help="lint topology, CDF or config files")
    p.add_argument("files", nargs="+")
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args) or 0
    except (ValueError, LookupError, OSError) as exc:
        # bad input files, unknown nodes, unreachable pairs, oracle cap
        print(f"bwr {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
