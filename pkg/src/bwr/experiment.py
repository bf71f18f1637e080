"""Multi-repetition experiments, metrics and CSV output.

Every (router, policy) cell of one repetition sees the same capacity draw and
the same arrival list, so schemes are compared pairwise.
"""

from __future__ import annotations

import csv
import hashlib
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path as FsPath
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .model import SAMPLE_DIR, NetworkGraph, randomize_capacities, read_document, resolve_topology
from .routing import RouterKind
from .sim import FlowRecord, SchedulingPolicy, simulate
from .traffic import TrafficPattern, generate_arrivals

FLOW_COLUMNS = ["run_id", "flow_id", "source", "destination", "total_volume", "arrival_time",
                "finish_time", "completion_time", "hop_count", "router", "policy", "router_elapsed_micros"]
RUN_COLUMNS = ["run_id", "router", "policy", "pattern", "topology", "repetition", "seed", "flows",
               "mean_fct", "p99_fct", "max_fct", "mean_router_elapsed", "max_router_elapsed"]
SUMMARY_COLUMNS = ["router", "policy", "pattern", "topology", "runs",
                   "mean_fct_mean", "mean_fct_std", "p99_fct_mean", "p99_fct_std", "max_fct_mean", "max_fct_std",
                   "mean_ratio_vs_bwrhf", "p99_ratio_vs_bwrhf", "rel_diff_mean_vs_bwrhf", "rel_diff_p99_vs_bwrhf"]


@dataclass
class ScenarioConfig:
    topology: str = "gscale"
    # None keeps the capacities stored in the topology file
    capacity_range: tuple[float, float] | None = (0.2, 1.0)
    pattern: TrafficPattern = field(default_factory=TrafficPattern)
    routers: list[RouterKind] = field(default_factory=lambda: [RouterKind.BWRHF])
    policies: list[SchedulingPolicy] = field(default_factory=lambda: [SchedulingPolicy.MAX_MIN])
    repetitions: int = 1
    base_seed: int = 0
    record_timing: bool = False

    def __post_init__(self):
        self.routers = [RouterKind.parse(r) for r in self.routers]
        self.policies = [SchedulingPolicy.parse(p) for p in self.policies]
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if not self.routers or not self.policies:
            raise ValueError("need at least one router and one policy")
        if self.capacity_range is not None:
            low, high = self.capacity_range
            if not 0 < low <= high:
                raise ValueError(f"invalid capacity range {self.capacity_range}")
            self.capacity_range = (float(low), float(high))

    @classmethod
    def from_mapping(cls, doc: Mapping[str, Any], base_dir: FsPath | None = None) -> "ScenarioConfig":
        known = {"topology", "capacity", "pattern", "routers", "policies", "repetitions", "seed", "record_timing"}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        pat = dict(doc.get("pattern", {}))
        if "cdf" in pat:
            src = FsPath(pat.pop("cdf"))
            if base_dir is not None and not src.is_absolute() and not src.exists():
                src = base_dir / src
            if not src.exists() and (SAMPLE_DIR / f"{src.name}.csv").exists():
                src = SAMPLE_DIR / f"{src.name}.csv"
            pat["cdf_source"] = str(src)
        pattern = TrafficPattern(
            kind=pat.pop("kind", "heavy"),
            mean=float(pat.pop("mean", 50.0)),
            arrival_rate=float(pat.pop("arrival_rate", 1.0)),
            flow_count=int(pat.pop("flows", pat.pop("flow_count", 500))),
            cdf_source=pat.pop("cdf_source", None),
        )
        if pat:
            raise ValueError(f"unknown pattern keys: {', '.join(sorted(pat))}")
        cap = doc.get("capacity", {"low": 0.2, "high": 1.0})
        cap_range = None if cap in (None, "file") else (float(cap["low"]), float(cap["high"]))
        topo = str(doc.get("topology", "gscale"))
        if base_dir is not None and not FsPath(topo).exists() and (base_dir / topo).exists():
            topo = str(base_dir / topo)
        return cls(
            topology=topo,
            capacity_range=cap_range,
            pattern=pattern,
            routers=list(doc.get("routers", ["bwrhf"])),
            policies=list(doc.get("policies", ["fair"])),
            repetitions=int(doc.get("repetitions", 1)),
            base_seed=int(doc.get("seed", 0)),
            record_timing=bool(doc.get("record_timing", False)),
        )


def load_config(path: str | FsPath) -> list[ScenarioConfig]:
    """A config file holds one scenario, or ``{"scenarios": [...]}``."""
    doc = read_document(path)
    base = FsPath(path).resolve().parent
    if isinstance(doc, Mapping) and "scenarios" in doc:
        return [ScenarioConfig.from_mapping(d, base) for d in doc["scenarios"]]
    return [ScenarioConfig.from_mapping(doc, base)]


@dataclass
class RunMetrics:
    run_id: str
    router: str
    policy: str
    pattern: str
    topology: str
    repetition: int
    seed: int
    flows: int
    mean_fct: float
    p99_fct: float
    max_fct: float
    mean_router_elapsed: float  # seconds
    max_router_elapsed: float


@dataclass
class ExperimentResult:
    runs: list[RunMetrics]
    flows: list[dict[str, Any]]


def derive_seed(base_seed: int, repetition: int) -> int:
    """64-bit per-repetition seed: first 8 bytes of SHA-256 over (base_seed, repetition)."""
    digest = hashlib.sha256(f"bwr-seed:{int(base_seed)}:{int(repetition)}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def nearest_rank(values: Sequence[float], q: float) -> float:
    ordered = sorted(values)
    rank = max(1, math.ceil(q * len(ordered)))
    return ordered[rank - 1]


def relative_difference(s_bwrhf: float, s_bwrh: float) -> float:
    """(s_BWRHF - s_BWRH) / s_BWRHF; positive means BWRH did better."""
    return (s_bwrhf - s_bwrh) / s_bwrhf


def summarize_records(records: Sequence[FlowRecord]) -> tuple[float, float, float, float, float]:
    fct = [r.completion_time for r in records]
    elapsed = [r.router_elapsed for r in records]
    return (statistics.fmean(fct), nearest_rank(fct, 0.99), max(fct),
            statistics.fmean(elapsed), max(elapsed))


def topology_label(ref: str) -> str:
    p = FsPath(ref)
    return p.stem if p.suffix else ref


def prepare_repetition(config: ScenarioConfig, rep: int):
    """Seed, capacity draw and arrival list shared by every cell of one repetition."""
    seed = derive_seed(config.base_seed, rep)
    graph = resolve_topology(config.topology)
    if config.capacity_range is not None:
        graph = randomize_capacities(graph, *config.capacity_range, seed=(seed, 0))
    arrivals = generate_arrivals(config.pattern, graph, seed=(seed, 1))
    return seed, graph, arrivals


def _run_cell(args):
    config, rep, router, policy = args
    seed, graph, arrivals = prepare_repetition(config, rep)
    records = simulate(graph, arrivals, router, policy)
    return rep, router, policy, seed, records


def run_experiment(config: ScenarioConfig, jobs: int = 1) -> ExperimentResult:
    cells = [(config, rep, router, policy)
             for rep in range(config.repetitions)
             for router in config.routers
             for policy in config.policies]
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outputs = list(pool.map(_run_cell, cells))
    else:
        outputs = [_run_cell(c) for c in cells]

    topo = topology_label(config.topology)
    pattern = config.pattern.label
    runs, flow_rows = [], []
    for rep, router, policy, seed, records in outputs:
        run_id = f"{topo}/{pattern}/rep{rep:03d}/{router.value}/{policy.value}"
        mean_fct, p99, mx, mean_el, max_el = summarize_records(records)
        if not config.record_timing:
            mean_el = max_el = 0.0
        runs.append(RunMetrics(run_id, router.value, policy.value, pattern, topo, rep, seed,
                               len(records), mean_fct, p99, mx, mean_el, max_el))
        for r in records:
            flow_rows.append({
                "run_id": run_id, "flow_id": r.flow_id, "source": r.source, "destination": r.destination,
                "total_volume": r.total_volume, "arrival_time": r.arrival_time,
                "finish_time": r.finish_time, "completion_time": r.completion_time,
                "hop_count": r.hop_count, "router": router.value, "policy": policy.value,
                "router_elapsed_micros": round(r.router_elapsed * 1e6) if config.record_timing else 0,
            })
    runs.sort(key=lambda m: m.run_id)
    flow_rows.sort(key=lambda d: (d["run_id"], d["flow_id"]))
    return ExperimentResult(runs, flow_rows)


def _std(xs: Sequence[float]) -> float:
    return statistics.stdev(xs) if len(xs) > 1 else 0.0


def aggregate(metrics: Iterable[RunMetrics]) -> list[dict[str, Any]]:
    """Per (router, policy, pattern, topology): across-repetition mean and sample std.

    Ratio and relative-difference columns compare against BWRHF in the same
    (policy, pattern, topology) group when BWRHF was run; the relative
    difference is averaged over paired repetitions.
    """
    metrics = list(metrics)
    if not metrics:
        raise ValueError("no metrics to aggregate")
    groups: dict[tuple, list[RunMetrics]] = {}
    for m in metrics:
        groups.setdefault((m.router, m.policy, m.pattern, m.topology), []).append(m)

    def by_rep(ms):
        return {m.repetition: m for m in ms}

    rows = []
    for key in sorted(groups):
        router, policy, pattern, topo = key
        ms = groups[key]
        means = [m.mean_fct for m in ms]
        p99s = [m.p99_fct for m in ms]
        maxs = [m.max_fct for m in ms]
        row = {
            "router": router, "policy": policy, "pattern": pattern, "topology": topo, "runs": len(ms),
            "mean_fct_mean": statistics.fmean(means), "mean_fct_std": _std(means),
            "p99_fct_mean": statistics.fmean(p99s), "p99_fct_std": _std(p99s),
            "max_fct_mean": statistics.fmean(maxs), "max_fct_std": _std(maxs),
            "mean_ratio_vs_bwrhf": "", "p99_ratio_vs_bwrhf": "",
            "rel_diff_mean_vs_bwrhf": "", "rel_diff_p99_vs_bwrhf": "",
        }
        ref = groups.get((RouterKind.BWRHF.value, policy, pattern, topo))
        if ref:
            ref_mean = statistics.fmean(m.mean_fct for m in ref)
            ref_p99 = statistics.fmean(m.p99_fct for m in ref)
            row["mean_ratio_vs_bwrhf"] = row["mean_fct_mean"] / ref_mean
            row["p99_ratio_vs_bwrhf"] = row["p99_fct_mean"] / ref_p99
            mine, theirs = by_rep(ms), by_rep(ref)
            paired = sorted(set(mine) & set(theirs))
            if paired:
                row["rel_diff_mean_vs_bwrhf"] = statistics.fmean(
                    relative_difference(theirs[r].mean_fct, mine[r].mean_fct) for r in paired)
                row["rel_diff_p99_vs_bwrhf"] = statistics.fmean(
                    relative_difference(theirs[r].p99_fct, mine[r].p99_fct) for r in paired)
        rows.append(row)
    return rows


def _write_csv(path: FsPath, columns: Sequence[str], rows: Iterable[Mapping[str, Any]]):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: row[k] for k in columns})


def write_outputs(out_dir: str | FsPath, runs: Sequence[RunMetrics], flows: Sequence[Mapping[str, Any]],
                  summary: Sequence[Mapping[str, Any]] | None = None) -> dict[str, FsPath]:
    out = FsPath(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if summary is None:
        summary = aggregate(runs)
    paths = {name: out / f"{name}.csv" for name in ("flows", "runs", "summary")}
    _write_csv(paths["flows"], FLOW_COLUMNS, flows)
    _write_csv(paths["runs"], RUN_COLUMNS, (vars(m) for m in runs))
    _write_csv(paths["summary"], SUMMARY_COLUMNS, summary)
    return paths


def run_configs(configs: Sequence[ScenarioConfig], out_dir: str | FsPath | None = None, jobs: int = 1):
    runs, flows = [], []
    for cfg in configs:
        res = run_experiment(cfg, jobs)
        runs.extend(res.runs)
        flows.extend(res.flows)
    runs.sort(key=lambda m: m.run_id)
    flows.sort(key=lambda d: (d["run_id"], d["flow_id"]))
    summary = aggregate(runs)
    if out_dir is not None:
        write_outputs(out_dir, runs, flows, summary)
    return runs, flows, summary


def inputs_digest(graph: NetworkGraph, arrivals) -> str:
    """Hash of capacities and arrivals; equal digests mean identical cell inputs."""
    h = hashlib.sha256()
    h.update(np.asarray(graph.capacities, dtype=float).tobytes())
    for f in arrivals:
        h.update(repr((f.id, f.source, f.destination, f.arrival_time, f.total_volume)).encode())
    return h.hexdigest()
