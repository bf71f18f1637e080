"""Event-driven fluid simulator with FCFS, SRPT and max-min fair rate allocation.

Rates are piecewise constant between events (arrivals and completions). At
equal timestamps completions are handled before arrivals, so freed capacity is
visible to the router.
"""

from __future__ import annotations

import enum
import gc
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .model import Flow, NetworkGraph, NetworkState
from .routing import RouteRequest, RouterKind, route

# remaining volume at or below this counts as finished
DONE_VOLUME = 1e-9
# residual capacity at or below this fraction of C_e counts as saturated
SAT_FRACTION = 1e-12


class SchedulingPolicy(enum.Enum):
    FCFS = "fcfs"
    SRPT = "srpt"
    MAX_MIN = "fair"

    @classmethod
    def parse(cls, name: "str | SchedulingPolicy") -> "SchedulingPolicy":
        if isinstance(name, cls):
            return name
        aliases = {"maxmin": "fair", "max-min": "fair", "fair-sharing": "fair", "mmf": "fair"}
        key = str(name).lower()
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            known = ", ".join(p.value for p in cls)
            raise ValueError(f"unknown policy {name!r}; expected one of {known}") from None


@dataclass
class RateAllocation:
    rates: dict[int, float]
    snapshot_time: float = 0.0

    def __getitem__(self, flow_id):
        return self.rates[flow_id]

    def edge_loads(self, state: NetworkState) -> list[float]:
        load = [0.0] * len(state.graph.edges)
        for fid, r in self.rates.items():
            for e in state.flows[fid].path.edges:
                load[e] += r
        return load


@dataclass
class FlowRecord:
    flow_id: int
    source: int
    destination: int
    total_volume: float
    arrival_time: float
    finish_time: float
    hop_count: int
    router_elapsed: float = 0.0  # seconds of thread CPU time; never added to simulated time

    @property
    def completion_time(self) -> float:
        return self.finish_time - self.arrival_time


@dataclass
class TraceSegment:
    start: float
    end: float
    rates: dict[int, float]


@dataclass
class SimResult:
    records: list[FlowRecord]
    trace: list[TraceSegment] = field(default_factory=list)


def _check_paths(state: NetworkState):
    for f in state.flows.values():
        if f.path is None:
            raise ValueError(f"flow {f.id} has no path")


def allocate_priority(state: NetworkState, order: Sequence[int], now: float = 0.0) -> RateAllocation:
    """Greedy strict-priority allocation.

    Flows are served in ``order``; each takes the smallest residual capacity
    along its path. Lower-priority flows get whatever is left, possibly 0.
    """
    _check_paths(state)
    if set(order) != state.flows.keys() or len(order) != len(state.flows):
        raise ValueError("order must list every active flow exactly once")
    caps = state.graph.capacities
    residual = list(caps)
    rates = {}
    for fid in order:
        edges = state.flows[fid].path.edges
        r = min(residual[e] for e in edges)
        if r <= 0.0:
            rates[fid] = 0.0
            continue
        rates[fid] = r
        for e in edges:
            left = residual[e] - r
            residual[e] = 0.0 if left <= SAT_FRACTION * caps[e] else left
    return RateAllocation(rates, now)


def allocate_max_min(state: NetworkState, now: float = 0.0) -> RateAllocation:
    """Max-min fair rates by progressive filling.

    All unfrozen flows rise together; when an edge saturates, every flow
    crossing it is frozen at the current level.
    """
    _check_paths(state)
    caps = state.graph.capacities
    flows = state.flows
    residual: dict[int, float] = {}
    count: dict[int, int] = {}
    for e in range(len(caps)):
        n = len(state.flow_ids_on_edge(e))
        if n:
            residual[e] = float(caps[e])
            count[e] = n
    rates: dict[int, float] = {}
    level = 0.0
    while count:
        tight = min(count, key=lambda e: (residual[e] / count[e], e))
        inc = residual[tight] / count[tight]
        level += inc
        saturated = [tight]
        for e, n in count.items():
            residual[e] -= inc * n
            if e != tight and residual[e] <= SAT_FRACTION * caps[e]:
                saturated.append(e)
        residual[tight] = 0.0
        for e in sorted(saturated):
            for fid in state.flow_ids_on_edge(e):
                if fid in rates:
                    continue
                rates[fid] = level
                for e2 in flows[fid].path.edges:
                    count[e2] -= 1
        for e in [e for e, n in count.items() if n == 0]:
            del count[e]
    # keep insertion order aligned with the state for deterministic iteration
    return RateAllocation({fid: rates[fid] for fid in flows}, now)


def fcfs_order(state: NetworkState) -> list[int]:
    return sorted(state.flows, key=lambda i: (state.flows[i].arrival_time, i))


def srpt_order(state: NetworkState) -> list[int]:
    return sorted(state.flows, key=lambda i: (state.flows[i].remaining_volume, i))


def allocate(policy: SchedulingPolicy, state: NetworkState, now: float = 0.0) -> RateAllocation:
    if policy is SchedulingPolicy.MAX_MIN:
        return allocate_max_min(state, now)
    if policy is SchedulingPolicy.FCFS:
        return allocate_priority(state, fcfs_order(state), now)
    return allocate_priority(state, srpt_order(state), now)


Allocator = Callable[[NetworkState, float], RateAllocation]


def run_fluid(graph: NetworkGraph, arrivals: Sequence[Flow], allocator: Allocator,
              router: RouterKind | str | None = None, record_trace: bool = False) -> SimResult:
    """Core event loop.

    Flows that arrive with a path keep it; the others are routed with
    ``router`` on arrival. Input flows are copied, never mutated.
    """
    for a, b in zip(arrivals, arrivals[1:]):
        if b.arrival_time < a.arrival_time:
            raise ValueError(f"arrivals not sorted by time (flow {b.id} before {a.id})")
    kind = RouterKind.parse(router) if router is not None else None
    state = NetworkState(graph)
    alloc = RateAllocation({}, 0.0)
    now = 0.0
    i, n = 0, len(arrivals)
    records: dict[int, FlowRecord] = {}
    elapsed: dict[int, float] = {}
    trace: list[TraceSegment] = []

    while i < n or state.flows:
        t_done = math.inf
        finishing: list[int] = []
        for fid, r in alloc.rates.items():
            if r > 0.0:
                tc = now + state.flows[fid].remaining_volume / r
                if tc < t_done:
                    t_done, finishing = tc, [fid]
                elif tc == t_done:
                    finishing.append(fid)
        t_arr = arrivals[i].arrival_time if i < n else math.inf
        t_next = min(t_done, t_arr)
        if t_next == math.inf:
            raise RuntimeError(f"simulation stalled at t={now}: active flows but no positive rate")

        dt = t_next - now
        if dt > 0.0:
            for fid, r in alloc.rates.items():
                if r > 0.0:
                    f = state.flows[fid]
                    f.remaining_volume = max(0.0, f.remaining_volume - r * dt)
            if record_trace:
                trace.append(TraceSegment(now, t_next, dict(alloc.rates)))
        now = t_next

        if t_done <= t_arr:
            done = set(finishing)
            done.update(fid for fid, f in state.flows.items() if f.remaining_volume <= DONE_VOLUME)
            for fid in sorted(done):
                f = state.remove(fid)
                f.remaining_volume = 0.0
                records[fid] = FlowRecord(fid, f.source, f.destination, f.total_volume,
                                          f.arrival_time, now, f.path.hops, elapsed.get(fid, 0.0))
        else:
            flow = arrivals[i].copy()
            i += 1
            if flow.path is None:
                if kind is None:
                    raise ValueError(f"flow {flow.id} has no path and no router was given")
                req = RouteRequest(flow, state, alloc.rates)
                # CPU time of this thread skips preemption; collector pauses are excluded by hand
                gc_on = gc.isenabled()
                gc.disable()
                t0 = time.thread_time()
                res = route(kind, req)
                elapsed[flow.id] = time.thread_time() - t0
                if gc_on:
                    gc.enable()
                flow.assign(res.path)
            state.add(flow)
        alloc = allocator(state, now)

    return SimResult([records[f.id] for f in arrivals], trace)


def simulate(graph: NetworkGraph, arrivals: Sequence[Flow], router: RouterKind | str,
             policy: SchedulingPolicy | str) -> list[FlowRecord]:
    """Route each arrival with ``router`` and run to completion under ``policy``."""
    pol = SchedulingPolicy.parse(policy)
    return run_fluid(graph, arrivals, lambda st, t: allocate(pol, st, t), router).records


def run_static_priority(graph: NetworkGraph, flows: Iterable[Flow], order: Sequence[int],
                        record_trace: bool = False) -> SimResult:
    """Run pre-routed flows under one fixed priority order (earlier = higher)."""
    rank = {fid: k for k, fid in enumerate(order)}
    flows = sorted(flows, key=lambda f: f.arrival_time)

    def alloc(st: NetworkState, t: float) -> RateAllocation:
        return allocate_priority(st, sorted(st.flows, key=rank.__getitem__), t)

    return run_fluid(graph, flows, alloc, None, record_trace)
