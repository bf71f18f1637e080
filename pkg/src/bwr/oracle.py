"""Exact worst-case completion time on small instances.

The adversary picks a static priority order over the flows that conflict with
the candidate path; the new flow always has the lowest priority. Rates follow
the greedy work-conserving priority allocation. Enumerating every order gives
the worst case under this model.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field

from .model import Flow, NetworkState, Path
from .routing import bwrh_cost, bwrhf_cost
from .sim import run_static_priority

DEFAULT_MAX_CONFLICTS = 8


class InstanceTooLarge(ValueError):
    """Too many conflicting flows for factorial enumeration."""


@dataclass
class DependencyGraph:
    vertices: tuple[int, ...]
    edges: frozenset[frozenset[int]]

    def adjacent(self, a: int, b: int) -> bool:
        return frozenset((a, b)) in self.edges

    def is_independent(self, nodes) -> bool:
        nodes = list(nodes)
        return not any(self.adjacent(a, b) for a, b in itertools.combinations(nodes, 2))

    def edge_list(self) -> list[tuple[int, int]]:
        return sorted(tuple(sorted(e)) for e in self.edges)


@dataclass
class WorstCaseResult:
    worst_time: float
    witness_order: tuple[int, ...]
    serial_bound: float
    edge_sum_bound: float
    # completion time -> number of priority orders producing it
    histogram: Counter = field(default_factory=Counter)
    permutations: int = 0


def conflicting_flows(state: NetworkState, candidate: Path) -> list[int]:
    ids = set()
    for e in candidate.edges:
        ids.update(state.flow_ids_on_edge(e))
    return sorted(ids)


def build_dependency_graph(state: NetworkState, candidate: Path) -> DependencyGraph:
    """Conflict graph over the flows that share at least one edge with ``candidate``."""
    verts = conflicting_flows(state, candidate)
    edge_sets = {f: set(state.flows[f].path.edges) for f in verts}
    pairs = frozenset(
        frozenset((a, b)) for a, b in itertools.combinations(verts, 2)
        if edge_sets[a] & edge_sets[b]
    )
    return DependencyGraph(tuple(verts), pairs)


NEW_FLOW_ID = -1


def _instance(state: NetworkState, candidate: Path, new_volume: float, conflicts: list[int]) -> list[Flow]:
    # every flow starts at t=0 with its current remaining volume
    flows = []
    for fid in conflicts:
        f = state.flows[fid]
        flows.append(Flow(fid, f.source, f.destination, 0.0, f.remaining_volume, f.remaining_volume, f.path))
    flows.append(Flow(NEW_FLOW_ID, candidate.source, candidate.destination, 0.0, new_volume, new_volume, candidate))
    return flows


def simulate_order(state: NetworkState, candidate: Path, new_volume: float, order, record_trace=False):
    """Fluid run of the conflicting flows under ``order`` with the new flow last."""
    conflicts = sorted(order)
    flows = _instance(state, candidate, new_volume, conflicts)
    return run_static_priority(state.graph, flows, tuple(order) + (NEW_FLOW_ID,), record_trace)


def worst_case_exact(state: NetworkState, candidate: Path, new_volume: float,
                     max_conflicts: int = DEFAULT_MAX_CONFLICTS) -> WorstCaseResult:
    """Maximize the new flow's completion time over all priority orders.

    Among orders reaching the maximum, the lexicographically smallest is
    reported as the witness.
    """
    conflicts = conflicting_flows(state, candidate)
    if len(conflicts) > max_conflicts:
        raise InstanceTooLarge(
            f"instance too large for exact oracle: {len(conflicts)} conflicting flows > cap {max_conflicts}")
    flows = _instance(state, candidate, new_volume, conflicts)
    graph = state.graph
    worst, witness = -1.0, ()
    hist: Counter = Counter()
    count = 0
    # permutations() yields lexicographic order, so strict '>' keeps the smallest witness
    for order in itertools.permutations(conflicts):
        res = run_static_priority(graph, flows, order + (NEW_FLOW_ID,))
        t = res.records[-1].completion_time
        hist[t] += 1
        count += 1
        if t > worst:
            worst, witness = t, order
    return WorstCaseResult(
        worst_time=worst,
        witness_order=witness,
        serial_bound=bwrh_cost(candidate, state, new_volume),
        edge_sum_bound=bwrhf_cost(candidate, state, new_volume),
        histogram=hist,
        permutations=count,
    )
