"""Path selection: the two worst-case-bound routers and three baselines.

Every router breaks ties by (objective, hop count, node sequence), so the
same request always yields the same path.
"""

from __future__ import annotations

import enum
import heapq
import math
import time
from collections import deque
from dataclasses import dataclass
from typing import Callable, Mapping

from .model import Flow, NetworkGraph, NetworkState, NoPathError, Path, iter_paths, min_hop_count


class RouterKind(enum.Enum):
    BWRH = "bwrh"
    BWRHF = "bwrhf"
    INVERSE_CAPACITY = "inv-cap"
    MIN_MAX_UTILIZATION = "min-max-util"
    SHORTEST_WIDEST = "shortest-widest"

    @classmethod
    def parse(cls, name: "str | RouterKind") -> "RouterKind":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            known = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown router {name!r}; expected one of {known}") from None

    @property
    def needs_rates(self) -> bool:
        return self in (RouterKind.MIN_MAX_UTILIZATION, RouterKind.SHORTEST_WIDEST)


@dataclass
class RouteRequest:
    new_flow: Flow
    state: NetworkState
    # flow id -> rate currently allocated; only the utilization/width baselines read it
    rate_view: Mapping[int, float] | None = None

    def __post_init__(self):
        if self.new_flow.remaining_volume != self.new_flow.total_volume:
            raise ValueError("routing happens at arrival: remaining volume must equal total volume")


@dataclass
class RouteResult:
    path: Path
    cost: float
    paths_examined: int
    elapsed: float  # seconds of thread CPU time


# -- cost functions ------------------------------------------------------------

def bwrh_cost(path: Path, state: NetworkState, new_volume: float) -> float:
    """Serialized upper bound on the new flow's completion time.

    Each active flow sharing an edge with ``path`` contributes its remaining
    volume over the smallest capacity among the shared edges; the new flow
    adds its volume over the path bottleneck.
    """
    caps = state.graph.capacities
    shared_min: dict[int, float] = {}
    for e in path.edges:
        c = caps[e]
        for fid in state.flow_ids_on_edge(e):
            prev = shared_min.get(fid)
            if prev is None or c < prev:
                shared_min[fid] = c
    flows = state.flows
    total = 0.0
    for fid, c in shared_min.items():
        total += flows[fid].remaining_volume / c
    return total + new_volume / min(caps[e] for e in path.edges)


def bwrhf_edge_weight(state: NetworkState, edge: int, new_volume: float) -> float:
    return (state.edge_backlog(edge) + new_volume) / state.graph.capacities[edge]


def bwrhf_cost(path: Path, state: NetworkState, new_volume: float) -> float:
    """Edge-decomposable (looser) bound: sum over path edges of load / capacity."""
    total = 0.0
    for e in path.edges:
        total += bwrhf_edge_weight(state, e, new_volume)
    return total


# -- shortest-path machinery -----------------------------------------------------

def _dijkstra(graph: NetworkGraph, s: int, t: int, weight: Callable[[int], float]) -> tuple[Path, float]:
    """Additive shortest path with (weight, hops, node sequence) ordering."""
    best: dict[int, tuple] = {s: (0.0, 0, (s,))}
    heap = [(0.0, 0, (s,), ())]
    done = set()
    while heap:
        w, h, nodes, edges = heapq.heappop(heap)
        u = nodes[-1]
        if u in done:
            continue
        done.add(u)
        if u == t:
            return Path(edges, nodes), w
        for eid in graph.out_edges(u):
            v = graph.edges[eid].head
            if v in done:
                continue
            cand = (w + weight(eid), h + 1, nodes + (v,))
            if v not in best or cand < best[v]:
                best[v] = cand
                heapq.heappush(heap, cand + (edges + (eid,),))
    raise NoPathError(f"no path from {s} to {t}")


def _bottleneck_value(graph: NetworkGraph, s: int, t: int, value: Callable[[int], float], maximize: bool) -> float:
    """Best achievable bottleneck: max over paths of min edge value (widest), or
    min over paths of max edge value (minimax)."""
    # widest path is minimax over negated values
    sign = -1.0 if maximize else 1.0
    best = {s: -math.inf}
    heap = [(-math.inf, s)]
    done = set()
    while heap:
        b, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if u == t:
            return sign * b
        for eid in graph.out_edges(u):
            v = graph.edges[eid].head
            if v in done:
                continue
            ev = sign * value(eid)
            nb = max(b, ev)
            if v not in best or nb < best[v]:
                best[v] = nb
                heapq.heappush(heap, (nb, v))
    raise NoPathError(f"no path from {s} to {t}")


def _min_hop_path(graph: NetworkGraph, s: int, t: int, allowed: Callable[[int], bool]) -> Path:
    """Lexicographically smallest minimum-hop path over the allowed edges."""
    # hop distance to t on the reversed allowed subgraph
    incoming: dict[int, list[int]] = {}
    for e in graph.edges:
        if allowed(e.id):
            incoming.setdefault(e.head, []).append(e.id)
    dist = {t: 0}
    queue = deque([t])
    while queue:
        v = queue.popleft()
        for eid in incoming.get(v, ()):
            u = graph.edges[eid].tail
            if u not in dist:
                dist[u] = dist[v] + 1
                queue.append(u)
    if s not in dist:
        raise NoPathError(f"no path from {s} to {t}")
    nodes, edges = [s], []
    u = s
    while u != t:
        # out_edges is ordered by head, so the first hit is the smallest next node
        for eid in graph.out_edges(u):
            v = graph.edges[eid].head
            if allowed(eid) and dist.get(v) == dist[u] - 1:
                nodes.append(v)
                edges.append(eid)
                u = v
                break
    return Path(tuple(edges), tuple(nodes))


def _edge_rates(state: NetworkState, rate_view: Mapping[int, float]) -> list[float]:
    load = [0.0] * len(state.graph.edges)
    for fid, f in state.flows.items():
        r = rate_view.get(fid, 0.0)
        if r:
            for e in f.path.edges:
                load[e] += r
    return load


# -- routers -------------------------------------------------------------------

def route_bwrh(request: RouteRequest) -> RouteResult:
    """Hop-bounded exhaustive search on the serialized bound.

    Starts from the minimum hop count K and widens the search one hop at a
    time while the best cost strictly improves. K never exceeds |V| - 1.
    """
    t0 = time.thread_time()
    flow, state = request.new_flow, request.state
    graph = state.graph
    vol = flow.total_volume
    k = min_hop_count(graph, flow.source, flow.destination)
    k_cap = graph.num_nodes - 1

    best_key = None
    best_path = None
    examined = 0

    def scan(max_hops: int, exact_hops: int | None):
        nonlocal best_key, best_path, examined
        for p in iter_paths(graph, flow.source, flow.destination, max_hops):
            if exact_hops is not None and p.hops != exact_hops:
                continue
            examined += 1
            key = (bwrh_cost(p, state, vol), p.hops, p.nodes)
            if best_key is None or key < best_key:
                best_key, best_path = key, p

    # paths with fewer hops than K were already scored, so each round only
    # needs the paths of exactly K hops
    scan(k, None)
    while k < k_cap:
        previous = best_key[0]
        k += 1
        scan(k, k)
        if not best_key[0] < previous:
            break
    return RouteResult(best_path, best_key[0], examined, time.thread_time() - t0)


def route_bwrhf(request: RouteRequest) -> RouteResult:
    t0 = time.thread_time()
    flow, state = request.new_flow, request.state
    vol = flow.total_volume
    weights: dict[int, float] = {}

    def weight(eid):
        w = weights.get(eid)
        if w is None:
            w = weights[eid] = bwrhf_edge_weight(state, eid, vol)
        return w

    path, _ = _dijkstra(state.graph, flow.source, flow.destination, weight)
    # re-summed in path order so the reported cost is exactly bwrhf_cost(path)
    cost = bwrhf_cost(path, state, vol)
    return RouteResult(path, cost, 1, time.thread_time() - t0)


def route_inverse_capacity(request: RouteRequest) -> RouteResult:
    t0 = time.thread_time()
    flow = request.new_flow
    graph = request.state.graph
    caps = graph.capacities
    path, _ = _dijkstra(graph, flow.source, flow.destination, lambda e: 1.0 / caps[e])
    cost = sum(1.0 / caps[e] for e in path.edges)
    return RouteResult(path, cost, 1, time.thread_time() - t0)


def _require_rates(request: RouteRequest) -> Mapping[int, float]:
    if request.rate_view is None:
        raise ValueError("this router needs the current rate allocation (rate_view)")
    return request.rate_view


def edge_utilization(state: NetworkState, rate_view: Mapping[int, float]) -> list[float]:
    caps = state.graph.capacities
    return [load / caps[e] for e, load in enumerate(_edge_rates(state, rate_view))]


def edge_available(state: NetworkState, rate_view: Mapping[int, float]) -> list[float]:
    caps = state.graph.capacities
    return [max(0.0, caps[e] - load) for e, load in enumerate(_edge_rates(state, rate_view))]


def route_min_max_utilization(request: RouteRequest) -> RouteResult:
    """Minimize the path's maximum edge utilization, then hop count.

    Two passes keep this exact: a minimax search finds the optimal bottleneck
    utilization, then BFS finds the fewest-hop path within that bound.
    """
    t0 = time.thread_time()
    rates = _require_rates(request)
    flow, graph = request.new_flow, request.state.graph
    util = edge_utilization(request.state, rates)
    level = _bottleneck_value(graph, flow.source, flow.destination, util.__getitem__, maximize=False)
    path = _min_hop_path(graph, flow.source, flow.destination, lambda e: util[e] <= level)
    return RouteResult(path, level, 1, time.thread_time() - t0)


def route_shortest_widest(request: RouteRequest) -> RouteResult:
    """Maximize the path's minimum available bandwidth, then minimize hops."""
    t0 = time.thread_time()
    rates = _require_rates(request)
    flow, graph = request.new_flow, request.state.graph
    avail = edge_available(request.state, rates)
    width = _bottleneck_value(graph, flow.source, flow.destination, avail.__getitem__, maximize=True)
    path = _min_hop_path(graph, flow.source, flow.destination, lambda e: avail[e] >= width)
    return RouteResult(path, width, 1, time.thread_time() - t0)


ROUTERS: dict[RouterKind, Callable[[RouteRequest], RouteResult]] = {
    RouterKind.BWRH: route_bwrh,
    RouterKind.BWRHF: route_bwrhf,
    RouterKind.INVERSE_CAPACITY: route_inverse_capacity,
    RouterKind.MIN_MAX_UTILIZATION: route_min_max_utilization,
    RouterKind.SHORTEST_WIDEST: route_shortest_widest,
}


def route(kind: RouterKind | str, request: RouteRequest) -> RouteResult:
    return ROUTERS[RouterKind.parse(kind)](request)
