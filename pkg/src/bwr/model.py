"""Graph, flow and path data model plus topology ingestion.

Volumes and capacities are dimensionless: volume-units and volume-units per
time-unit. Bidirectional links become two independent directed edges.
"""

from __future__ import annotations

import itertools
import json
import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path as FsPath
from typing import Any, Iterable, Iterator, Mapping, Sequence

import numpy as np


class TopologyError(ValueError):
    """Malformed or inconsistent topology document."""


class NoPathError(LookupError):
    """Destination is unreachable from the source."""


@dataclass(frozen=True)
class DirectedEdge:
    id: int
    tail: int
    head: int
    capacity: float

    def __post_init__(self):
        if self.tail == self.head:
            raise TopologyError(f"self-loop on node {self.tail} (edge {self.id})")
        if not (self.capacity > 0 and math.isfinite(self.capacity)):
            raise TopologyError(f"edge {self.id} ({self.tail}->{self.head}) has non-positive capacity {self.capacity}")


class NetworkGraph:
    """Simple directed capacitated graph; immutable after construction.

    Edge ids are dense integers ``0..len(edges)-1`` and index ``capacities``.
    """

    def __init__(self, nodes: Iterable[int], edges: Iterable[DirectedEdge], names: Sequence[str] | None = None):
        self.nodes: tuple[int, ...] = tuple(sorted(set(nodes)))
        self.edges: tuple[DirectedEdge, ...] = tuple(edges)
        node_set = set(self.nodes)
        self._by_pair: dict[tuple[int, int], int] = {}
        for k, e in enumerate(self.edges):
            if e.id != k:
                raise TopologyError(f"edge ids must be dense and ordered; got {e.id} at position {k}")
            for n in (e.tail, e.head):
                if n not in node_set:
                    raise TopologyError(f"unknown node {n} referenced by edge {e.id}")
            if (e.tail, e.head) in self._by_pair:
                raise TopologyError(f"duplicate edge {e.tail}->{e.head}")
            self._by_pair[(e.tail, e.head)] = e.id
        out: dict[int, list[int]] = {n: [] for n in self.nodes}
        for e in self.edges:
            out[e.tail].append(e.id)
        # sorted by head so every traversal visits neighbours in node-id order
        self._out = {n: tuple(sorted(ids, key=lambda i: self.edges[i].head)) for n, ids in out.items()}
        self.capacities: tuple[float, ...] = tuple(float(e.capacity) for e in self.edges)
        self.names: tuple[str, ...] = tuple(names) if names is not None else tuple(str(n) for n in self.nodes)

    def __repr__(self):
        return f"NetworkGraph(nodes={len(self.nodes)}, edges={len(self.edges)})"

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    def out_edges(self, node: int) -> tuple[int, ...]:
        return self._out[node]

    def edge(self, edge_id: int) -> DirectedEdge:
        if not 0 <= edge_id < len(self.edges):
            raise KeyError(f"unknown edge id {edge_id}")
        return self.edges[edge_id]

    def edge_between(self, tail: int, head: int) -> int:
        try:
            return self._by_pair[(tail, head)]
        except KeyError:
            raise KeyError(f"no edge {tail}->{head}") from None

    def capacity(self, edge_id: int) -> float:
        return self.edges[edge_id].capacity

    def with_capacities(self, capacities: Sequence[float]) -> "NetworkGraph":
        if len(capacities) != len(self.edges):
            raise ValueError("capacity vector length does not match edge count")
        edges = [DirectedEdge(e.id, e.tail, e.head, float(c)) for e, c in zip(self.edges, capacities)]
        return NetworkGraph(self.nodes, edges, self.names)

    def path(self, nodes: Sequence[int]) -> "Path":
        """Build a validated path from a node sequence."""
        if len(nodes) < 2:
            raise ValueError("a path needs at least two nodes")
        edges = tuple(self.edge_between(a, b) for a, b in zip(nodes, nodes[1:]))
        return Path.of(self, edges)

    def to_document(self) -> dict[str, Any]:
        """Inverse of load_topology for graphs built from bidirectional links."""
        links = []
        seen = set()
        for e in self.edges:
            key = frozenset((e.tail, e.head))
            if key in seen:
                continue
            seen.add(key)
            link = {"a": self.names[e.tail], "b": self.names[e.head], "cap_ab": e.capacity}
            back = self._by_pair.get((e.head, e.tail))
            if back is not None:
                link["cap_ba"] = self.edges[back].capacity
            links.append(link)
        return {"nodes": list(self.names), "links": links}


@dataclass(frozen=True)
class Path:
    """Contiguous, cycle-free edge sequence.

    ``nodes`` is derived from ``edges`` and kept because tie-breaking compares
    node sequences.
    """

    edges: tuple[int, ...]
    nodes: tuple[int, ...]

    @classmethod
    def of(cls, graph: NetworkGraph, edges: Sequence[int]) -> "Path":
        edges = tuple(int(e) for e in edges)
        if not edges:
            raise ValueError("path must contain at least one edge")
        es = [graph.edge(e) for e in edges]
        for a, b in zip(es, es[1:]):
            if a.head != b.tail:
                raise ValueError(f"edges {a.id} and {b.id} are not contiguous")
        nodes = (es[0].tail,) + tuple(e.head for e in es)
        if len(set(nodes)) != len(nodes):
            raise ValueError(f"path revisits a node: {nodes}")
        return cls(edges, nodes)

    @property
    def source(self) -> int:
        return self.nodes[0]

    @property
    def destination(self) -> int:
        return self.nodes[-1]

    @property
    def hops(self) -> int:
        return len(self.edges)

    def __len__(self):
        return len(self.edges)


@dataclass
class Flow:
    id: int
    source: int
    destination: int
    arrival_time: float
    total_volume: float
    remaining_volume: float | None = None
    path: Path | None = None

    def __post_init__(self):
        if self.remaining_volume is None:
            self.remaining_volume = self.total_volume
        if self.source == self.destination:
            raise ValueError(f"flow {self.id}: source equals destination")
        if not self.total_volume > 0:
            raise ValueError(f"flow {self.id}: total volume must be positive")
        if self.arrival_time < 0:
            raise ValueError(f"flow {self.id}: negative arrival time")
        if self.remaining_volume < 0 or self.remaining_volume > self.total_volume:
            raise ValueError(f"flow {self.id}: remaining volume outside [0, total]")
        if self.path is not None:
            self._check_path(self.path)

    def _check_path(self, path: Path):
        if path.source != self.source or path.destination != self.destination:
            raise ValueError(f"flow {self.id}: path {path.nodes} does not join {self.source}->{self.destination}")

    def assign(self, path: Path):
        self._check_path(path)
        self.path = path

    def copy(self) -> "Flow":
        return Flow(self.id, self.source, self.destination, self.arrival_time,
                    self.total_volume, self.remaining_volume, self.path)


class NetworkState:
    """Graph plus the active (routed, unfinished) flows and a per-edge index."""

    def __init__(self, graph: NetworkGraph, flows: Iterable[Flow] = ()):
        self.graph = graph
        self.flows: dict[int, Flow] = {}
        # dict-as-ordered-set keeps iteration order deterministic
        self._on_edge: list[dict[int, None]] = [dict() for _ in graph.edges]
        for f in flows:
            self.add(f)

    def add(self, flow: Flow):
        if flow.path is None:
            raise ValueError(f"flow {flow.id} has no path")
        if flow.id in self.flows:
            raise ValueError(f"flow {flow.id} already active")
        for e in flow.path.edges:
            if not 0 <= e < len(self.graph.edges):
                raise ValueError(f"flow {flow.id} uses edge {e} not in graph")
        self.flows[flow.id] = flow
        for e in flow.path.edges:
            self._on_edge[e][flow.id] = None

    def remove(self, flow_id: int) -> Flow:
        flow = self.flows.pop(flow_id)
        for e in flow.path.edges:
            del self._on_edge[e][flow_id]
        return flow

    def flow_ids_on_edge(self, edge_id: int):
        return self._on_edge[edge_id].keys()

    def edge_backlog(self, edge_id: int) -> float:
        """Sum of remaining volumes of the flows crossing an edge."""
        flows = self.flows
        return sum(flows[i].remaining_volume for i in self._on_edge[edge_id])

    def copy(self) -> "NetworkState":
        return NetworkState(self.graph, (f.copy() for f in self.flows.values()))

    def __len__(self):
        return len(self.flows)


def flows_on_edge(state: NetworkState, edge: int) -> list[Flow]:
    """Active flows whose path traverses ``edge``."""
    state.graph.edge(edge)
    return [state.flows[i] for i in state.flow_ids_on_edge(edge)]


# -- topology ingestion -------------------------------------------------------

def _name_order(names: Sequence[Any]) -> list[Any]:
    if all(isinstance(n, int) and not isinstance(n, bool) for n in names):
        return sorted(names)
    return sorted(names, key=str)


def load_topology(document: Mapping[str, Any] | str | FsPath, default_capacity: float = 1.0) -> NetworkGraph:
    """Build a graph from a topology document (a mapping, or a path to a JSON/YAML file).

    Node names are mapped to integer ids in sorted-name order; link ``k``
    becomes edges ``2k`` (a->b) and ``2k+1`` (b->a). Capacities absent from
    the document are set to ``default_capacity``; experiments normally
    overwrite them with :func:`randomize_capacities`.
    """
    if not isinstance(document, Mapping):
        document = read_document(document)
    if not isinstance(document, Mapping):
        raise TopologyError("topology document must be an object")
    try:
        raw_nodes = list(document["nodes"])
        raw_links = list(document["links"])
    except (KeyError, TypeError) as exc:
        raise TopologyError(f"topology document needs 'nodes' and 'links' lists ({exc})") from None
    if len(set(map(str, raw_nodes))) != len(raw_nodes):
        raise TopologyError("duplicate node name")
    ordered = _name_order(raw_nodes)
    ids = {str(n): i for i, n in enumerate(ordered)}

    edges: list[DirectedEdge] = []
    seen: set[frozenset] = set()
    for k, link in enumerate(raw_links):
        if not isinstance(link, Mapping) or "a" not in link or "b" not in link:
            raise TopologyError(f"link #{k} must be an object with 'a' and 'b'")
        a, b = str(link["a"]), str(link["b"])
        for n in (a, b):
            if n not in ids:
                raise TopologyError(f"unknown node {n!r} in link #{k}")
        if a == b:
            raise TopologyError(f"link #{k} is a self-loop on {a!r}")
        key = frozenset((a, b))
        if key in seen:
            raise TopologyError(f"duplicate edge declaration {a!r}-{b!r} (link #{k})")
        seen.add(key)
        caps = []
        for fld in ("cap_ab", "cap_ba"):
            c = link.get(fld)
            c = default_capacity if c is None else c
            try:
                c = float(c)
            except (TypeError, ValueError):
                raise TopologyError(f"link #{k} {fld} is not a number: {c!r}") from None
            if not (c > 0 and math.isfinite(c)):
                raise TopologyError(f"link #{k} ({a!r}-{b!r}) has non-positive capacity {c}")
            caps.append(c)
        ia, ib = ids[a], ids[b]
        edges.append(DirectedEdge(len(edges), ia, ib, caps[0]))
        edges.append(DirectedEdge(len(edges), ib, ia, caps[1]))
    return NetworkGraph(range(len(ordered)), edges, [str(n) for n in ordered])


def read_document(source: str | FsPath) -> Any:
    """Read a JSON or YAML document from disk."""
    import yaml

    text = FsPath(source).read_text()
    if str(source).endswith(".json"):
        return json.loads(text)
    return yaml.safe_load(text)


SAMPLE_DIR = FsPath(__file__).with_name("data")


def builtin_topology(name: str) -> dict[str, Any]:
    path = SAMPLE_DIR / f"{name}.json"
    if not path.exists():
        known = sorted(p.stem for p in SAMPLE_DIR.glob("*.json"))
        raise TopologyError(f"no built-in topology {name!r}; available: {', '.join(known)}")
    return json.loads(path.read_text())


def resolve_topology(ref: str, default_capacity: float = 1.0) -> NetworkGraph:
    """Load a topology by file path or built-in sample name."""
    if FsPath(ref).exists():
        return load_topology(ref, default_capacity)
    if ref.startswith("random:"):
        # random:<nodes>:<links>:<seed>
        _, n, m, seed = ref.split(":")
        return load_topology(random_topology_document(int(n), int(m), int(seed)), default_capacity)
    return load_topology(builtin_topology(ref), default_capacity)


def random_topology_document(num_nodes: int, num_links: int, seed) -> dict[str, Any]:
    """Connected random topology: a random spanning tree plus random extra links."""
    max_links = num_nodes * (num_nodes - 1) // 2
    if not num_nodes - 1 <= num_links <= max_links:
        raise ValueError(f"need {num_nodes - 1} <= links <= {max_links}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(num_nodes)
    pairs = set()
    for i in range(1, num_nodes):
        j = int(rng.integers(i))
        pairs.add(tuple(sorted((int(order[i]), int(order[j])))))
    while len(pairs) < num_links:
        a, b = (int(x) for x in rng.choice(num_nodes, size=2, replace=False))
        pairs.add((min(a, b), max(a, b)))
    links = [{"a": a, "b": b} for a, b in sorted(pairs)]
    return {"nodes": list(range(num_nodes)), "links": links}


def randomize_capacities(graph: NetworkGraph, low: float, high: float, seed) -> NetworkGraph:
    """Draw every directed edge capacity independently from U[low, high]."""
    if not low > 0:
        raise ValueError(f"low must be positive, got {low}")
    if high < low:
        raise ValueError(f"high ({high}) must be >= low ({low})")
    if low == high:
        return graph.with_capacities([float(low)] * len(graph.edges))
    rng = np.random.default_rng(seed)
    caps = rng.uniform(low, high, size=len(graph.edges))
    # uniform() samples [low, high); clip guards against rounding at the top end
    return graph.with_capacities(np.clip(caps, low, high).tolist())


# -- path queries --------------------------------------------------------------

def min_hop_count(graph: NetworkGraph, s: int, t: int) -> int:
    if s == t:
        raise ValueError("source equals destination")
    dist = {s: 0}
    queue = deque([s])
    while queue:
        u = queue.popleft()
        for eid in graph.out_edges(u):
            v = graph.edges[eid].head
            if v not in dist:
                dist[v] = dist[u] + 1
                if v == t:
                    return dist[v]
                queue.append(v)
    raise NoPathError(f"no path from {s} to {t}")


def iter_paths(graph: NetworkGraph, s: int, t: int, max_hops: int) -> Iterator[Path]:
    """Depth-first generator of simple s->t paths with at most ``max_hops`` edges.

    Paths come out in lexicographic order of their node sequences.
    """
    if s == t:
        raise ValueError("source equals destination")
    if max_hops < 1:
        raise ValueError("max_hops must be >= 1")
    edges = graph.edges
    node_stack = [s]
    edge_stack: list[int] = []
    on_path = {s}

    def extend(u: int):
        for eid in graph.out_edges(u):
            v = edges[eid].head
            if v in on_path:
                continue
            if v == t:
                yield Path(tuple(edge_stack) + (eid,), tuple(node_stack) + (t,))
                continue
            if len(edge_stack) + 1 >= max_hops:
                continue
            node_stack.append(v)
            edge_stack.append(eid)
            on_path.add(v)
            yield from extend(v)
            on_path.discard(v)
            edge_stack.pop()
            node_stack.pop()

    yield from extend(s)


def enumerate_paths(graph: NetworkGraph, s: int, t: int, max_hops: int) -> list[Path]:
    return list(iter_paths(graph, s, t, max_hops))


def all_simple_paths(graph: NetworkGraph, s: int, t: int) -> list[Path]:
    return enumerate_paths(graph, s, t, max(1, graph.num_nodes - 1))


def node_pairs(graph: NetworkGraph) -> list[tuple[int, int]]:
    return list(itertools.permutations(graph.nodes, 2))
