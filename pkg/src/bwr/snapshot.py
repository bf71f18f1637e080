"""Network state snapshots on disk, for one-shot routing and oracle queries.

Document layout (JSON or YAML)::

    topology:   topology document, built-in name, or file path
    flows:      [{id, path: [node names], remaining, total?}]
    new_flow:   {source, destination, volume}
    candidate:  [node names]            # oracle only
    rates:      {flow id: rate}         # utilization/width baselines only
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping

from .model import Flow, NetworkGraph, NetworkState, Path, load_topology, read_document, resolve_topology
from .samples import Instance


@dataclass
class Snapshot:
    state: NetworkState
    new_flow: Flow
    candidate: Path | None = None
    rates: dict[int, float] | None = None


def _node(graph: NetworkGraph, name) -> int:
    try:
        return graph.names.index(str(name))
    except ValueError:
        raise ValueError(f"unknown node {name!r}") from None


def load_snapshot(source: Mapping[str, Any] | str) -> Snapshot:
    doc = source if isinstance(source, Mapping) else read_document(source)
    topo = doc["topology"]
    graph = load_topology(topo) if isinstance(topo, Mapping) else resolve_topology(str(topo))

    def path_of(names):
        return graph.path([_node(graph, n) for n in names])

    flows = []
    for k, fd in enumerate(doc.get("flows", [])):
        p = path_of(fd["path"])
        rem = float(fd["remaining"])
        total = float(fd.get("total", rem))
        flows.append(Flow(int(fd.get("id", k + 1)), p.source, p.destination, 0.0, total, rem, p))
    state = NetworkState(graph, flows)
    nf = doc["new_flow"]
    new_id = max(state.flows, default=0) + 1
    new = Flow(new_id, _node(graph, nf["source"]), _node(graph, nf["destination"]), 0.0, float(nf["volume"]))
    candidate = path_of(doc["candidate"]) if doc.get("candidate") else None
    rates = {int(k): float(v) for k, v in doc["rates"].items()} if doc.get("rates") is not None else None
    return Snapshot(state, new, candidate, rates)


def instance_document(inst: Instance) -> dict[str, Any]:
    g = inst.state.graph
    names = g.names
    return {
        "topology": g.to_document(),
        "flows": [{"id": f.id, "path": [names[n] for n in f.path.nodes],
                   "remaining": f.remaining_volume, "total": f.total_volume}
                  for f in inst.state.flows.values()],
        "new_flow": {"source": names[inst.new_flow.source], "destination": names[inst.new_flow.destination],
                     "volume": inst.new_flow.total_volume},
        "candidate": [names[n] for n in inst.candidate.nodes],
    }
