"""Small hand-built instances used as golden fixtures and CLI demos."""

from __future__ import annotations

from dataclasses import dataclass

from .model import Flow, NetworkState, Path, load_topology


@dataclass
class Instance:
    state: NetworkState
    new_flow: Flow
    candidate: Path


def three_hop(extended: bool = False) -> Instance:
    """Three-hop candidate s->a->b->t with capacities 1, 2, 0.5.

    F1 (remaining 10) crosses s->a->b, F2 (remaining 5) crosses a->b->t and
    the new flow carries 8. With ``extended`` an idle detour s->c->t
    (capacities 1 and 0.5) is added.
    """
    links = [
        {"a": 0, "b": 1, "cap_ab": 1.0, "cap_ba": 1.0},
        {"a": 1, "b": 2, "cap_ab": 2.0, "cap_ba": 2.0},
        {"a": 2, "b": 3, "cap_ab": 0.5, "cap_ba": 0.5},
    ]
    nodes = [0, 1, 2, 3]
    if extended:
        nodes.append(4)
        links += [
            {"a": 0, "b": 4, "cap_ab": 1.0, "cap_ba": 1.0},
            {"a": 4, "b": 3, "cap_ab": 0.5, "cap_ba": 0.5},
        ]
    g = load_topology({"nodes": nodes, "links": links})
    f1 = Flow(1, 0, 2, 0.0, 10.0, path=g.path([0, 1, 2]))
    f2 = Flow(2, 1, 3, 0.0, 5.0, path=g.path([1, 2, 3]))
    state = NetworkState(g, [f1, f2])
    new = Flow(3, 0, 3, 0.0, 8.0)
    return Instance(state, new, g.path([0, 1, 2, 3]))


def four_flow(x: float = 1.0, new_volume: float = 1.0) -> Instance:
    """Four unit-capacity flows around the candidate 0->1->2->3.

    f1 and f4 overlap on 1->2, so only {f2, f3} can run together; the worst
    order serializes f1, f4 and then {f2, f3}.
    """
    links = [(0, 1), (1, 2), (2, 3), (1, 4), (4, 2)]
    g = load_topology({
        "nodes": [0, 1, 2, 3, 4],
        "links": [{"a": a, "b": b, "cap_ab": 1.0, "cap_ba": 1.0} for a, b in links],
    })
    paths = {
        1: [0, 1, 2],
        2: [0, 1, 4, 2, 3],
        3: [1, 2],
        4: [1, 2, 3],
    }
    flows = [Flow(i, p[0], p[-1], 0.0, x, path=g.path(p)) for i, p in paths.items()]
    state = NetworkState(g, flows)
    return Instance(state, Flow(5, 0, 3, 0.0, new_volume), g.path([0, 1, 2, 3]))


INSTANCES = {"three-hop": three_hop, "three-hop-detour": lambda: three_hop(True), "four-flow": four_flow}
