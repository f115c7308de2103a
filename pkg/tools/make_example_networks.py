#!/usr/bin/env python3
"""Regenerate the example network files under networks/.

All files are produced deterministically from fixed seeds, so rerunning this
script leaves the repository unchanged.
"""

import pathlib

import numpy as np

from gridident import (Branch, Bus, BusSpec, NetworkGraph, phase_expand,
                       random_admittances, random_connected_graph, random_tree,
                       remove_edge, complete_graph, save_bus_spec, save_network)

OUT = pathlib.Path(__file__).resolve().parents[1] / "networks"


def _coupling_y(rng):
    return complex(rng.uniform(0.5, 2.0), rng.uniform(-2.0, -0.5))


def _diag_branch(rng, a, b, phases):
    from gridident import Coupling
    return Branch(a, b, tuple(Coupling(p, p, _coupling_y(rng)) for p in phases))


def cycle5():
    g = NetworkGraph.from_edges(5, [(1, 2), (2, 3), (3, 4), (4, 5), (1, 5)])
    return random_admittances(g, np.random.default_rng(501))


def mesh14():
    # meshed transmission-style network: ring backbone plus cross ties
    rng = np.random.default_rng(1401)
    g = random_connected_graph(14, rng, 0.12)
    if g.has_edge(1, 8):
        g = remove_edge(g, (1, 8))  # keep one pair free for the missing-edge prior
    return random_admittances(g, rng)


def tree123():
    rng = np.random.default_rng(12301)
    return random_admittances(random_tree(123, rng), rng)


def feeder13_spec():
    # radial feeder with three-phase mains, two-phase and single-phase laterals;
    # expands to 32 single-phase nodes
    rng = np.random.default_rng(1301)
    buses = tuple(
        Bus(name, phases) for name, phases in [
            ("n1", "abc"), ("n2", "abc"), ("n3", "bc"), ("n4", "bc"),
            ("n5", "abc"), ("n6", "abc"), ("n7", "abc"), ("n8", "bc"),
            ("n9", "b"), ("n10", "abc"), ("n11", "abc"), ("n12", "abc"),
            ("n13", "c"),
        ])
    pairs = [("n1", "n2"), ("n2", "n7"), ("n7", "n12"), ("n2", "n5"),
             ("n5", "n6"), ("n7", "n10"), ("n10", "n11"), ("n2", "n3"),
             ("n3", "n4"), ("n7", "n8"), ("n8", "n9"), ("n8", "n13")]
    byname = {b.name: b for b in buses}
    branches = tuple(
        _diag_branch(rng, a, b,
                     "".join(p for p in byname[a].phases if p in byname[b].phases))
        for a, b in pairs)
    return BusSpec(buses, branches)


def lateral3_spec():
    rng = np.random.default_rng(301)
    buses = (Bus("b1", "abc"), Bus("b2", "abc"), Bus("b3", "bc"))
    branches = (_diag_branch(rng, "b1", "b2", "abc"),
                _diag_branch(rng, "b2", "b3", "bc"))
    return BusSpec(buses, branches)


def main():
    OUT.mkdir(exist_ok=True)
    save_network(cycle5(), OUT / "cycle5.json")
    save_network(mesh14(), OUT / "mesh14.json")
    save_network(tree123(), OUT / "tree123.json")
    spec13 = feeder13_spec()
    net13, node_map = phase_expand(spec13)
    labels = [f"{bus}.{phase}" for (bus, phase) in sorted(node_map, key=node_map.get)]
    save_network(net13, OUT / "feeder13_expanded.json", labels=labels, bus_spec=spec13)
    save_bus_spec(spec13, OUT / "feeder13_busspec.json")
    save_bus_spec(lateral3_spec(), OUT / "lateral3_busspec.json")
    for path in sorted(OUT.iterdir()):
        print("wrote", path)


if __name__ == "__main__":
    main()
