"""Independent brute-force oracles and random generators for the tests.

Nothing here calls the routine it is used to check.
"""
from __future__ import annotations

from collections import Counter
from itertools import permutations
from math import factorial

import numpy as np

from cellnet.graphs import (
    ColorGraph,
    EdgeColor,
    GraphMorphism,
    colored_graph,
    mono_colors,
)

TWO_COLORS = ColorGraph(
    ("x", "y"),
    (EdgeColor("xx", "x", "x"), EdgeColor("xy", "x", "y"), EdgeColor("yx", "y", "x"), EdgeColor("yy", "y", "y")),
)


# ---------------------------------------------------------------------------
# set partitions and balance


def all_set_partitions(items):
    """Every set partition, by inserting each item into an existing block or a new one."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in all_set_partitions(rest):
        for k in range(len(part)):
            yield part[:k] + [[first] + part[k]] + part[k + 1:]
        yield [[first]] + part


def bell(n: int) -> int:
    b = [[1]]
    for i in range(1, n + 1):
        row = [b[i - 1][-1]]
        for x in b[i - 1]:
            row.append(row[-1] + x)
        b.append(row)
    return b[n][0]


def balanced_by_bijection(g, blocks) -> bool:
    """Try every in-edge bijection for every pair of nodes in a block."""
    blk = {a: i for i, b in enumerate(blocks) for a in b}
    for b in blocks:
        if len({g.node_color[a] for a in b}) > 1:
            return False
        for a in b:
            for c in b:
                ea, ec = list(g.in_edges(a)), list(g.in_edges(c))
                if len(ea) != len(ec):
                    return False
                ok = False
                for perm in permutations(ec):
                    if all(g.edges[x].color == g.edges[y].color
                           and blk[g.edges[x].src] == blk[g.edges[y].src] for x, y in zip(ea, perm)):
                        ok = True
                        break
                if not ok:
                    return False
    return True


def balanced_partitions_oracle(g) -> set[frozenset[frozenset[str]]]:
    out = set()
    for part in all_set_partitions(g.nodes):
        if balanced_by_bijection(g, part):
            out.add(frozenset(frozenset(b) for b in part))
    return out


# ---------------------------------------------------------------------------
# automorphisms


def automorphism_count(g) -> int:
    """Node permutations preserving colors and arrow multiplicities, times edge bijections."""
    nodes = list(g.nodes)
    mult = Counter((e.src, e.dst, e.color) for e in g.edges.values())
    total = 0
    for perm in permutations(nodes):
        s = dict(zip(nodes, perm))
        if any(g.node_color[a] != g.node_color[s[a]] for a in nodes):
            continue
        if all(mult[(x, y, c)] == mult[(s[x], s[y], c)] for (x, y, c) in mult) and \
                len(mult) == len({(s[x], s[y], c) for (x, y, c) in mult}):
            k = 1
            for m in mult.values():
                k *= factorial(m)
            total += k
    return total


# ---------------------------------------------------------------------------
# étale check by counting


def etale_by_counting(f: GraphMorphism) -> bool:
    for a in f.domain.nodes:
        imgs = sorted(f.edge_map[e] for e in f.domain.in_edges(a))
        if imgs != sorted(f.codomain.in_edges(f.node_map[a])):
            return False
    return True


# ---------------------------------------------------------------------------
# random graphs


def random_graph(rng: np.random.Generator, n_nodes: int, n_edges: int, two_colors: bool = False):
    colors = TWO_COLORS if two_colors else mono_colors()
    nodes = {f"n{i}": (colors.node_colors[rng.integers(len(colors.node_colors))]) for i in range(n_nodes)}
    names = list(nodes)
    edges = []
    for k in range(n_edges):
        s, t = names[rng.integers(n_nodes)], names[rng.integers(n_nodes)]
        cands = [c.id for c in colors.edge_colors if c.src == nodes[s] and c.dst == nodes[t]]
        edges.append((f"e{k}", s, t, cands[0]))
    return colored_graph(colors, nodes, edges)


def relabel(g, rng: np.random.Generator, prefix: str = "r"):
    """Isomorphic copy with shuffled node and edge names, plus the isomorphism."""
    nodes = list(g.nodes)
    perm = rng.permutation(len(nodes))
    nmap = {a: f"{prefix}{perm[i]}" for i, a in enumerate(nodes)}
    eids = list(g.edge_ids)
    eperm = rng.permutation(len(eids))
    emap = {e: f"{prefix}e{eperm[i]}" for i, e in enumerate(eids)}
    h = colored_graph(g.colors, {nmap[a]: g.node_color[a] for a in nodes},
                      [(emap[e.id], nmap[e.src], nmap[e.dst], e.color) for e in g.edges.values()])
    return h, GraphMorphism(g, h, nmap, emap)
