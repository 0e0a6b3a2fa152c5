"""Balanced partitions and quotient graphs.

A partition of the nodes is balanced when any two nodes of a block have
in-edges that can be matched one to one, preserving edge color and the
block of the source.  Equivalently, the projection onto the quotient graph
is étale.
"""
from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .graphs import ColoredGraph, GraphMorphism, colored_graph, is_etale, validate_morphism


class InvalidPartition(ValueError):
    pass


class NotBalanced(ValueError):
    pass


class TooLarge(ValueError):
    pass


@dataclass(frozen=True)
class Partition:
    """Blocks are stored sorted internally and ordered by their minimal element."""

    blocks: tuple[tuple[str, ...], ...]
    block_of: Mapping[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        blocks = tuple(sorted((tuple(sorted(map(str, b))) for b in self.blocks), key=lambda b: b[0] if b else ""))
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "block_of", {a: i for i, b in enumerate(blocks) for a in b})

    @classmethod
    def of(cls, blocks: Iterable[Iterable[str]]) -> "Partition":
        return cls(tuple(tuple(b) for b in blocks))

    @classmethod
    def discrete(cls, g: ColoredGraph) -> "Partition":
        return cls(tuple((a,) for a in g.nodes))

    def __len__(self):
        return len(self.blocks)

    def refines(self, other: "Partition") -> bool:
        """True when every block of ``self`` lies inside a block of ``other``."""
        return all(len({other.block_of[a] for a in b}) == 1 for b in self.blocks)

    def as_sets(self) -> set[frozenset[str]]:
        return {frozenset(b) for b in self.blocks}

    def to_dict(self) -> dict:
        return {"blocks": [list(b) for b in self.blocks]}


def check_partition(g: ColoredGraph, p: Partition) -> None:
    seen: list[str] = [a for b in p.blocks for a in b]
    if any(len(b) == 0 for b in p.blocks):
        raise InvalidPartition("empty block")
    if len(seen) != len(set(seen)):
        raise InvalidPartition("blocks overlap")
    if set(seen) != set(g.nodes):
        missing = sorted(set(g.nodes) - set(seen))
        extra = sorted(set(seen) - set(g.nodes))
        raise InvalidPartition(f"blocks do not cover the nodes (missing {missing}, unknown {extra})")
    for b in p.blocks:
        if len({g.node_color[a] for a in b}) != 1:
            raise InvalidPartition(f"block {list(b)} mixes node colors")


def _sorted_in_edges(g: ColoredGraph, a: str, p: Partition) -> list[str]:
    def key(eid):
        e = g.edges[eid]
        return (e.color, p.block_of[e.src], e.src, eid)
    return sorted(g.in_edges(a), key=key)


def _profile(g: ColoredGraph, a: str, p: Partition) -> list[tuple[str, int]]:
    return [(g.edges[e].color, p.block_of[g.edges[e].src]) for e in _sorted_in_edges(g, a, p)]


@dataclass(frozen=True)
class BalanceResult:
    ok: bool
    matchings: Mapping[tuple[str, str], Mapping[str, str]] = field(default_factory=dict)
    offending: tuple[str, str] | None = None

    def __bool__(self):
        return self.ok


def is_balanced(g: ColoredGraph, p: Partition) -> BalanceResult:
    """Check balance; on success return the canonical in-edge matching rep -> member per pair."""
    check_partition(g, p)
    matchings = {}
    for b in p.blocks:
        rep = b[0]
        rep_prof = _profile(g, rep, p)
        rep_edges = _sorted_in_edges(g, rep, p)
        for a in b[1:]:
            if _profile(g, a, p) != rep_prof:
                return BalanceResult(False, offending=(rep, a))
            matchings[(a, rep)] = dict(zip(_sorted_in_edges(g, a, p), rep_edges))
    return BalanceResult(True, matchings)


def coarsest_balanced(g: ColoredGraph, seed: int | None = None) -> Partition:
    """Top of the lattice of balanced partitions.

    Starts from the node-color partition and splits blocks by the multiset of
    (edge color, source block) over in-edges until nothing changes.  With a
    ``seed`` the order in which blocks are examined is shuffled; the fixpoint
    does not depend on it.
    """
    rng = random.Random(seed) if seed is not None else None
    by_color: dict[str, list[str]] = {}
    for a in g.nodes:
        by_color.setdefault(g.node_color[a], []).append(a)
    blocks = [list(v) for v in by_color.values()]
    while True:
        block_of = {a: i for i, b in enumerate(blocks) for a in b}
        order = list(range(len(blocks)))
        if rng is not None:
            rng.shuffle(order)
        new_blocks = []
        for i in order:
            groups: dict[tuple, list[str]] = {}
            for a in blocks[i]:
                prof = Counter((g.edges[e].color, block_of[g.edges[e].src]) for e in g.in_edges(a))
                groups.setdefault(tuple(sorted(prof.items())), []).append(a)
            new_blocks.extend(groups.values())
        if len(new_blocks) == len(blocks):
            return Partition.of(new_blocks)
        blocks = new_blocks


def _set_partitions(nodes: Sequence[str], color: Mapping[str, str]):
    """Restricted growth strings, pruned so a block never mixes colors."""
    n = len(nodes)
    labels = [0] * n
    block_color: list[str] = []

    def rec(i):
        if i == n:
            blocks: list[list[str]] = [[] for _ in block_color]
            for a, k in zip(nodes, labels):
                blocks[k].append(a)
            yield blocks
            return
        c = color[nodes[i]]
        for k in range(len(block_color) + 1):
            if k < len(block_color):
                if block_color[k] != c:
                    continue
                labels[i] = k
                yield from rec(i + 1)
            else:
                labels[i] = k
                block_color.append(c)
                yield from rec(i + 1)
                block_color.pop()

    yield from rec(0)


def enumerate_balanced(g: ColoredGraph, max_nodes: int = 10) -> list[Partition]:
    """Every balanced partition by brute force, coarsest first."""
    if len(g.nodes) > max_nodes:
        raise TooLarge(f"{len(g.nodes)} nodes exceeds the enumeration bound {max_nodes}")
    out = []
    for blocks in _set_partitions(list(g.nodes), g.node_color):
        p = Partition.of(blocks)
        if is_balanced(g, p):
            out.append(p)
    out.sort(key=lambda p: (len(p), p.blocks))
    return out


@dataclass(frozen=True)
class QuotientResult:
    quotient: ColoredGraph
    projection: GraphMorphism
    matchings: Mapping[str, Mapping[str, str]]   # node -> (in-edge -> quotient edge)


def block_name(block: Sequence[str]) -> str:
    return "+".join(block)


def quotient(g: ColoredGraph, p: Partition) -> QuotientResult:
    """Quotient graph by a balanced partition with its étale projection.

    Quotient nodes are named by joining block members with ``+``; the
    in-edges of a quotient node are those of the block's minimal member,
    keeping their ids, with sources replaced by blocks.
    """
    res = is_balanced(g, p)
    if not res:
        raise NotBalanced(f"nodes {res.offending[0]!r} and {res.offending[1]!r} have unmatched inputs")
    names = [block_name(b) for b in p.blocks]
    qnodes = {names[i]: g.node_color[b[0]] for i, b in enumerate(p.blocks)}
    qedges = []
    for i, b in enumerate(p.blocks):
        for eid in g.in_edges(b[0]):
            e = g.edges[eid]
            qedges.append((eid, names[p.block_of[e.src]], names[i], e.color))
    q = colored_graph(g.colors, qnodes, qedges)

    node_map = {a: names[p.block_of[a]] for a in g.nodes}
    edge_map: dict[str, str] = {}
    matchings: dict[str, dict[str, str]] = {}
    for b in p.blocks:
        rep = b[0]
        for a in b:
            m = {e: e for e in g.in_edges(a)} if a == rep else dict(res.matchings[(a, rep)])
            matchings[a] = m
            edge_map.update(m)
    proj = validate_morphism(g, q, node_map, edge_map)
    assert is_etale(proj), "projection onto a balanced quotient must be étale"
    return QuotientResult(q, proj, matchings)


def load_partition(path: str | Path) -> Partition:
    with open(path) as fh:
        raw = json.load(fh)
    try:
        return Partition.of(raw["blocks"])
    except (KeyError, TypeError) as exc:
        raise InvalidPartition(f"malformed partition file {path}") from exc


def dump_partition(p: Partition, path: str | Path) -> None:
    Path(path).write_text(json.dumps(p.to_dict()) + "\n")
