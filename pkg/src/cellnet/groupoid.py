"""Symmetry groupoid of a colored graph, handled through its skeleton.

The groupoid of input trees is never materialized as a set of arrows.  Two
input trees are isomorphic exactly when their signatures agree, so the
skeleton is the partition of nodes by signature, and the automorphism
group at each class is a product of symmetric groups permuting leaves of
equal slot type.
"""
from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from itertools import permutations, product
from typing import Mapping

from .graphs import (
    ColoredGraph,
    GraphMorphism,
    InputSignature,
    SlotType,
    input_tree,
    is_etale,
)


class NotEtale(ValueError):
    pass


class TooLarge(ValueError):
    pass


@dataclass(frozen=True)
class SkeletonClass:
    id: str
    representative: str
    signature: InputSignature
    members: tuple[str, ...]

    @property
    def aut_order(self) -> int:
        return self.signature.aut_order

    @property
    def aut_blocks(self) -> tuple[tuple[SlotType, int], ...]:
        return self.signature.slots

    @property
    def leafless(self) -> bool:
        return self.signature.n_slots == 0

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "representative": self.representative,
            "signature": str(self.signature),
            "members": list(self.members),
            "aut_order": self.aut_order,
            "aut_blocks": [{"slot_type": str(t), "multiplicity": m} for t, m in self.aut_blocks],
        }


@dataclass(frozen=True)
class Skeleton:
    graph: ColoredGraph
    classes: tuple[SkeletonClass, ...]

    def class_of(self, a: str) -> SkeletonClass:
        return self._by_node[a]

    def by_id(self, cid: str) -> SkeletonClass:
        for c in self.classes:
            if c.id == cid:
                return c
        raise KeyError(cid)

    def by_signature(self, sig: InputSignature) -> SkeletonClass | None:
        for c in self.classes:
            if c.signature == sig:
                return c
        return None

    @property
    def _by_node(self) -> Mapping[str, SkeletonClass]:
        return {a: c for c in self.classes for a in c.members}

    def to_dict(self) -> dict:
        return {"classes": [c.to_dict() for c in self.classes]}


def skeleton(g: ColoredGraph) -> Skeleton:
    groups: dict[InputSignature, list[str]] = defaultdict(list)
    for a in g.nodes:
        groups[input_tree(g, a).signature].append(a)
    ordered = sorted(groups.items(), key=lambda kv: min(kv[1]))
    classes = tuple(
        SkeletonClass(f"c{i}", min(members), sig, tuple(sorted(members)))
        for i, (sig, members) in enumerate(ordered)
    )
    return Skeleton(g, classes)


@dataclass(frozen=True)
class ClassMap:
    source: Skeleton
    target: Skeleton
    mapping: Mapping[str, str]                       # class id -> class id
    witnesses: Mapping[str, Mapping[str, str]]       # node -> leaf bijection of phi_a

    @property
    def bijective(self) -> bool:
        return len(set(self.mapping.values())) == len(self.mapping) == len(self.target.classes)


def induced_class_map(f: GraphMorphism, src: Skeleton | None = None,
                      dst: Skeleton | None = None) -> ClassMap:
    """Object part of the functor between symmetry groupoids induced by an étale map."""
    cert = is_etale(f)
    if not cert:
        raise NotEtale(f"not étale at node {cert.node!r}: {cert.reason}")
    src = src or skeleton(f.domain)
    dst = dst or skeleton(f.codomain)
    mapping = {}
    for c in src.classes:
        image = dst.class_of(f.node_map[c.representative])
        # the witness iso forces equal signatures; every member agrees
        assert image.signature == c.signature
        for a in c.members:
            assert dst.class_of(f.node_map[a]) is image
        mapping[c.id] = image.id
    return ClassMap(src, dst, mapping, cert.witnesses)


def is_essentially_surjective(cm: ClassMap) -> bool:
    return set(cm.mapping.values()) == {c.id for c in cm.target.classes}


# ---------------------------------------------------------------------------
# automorphisms of the whole graph


@dataclass(frozen=True)
class GraphAutomorphismGroup:
    graph: ColoredGraph
    elements: tuple[GraphMorphism, ...]

    @property
    def order(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __contains__(self, h: GraphMorphism) -> bool:
        return h.key() in {e.key() for e in self.elements}


def _edge_groups(g: ColoredGraph) -> dict[tuple[str, str, str], list[str]]:
    groups: dict[tuple[str, str, str], list[str]] = defaultdict(list)
    for e in g.edges.values():
        groups[(e.src, e.dst, e.color)].append(e.id)
    return {k: sorted(v) for k, v in groups.items()}


def graph_automorphisms(g: ColoredGraph, max_nodes: int = 12) -> GraphAutomorphismGroup:
    """All color-preserving automorphisms (node and edge bijections), by backtracking."""
    n = len(g.nodes)
    if n > max_nodes:
        raise TooLarge(f"{n} nodes exceeds the automorphism search bound {max_nodes}")
    groups = _edge_groups(g)
    count = Counter({k: len(v) for k, v in groups.items()})
    sig = {a: input_tree(g, a).signature for a in g.nodes}
    out_sig = {a: Counter() for a in g.nodes}
    for e in g.edges.values():
        out_sig[e.src][(e.color, g.node_color[e.dst])] += 1
    nodes = list(g.nodes)

    def consistent(assign: dict[str, str], a: str, b: str) -> bool:
        for x, y in assign.items():
            for ec in g.colors.edge_colors:
                if count[(a, x, ec.id)] != count[(b, y, ec.id)]:
                    return False
                if count[(x, a, ec.id)] != count[(y, b, ec.id)]:
                    return False
        for ec in g.colors.edge_colors:
            if count[(a, a, ec.id)] != count[(b, b, ec.id)]:
                return False
        return True

    node_maps: list[dict[str, str]] = []

    def extend(i: int, assign: dict[str, str], used: set[str]):
        if i == n:
            node_maps.append(dict(assign))
            return
        a = nodes[i]
        for b in nodes:
            if b in used or sig[a] != sig[b] or out_sig[a] != out_sig[b]:
                continue
            if not consistent(assign, a, b):
                continue
            assign[a] = b
            used.add(b)
            extend(i + 1, assign, used)
            del assign[a]
            used.discard(b)

    extend(0, {}, set())

    elements = []
    keys = sorted(groups)
    for nm in node_maps:
        choices = []
        for k in keys:
            s, t, c = k
            target = groups[(nm[s], nm[t], c)]
            choices.append([dict(zip(groups[k], p)) for p in permutations(target)])
        for combo in product(*choices):
            em: dict[str, str] = {}
            for part in combo:
                em.update(part)
            elements.append(GraphMorphism(g, g, nm, em))
    elements.sort(key=lambda h: h.key())
    return GraphAutomorphismGroup(g, tuple(elements))
