"""Colored directed multigraphs over a color graph, their morphisms and input trees.

A colored graph is a finite directed multigraph together with a map of
graphs onto a fixed color graph ``C``: every node carries a node color,
every edge an edge color, and the endpoints of an edge carry the colors
prescribed by the endpoints of its edge color.

Identifiers are opaque strings ordered lexicographically; every canonical
ordering below is derived from that order so results are reproducible.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from math import factorial, prod
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping


class GraphError(ValueError):
    """Base class for invalid graph input."""


class DanglingEndpoint(GraphError):
    pass


class ColorMismatch(GraphError):
    pass


class DuplicateId(GraphError):
    pass


class UnknownNode(GraphError):
    pass


class MorphismError(ValueError):
    pass


class NotAMorphism(MorphismError):
    pass


class ColorNotPreserved(MorphismError):
    pass


class UnmappedElement(MorphismError):
    pass


class DomainMismatch(MorphismError):
    pass


# ---------------------------------------------------------------------------
# color graph and colored graph


@dataclass(frozen=True)
class EdgeColor:
    id: str
    src: str
    dst: str


@dataclass(frozen=True)
class ColorGraph:
    node_colors: tuple[str, ...]
    edge_colors: tuple[EdgeColor, ...]

    def __post_init__(self):
        if len(set(self.node_colors)) != len(self.node_colors):
            raise DuplicateId(f"duplicate node color in {self.node_colors}")
        ids = [c.id for c in self.edge_colors]
        if len(set(ids)) != len(ids):
            raise DuplicateId(f"duplicate edge color in {ids}")
        known = set(self.node_colors)
        for c in self.edge_colors:
            if c.src not in known or c.dst not in known:
                raise DanglingEndpoint(
                    f"edge color {c.id!r} joins undeclared node colors {c.src!r} -> {c.dst!r}"
                )

    def edge_color(self, cid: str) -> EdgeColor:
        for c in self.edge_colors:
            if c.id == cid:
                return c
        raise ColorMismatch(f"unknown edge color {cid!r}")

    def to_dict(self) -> dict:
        return {
            "node_colors": list(self.node_colors),
            "edge_colors": [{"id": c.id, "src": c.src, "dst": c.dst} for c in self.edge_colors],
        }


@dataclass(frozen=True)
class Edge:
    id: str
    src: str
    dst: str
    color: str


@dataclass(frozen=True, eq=False)
class ColoredGraph:
    """Immutable colored multigraph. Build with :func:`colored_graph`."""

    colors: ColorGraph
    node_color: Mapping[str, str]
    edges: Mapping[str, Edge]
    nodes: tuple[str, ...] = field(init=False)
    _in: Mapping[str, tuple[str, ...]] = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(sorted(self.node_color)))
        incoming: dict[str, list[str]] = {a: [] for a in self.nodes}
        for e in self.edges.values():
            incoming[e.dst].append(e.id)
        object.__setattr__(self, "_in", {a: tuple(sorted(v)) for a, v in incoming.items()})

    def __eq__(self, other):
        if not isinstance(other, ColoredGraph):
            return NotImplemented
        return (
            self.colors == other.colors
            and dict(self.node_color) == dict(other.node_color)
            and dict(self.edges) == dict(other.edges)
        )

    def __hash__(self):
        return hash((self.colors, tuple(sorted(self.node_color.items())), tuple(sorted(self.edges))))

    @property
    def edge_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self.edges))

    def in_edges(self, a: str) -> tuple[str, ...]:
        if a not in self.node_color:
            raise UnknownNode(a)
        return self._in[a]

    def to_dict(self) -> dict:
        return {
            "colors": self.colors.to_dict(),
            "nodes": [{"id": a, "color": self.node_color[a]} for a in self.nodes],
            "edges": [
                {"id": e.id, "src": e.src, "dst": e.dst, "color": e.color}
                for e in (self.edges[k] for k in self.edge_ids)
            ],
        }

    def __repr__(self):
        return f"ColoredGraph(nodes={list(self.nodes)}, edges={len(self.edges)})"


def colored_graph(colors: ColorGraph, nodes: Mapping[str, str] | Iterable[tuple[str, str]],
                  edges: Iterable[tuple[str, str, str, str]]) -> ColoredGraph:
    """Validate and build a colored graph.

    ``nodes`` maps node id to node color; ``edges`` yields
    ``(edge id, src, dst, edge color)`` tuples.
    """
    node_items = list(nodes.items()) if isinstance(nodes, Mapping) else list(nodes)
    node_color: dict[str, str] = {}
    for a, c in node_items:
        a, c = str(a), str(c)
        if a in node_color:
            raise DuplicateId(f"duplicate node id {a!r}")
        if c not in colors.node_colors:
            raise ColorMismatch(f"node {a!r} has undeclared color {c!r}")
        node_color[a] = c
    edge_map: dict[str, Edge] = {}
    for eid, s, t, c in edges:
        eid, s, t, c = str(eid), str(s), str(t), str(c)
        if eid in edge_map:
            raise DuplicateId(f"duplicate edge id {eid!r}")
        if s not in node_color or t not in node_color:
            raise DanglingEndpoint(f"edge {eid!r} references unknown node ({s!r} -> {t!r})")
        ec = colors.edge_color(c)
        if node_color[s] != ec.src or node_color[t] != ec.dst:
            raise ColorMismatch(
                f"edge {eid!r} of color {c!r} expects {ec.src!r} -> {ec.dst!r}, "
                f"got {node_color[s]!r} -> {node_color[t]!r}"
            )
        edge_map[eid] = Edge(eid, s, t, c)
    return ColoredGraph(colors, MappingProxyType(node_color), MappingProxyType(edge_map))


def validate_colored_graph(raw: Mapping) -> ColoredGraph:
    """Build a graph from its parsed JSON description."""
    try:
        cdesc = raw["colors"]
        colors = ColorGraph(
            tuple(str(c) for c in cdesc["node_colors"]),
            tuple(EdgeColor(str(c["id"]), str(c["src"]), str(c["dst"])) for c in cdesc["edge_colors"]),
        )
        nodes = [(n["id"], n["color"]) for n in raw["nodes"]]
        edges = [(e["id"], e["src"], e["dst"], e["color"]) for e in raw.get("edges", [])]
    except (KeyError, TypeError) as exc:
        raise GraphError(f"malformed graph description: {exc!r}") from exc
    return colored_graph(colors, nodes, edges)


def mono_colors(node_color: str = "cell", edge_color: str = "arrow") -> ColorGraph:
    """The one-node one-loop color graph, used for uncolored networks."""
    return ColorGraph((node_color,), (EdgeColor(edge_color, node_color, node_color),))


def mono_graph(nodes: Iterable[str], edges: Iterable[tuple[str, str, str]],
               colors: ColorGraph | None = None) -> ColoredGraph:
    """Graph over the one-loop color graph; ``edges`` are ``(id, src, dst)``."""
    colors = colors or mono_colors()
    nc = colors.node_colors[0]
    ec = colors.edge_colors[0].id
    return colored_graph(colors, {str(a): nc for a in nodes}, [(e, s, t, ec) for e, s, t in edges])


# ---------------------------------------------------------------------------
# morphisms


@dataclass(frozen=True, eq=False)
class GraphMorphism:
    domain: ColoredGraph
    codomain: ColoredGraph
    node_map: Mapping[str, str]
    edge_map: Mapping[str, str]

    def __eq__(self, other):
        if not isinstance(other, GraphMorphism):
            return NotImplemented
        return (
            self.domain == other.domain
            and self.codomain == other.codomain
            and dict(self.node_map) == dict(other.node_map)
            and dict(self.edge_map) == dict(other.edge_map)
        )

    def __hash__(self):
        return hash((tuple(sorted(self.node_map.items())), tuple(sorted(self.edge_map.items()))))

    def __call__(self, a: str) -> str:
        return self.node_map[a]

    def key(self) -> tuple:
        """Hashable identity of the underlying maps (graphs assumed fixed)."""
        return (tuple(sorted(self.node_map.items())), tuple(sorted(self.edge_map.items())))

    def to_dict(self) -> dict:
        return {
            "node_map": {a: self.node_map[a] for a in self.domain.nodes},
            "edge_map": {e: self.edge_map[e] for e in self.domain.edge_ids},
        }


def validate_morphism(domain: ColoredGraph, codomain: ColoredGraph,
                      node_map: Mapping[str, str], edge_map: Mapping[str, str]) -> GraphMorphism:
    if domain.colors != codomain.colors:
        raise ColorNotPreserved("domain and codomain are colored by different color graphs")
    node_map = {str(k): str(v) for k, v in node_map.items()}
    edge_map = {str(k): str(v) for k, v in edge_map.items()}
    for a in domain.nodes:
        if a not in node_map:
            raise UnmappedElement(f"node {a!r} is not mapped")
        b = node_map[a]
        if b not in codomain.node_color:
            raise UnmappedElement(f"node {a!r} maps to unknown node {b!r}")
        if domain.node_color[a] != codomain.node_color[b]:
            raise ColorNotPreserved(f"node {a!r} -> {b!r} changes color")
    for eid, e in domain.edges.items():
        if eid not in edge_map:
            raise UnmappedElement(f"edge {eid!r} is not mapped")
        fid = edge_map[eid]
        if fid not in codomain.edges:
            raise UnmappedElement(f"edge {eid!r} maps to unknown edge {fid!r}")
        f = codomain.edges[fid]
        if node_map[e.src] != f.src or node_map[e.dst] != f.dst:
            raise NotAMorphism(
                f"edge {eid!r} ({e.src}->{e.dst}) maps to {fid!r} ({f.src}->{f.dst}) "
                f"but nodes map to {node_map[e.src]}->{node_map[e.dst]}"
            )
        if e.color != f.color:
            raise ColorNotPreserved(f"edge {eid!r} -> {fid!r} changes color")
    extra = (set(node_map) - set(domain.nodes)) | (set(edge_map) - set(domain.edges))
    if extra:
        raise UnmappedElement(f"map mentions elements outside the domain: {sorted(extra)}")
    return GraphMorphism(domain, codomain, node_map, edge_map)


def identity(g: ColoredGraph) -> GraphMorphism:
    return GraphMorphism(g, g, {a: a for a in g.nodes}, {e: e for e in g.edges})


def compose(g: GraphMorphism, f: GraphMorphism) -> GraphMorphism:
    """``g ∘ f``: first ``f``, then ``g``."""
    if f.codomain != g.domain:
        raise DomainMismatch("codomain of f is not the domain of g")
    return GraphMorphism(
        f.domain,
        g.codomain,
        {a: g.node_map[b] for a, b in f.node_map.items()},
        {e: g.edge_map[x] for e, x in f.edge_map.items()},
    )


def morphism_from_node_map(domain: ColoredGraph, codomain: ColoredGraph,
                           node_map: Mapping[str, str]) -> GraphMorphism:
    """Complete a node map to a morphism when the edge map is forced.

    Each edge must have exactly one candidate image (same color, mapped
    endpoints); otherwise the edge map is ambiguous or absent and
    :class:`NotAMorphism` is raised.
    """
    edge_map = {}
    for eid, e in domain.edges.items():
        s, t = node_map[e.src], node_map[e.dst]
        cands = [f.id for f in codomain.edges.values() if f.src == s and f.dst == t and f.color == e.color]
        if len(cands) != 1:
            raise NotAMorphism(f"edge {eid!r} has {len(cands)} candidate images")
        edge_map[eid] = cands[0]
    return validate_morphism(domain, codomain, node_map, edge_map)


# ---------------------------------------------------------------------------
# input trees


@dataclass(frozen=True, order=True)
class SlotType:
    edge_color: str
    source_color: str

    def __str__(self):
        return f"{self.edge_color}:{self.source_color}"

    @classmethod
    def parse(cls, text: str) -> "SlotType":
        ec, sep, sc = text.partition(":")
        if not sep:
            raise ValueError(f"slot type must look like 'edgecolor:sourcecolor', got {text!r}")
        return cls(ec, sc)


@dataclass(frozen=True)
class InputSignature:
    """Complete isomorphism invariant of a depth-one input tree."""

    root_color: str
    slots: tuple[tuple[SlotType, int], ...]  # sorted, multiplicities > 0

    @property
    def slot_types(self) -> tuple[SlotType, ...]:
        """Slot type of every leaf in canonical slot order."""
        return tuple(t for t, m in self.slots for _ in range(m))

    @property
    def n_slots(self) -> int:
        return sum(m for _, m in self.slots)

    @property
    def aut_order(self) -> int:
        return prod(factorial(m) for _, m in self.slots)

    def blocks(self) -> list[tuple[int, ...]]:
        """Slot index ranges of equal-type slots."""
        out, i = [], 0
        for _, m in self.slots:
            out.append(tuple(range(i, i + m)))
            i += m
        return out

    def __str__(self):
        body = ",".join(f"{t}*{m}" if m > 1 else str(t) for t, m in self.slots)
        return f"{self.root_color}<-[{body}]"

    def to_dict(self) -> dict:
        return {
            "root_color": self.root_color,
            "slots": [{"edge_color": t.edge_color, "source_color": t.source_color, "multiplicity": m}
                      for t, m in self.slots],
        }


@dataclass(frozen=True)
class Leaf:
    edge: str
    edge_color: str
    source: str
    source_color: str

    @property
    def slot_type(self) -> SlotType:
        return SlotType(self.edge_color, self.source_color)


@dataclass(frozen=True)
class InputTree:
    root: str
    root_color: str
    leaves: tuple[Leaf, ...]  # canonical order

    @property
    def signature(self) -> InputSignature:
        counts = Counter(leaf.slot_type for leaf in self.leaves)
        return InputSignature(self.root_color, tuple(sorted(counts.items())))


def input_tree(g: ColoredGraph, a: str) -> InputTree:
    leaves = [
        Leaf(e.id, e.color, e.src, g.node_color[e.src])
        for e in (g.edges[x] for x in g.in_edges(a))
    ]
    leaves.sort(key=lambda l: (l.edge_color, l.source_color, l.source, l.edge))
    return InputTree(a, g.node_color[a], tuple(leaves))


def signature(g: ColoredGraph, a: str) -> InputSignature:
    return input_tree(g, a).signature


def tree_iso(t1: InputTree, t2: InputTree) -> dict[str, str] | None:
    """Leaf bijection (edge id -> edge id) of an isomorphism ``t1 -> t2``, or None.

    Canonical leaf orders agree on slot types whenever the signatures are
    equal, so positional pairing is an isomorphism.
    """
    if t1.signature != t2.signature:
        return None
    return {l1.edge: l2.edge for l1, l2 in zip(t1.leaves, t2.leaves)}


@dataclass(frozen=True)
class TreeAutomorphismGroup:
    blocks: tuple[tuple[SlotType, int], ...]

    @property
    def order(self) -> int:
        return prod(factorial(m) for _, m in self.blocks)


def tree_automorphism_group(t: InputTree) -> TreeAutomorphismGroup:
    """Aut of an input tree: independent permutations of equal-type leaves."""
    return TreeAutomorphismGroup(t.signature.slots)


# ---------------------------------------------------------------------------
# étale certification


@dataclass(frozen=True)
class EtaleResult:
    ok: bool
    witnesses: Mapping[str, Mapping[str, str]] = field(default_factory=dict)
    node: str | None = None
    reason: str | None = None

    def __bool__(self):
        return self.ok


def is_etale(f: GraphMorphism) -> EtaleResult:
    """Check that ``f`` restricts to an isomorphism on every input tree.

    On success the per-node witnesses map each in-edge of ``a`` to its image
    among the in-edges of ``f(a)`` (the leaf bijection of ``f_a``).
    """
    dom, cod = f.domain, f.codomain
    witnesses = {}
    for a in dom.nodes:
        ins = dom.in_edges(a)
        images = [f.edge_map[e] for e in ins]
        if len(set(images)) != len(images):
            return EtaleResult(False, node=a, reason="NotInjectiveOnInEdges")
        if set(images) != set(cod.in_edges(f.node_map[a])):
            return EtaleResult(False, node=a, reason="NotSurjectiveOnInEdges")
        witnesses[a] = dict(zip(ins, images))
    return EtaleResult(True, witnesses=witnesses)


# ---------------------------------------------------------------------------
# files


def load_graph(path: str | Path) -> ColoredGraph:
    with open(path) as fh:
        return validate_colored_graph(json.load(fh))


def dump_graph(g: ColoredGraph, path: str | Path) -> None:
    Path(path).write_text(json.dumps(g.to_dict(), indent=2) + "\n")


def load_morphism(path: str | Path) -> GraphMorphism:
    """Read a morphism file; graph paths are relative to the file itself."""
    path = Path(path)
    with open(path) as fh:
        raw = json.load(fh)
    try:
        dom = load_graph(path.parent / raw["domain"])
        cod = load_graph(path.parent / raw["codomain"])
        if "edge_map" not in raw:
            return morphism_from_node_map(dom, cod, raw["node_map"])
        return validate_morphism(dom, cod, raw["node_map"], raw["edge_map"])
    except KeyError as exc:
        raise MorphismError(f"malformed morphism file {path}: missing {exc}") from exc


def dump_morphism(f: GraphMorphism, path: str | Path, domain_path: str, codomain_path: str) -> None:
    doc = {"domain": domain_path, "codomain": codomain_path, **f.to_dict()}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")
