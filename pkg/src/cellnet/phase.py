"""Phase spaces of node sets and the linear maps induced by maps of node sets.

The phase space of a colored set is the product of one Euclidean factor per
element, sized by its color.  A map ``f: Y -> X`` over the colors induces a
linear map in the opposite direction, ``Px -> Py``, that copies the block of
``f(y)`` into the slot of ``y``.  It is a gather, so it is stored as an index
map and only densified on request.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .graphs import ColoredGraph, GraphMorphism


class PhaseError(ValueError):
    pass


class MissingColorDim(PhaseError):
    pass


class ColorMismatch(PhaseError):
    pass


class DimensionMismatch(PhaseError):
    pass


@dataclass(frozen=True)
class PhaseAssignment:
    dims: Mapping[str, int]

    def __post_init__(self):
        for c, d in self.dims.items():
            if int(d) != d or d < 1:
                raise PhaseError(f"dimension of color {c!r} must be a positive integer, got {d!r}")

    def __getitem__(self, color: str) -> int:
        try:
            return int(self.dims[color])
        except KeyError:
            raise MissingColorDim(f"no dimension given for node color {color!r}") from None


@dataclass(frozen=True)
class SpaceLayout:
    nodes: tuple[str, ...]
    colors: Mapping[str, str]
    offsets: Mapping[str, tuple[int, int]]   # node -> (start, length)
    total_dim: int

    def slice(self, a: str) -> slice:
        s, n = self.offsets[a]
        return slice(s, s + n)

    def indices(self, a: str) -> np.ndarray:
        s, n = self.offsets[a]
        return np.arange(s, s + n)

    def block(self, x: np.ndarray, a: str) -> np.ndarray:
        return x[..., self.slice(a)]

    def labels(self) -> list[str]:
        """Column names ``<node>_<component>`` in layout order."""
        return [f"{a}_{j}" for a in self.nodes for j in range(self.offsets[a][1])]


def layout(nodes: Mapping[str, str] | ColoredGraph, pa: PhaseAssignment) -> SpaceLayout:
    """Contiguous layout of the phase space; ``nodes`` maps node id to color."""
    colors = dict(nodes.node_color) if isinstance(nodes, ColoredGraph) else dict(nodes)
    order = tuple(sorted(colors))
    offsets, pos = {}, 0
    for a in order:
        d = pa[colors[a]]
        offsets[a] = (pos, d)
        pos += d
    return SpaceLayout(order, colors, offsets, pos)


@dataclass(frozen=True)
class IndexedLinearMap:
    """Linear map ``domain -> codomain`` whose block at ``y`` is the domain block at ``assignment[y]``."""

    domain: SpaceLayout
    codomain: SpaceLayout
    assignment: Mapping[str, str]
    index: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        idx = np.empty(self.codomain.total_dim, dtype=np.intp)
        for y in self.codomain.nodes:
            x = self.assignment[y]
            if self.domain.offsets[x][1] != self.codomain.offsets[y][1]:
                raise DimensionMismatch(f"block sizes differ for {y!r} <- {x!r}")
            idx[self.codomain.slice(y)] = self.domain.indices(x)
        idx.setflags(write=False)
        object.__setattr__(self, "index", idx)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return apply(self, x)


def pushforward(f: Mapping[str, str] | GraphMorphism, pa: PhaseAssignment,
                domain_colors: Mapping[str, str] | None = None,
                codomain_colors: Mapping[str, str] | None = None) -> IndexedLinearMap:
    """Linear map induced by a node map ``f: Y -> X``, going from ``PX`` to ``PY``.

    For a graph morphism ``phi: G -> G'`` this is the map from the phase space
    of ``G'`` to that of ``G``.
    """
    if isinstance(f, GraphMorphism):
        fmap = dict(f.node_map)
        ycol, xcol = dict(f.domain.node_color), dict(f.codomain.node_color)
    else:
        if domain_colors is None or codomain_colors is None:
            raise PhaseError("plain node maps need the colors of both sides")
        fmap, ycol, xcol = dict(f), dict(domain_colors), dict(codomain_colors)
    for y, x in fmap.items():
        if ycol[y] != xcol[x]:
            raise ColorMismatch(f"{y!r} ({ycol[y]}) -> {x!r} ({xcol[x]}) changes color")
    return IndexedLinearMap(layout(xcol, pa), layout(ycol, pa), fmap)


def apply(m: IndexedLinearMap, x: np.ndarray) -> np.ndarray:
    """Apply to a vector or to a stack of vectors along the last axis."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != m.domain.total_dim:
        raise DimensionMismatch(f"expected length {m.domain.total_dim}, got {x.shape[-1]}")
    return x[..., m.index]


def materialize(m: IndexedLinearMap) -> np.ndarray:
    M = np.zeros((m.codomain.total_dim, m.domain.total_dim))
    M[np.arange(m.codomain.total_dim), m.index] = 1.0
    return M


def compose_maps(second: IndexedLinearMap, first: IndexedLinearMap) -> IndexedLinearMap:
    """``second ∘ first`` as an index map."""
    if first.codomain.offsets != second.domain.offsets:
        raise DimensionMismatch("layouts do not chain")
    return IndexedLinearMap(first.domain, second.codomain,
                            {y: first.assignment[second.assignment[y]] for y in second.codomain.nodes})

