"""Bundled example graphs, maps and fields.

Names are file stems under ``cellnet/data``: ``graph("feed3")``,
``morphism("feed3_fold")``, ``path("tanh_single.toml")``.

``feed3``         1 <-> 2 -> 3, no symmetry but two synchrony patterns
``double_edge``   two parallel arrows 1 -> 2
``split_pair``    1a -> 2 <- 1b, covering ``double_edge``
``cycle_tail``    six nodes: 3 -> 1 -> 2 -> 3 -> 4 -> 5 -> 6
``cycle3``        a -> b -> c -> a, with ``triangle`` as a relabeled copy
``bicolor``       two node colors, a self-loop color and parallel arrows
"""
from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .graphs import ColoredGraph, GraphMorphism, load_graph, load_morphism

GRAPHS = ("feed3", "loop", "cycle2", "double_edge", "split_pair", "cycle_tail", "cycle3",
          "triangle", "bicolor", "bicolor_quot")
MORPHISMS = ("feed3_loop", "feed3_fold", "cycle2_embed", "split_to_double", "tail_fold", "cycle3_embed",
             "tail_color", "cycle3_color", "bicolor_pi")
# dimensions used when exercising a graph with template fields
DIMS = {"cell": 1, "x": 2, "y": 1}


def data_dir() -> Path:
    return Path(str(resources.files("cellnet") / "data"))


def path(name: str) -> Path:
    p = data_dir() / name
    return p if p.suffix else p.with_suffix(".json")


@lru_cache(maxsize=None)
def graph(name: str) -> ColoredGraph:
    return load_graph(path(name))


@lru_cache(maxsize=None)
def morphism(name: str) -> GraphMorphism:
    return load_morphism(path(name))


def morphism_ends(name: str) -> tuple[str, str]:
    raw = json.loads(path(name).read_text())
    return Path(raw["domain"]).stem, Path(raw["codomain"]).stem


def dims_for(g: ColoredGraph) -> dict[str, int]:
    return {c: DIMS.get(c, 1) for c in g.colors.node_colors}
