"""Synchrony and symmetry tools for coupled cell networks on colored graphs."""
from .graphs import (
    ColorGraph,
    ColoredGraph,
    EdgeColor,
    GraphMorphism,
    InputSignature,
    SlotType,
    colored_graph,
    compose,
    identity,
    input_tree,
    is_etale,
    load_graph,
    load_morphism,
    mono_graph,
    signature,
    validate_morphism,
)
from .groupoid import graph_automorphisms, induced_class_map, is_essentially_surjective, skeleton
from .balanced import Partition, coarsest_balanced, enumerate_balanced, is_balanced, quotient
from .phase import PhaseAssignment, apply, layout, materialize, pushforward
from .exprlang import bind, parse, to_source
from .dynamics import (
    check_group_invariance,
    check_ode_equivalence,
    check_related,
    load_field,
    pullback_field,
    realize,
    symmetrize,
    validate_symmetry,
    virtual_field,
)
from .linear import assemble_matrix, eigenvalues, linear_field, spectrum_inclusion, verify_intertwine
from .sim import flow_sync_check, integrate_rk4

__version__ = "0.1.0"
