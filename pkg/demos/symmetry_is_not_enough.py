"""Symmetry alone allows more dynamics than the network does.

On a directed triangle the rotation group acts, and every field built from
the network's input structure commutes with it.  The converse fails: a
rotation-equivariant field may let cell 1 read all three cells, which no
network field does.
"""
import numpy as np

from cellnet import corpus
from cellnet.dynamics import check_group_invariance, realizability_witness, realize, template_field
from cellnet.groupoid import graph_automorphisms, skeleton
from cellnet.phase import PhaseAssignment

g = corpus.graph("triangle")
dims = PhaseAssignment({"cell": 1})
print("automorphisms:", graph_automorphisms(g).order)
print("input-tree classes:", [str(c.signature) for c in skeleton(g).classes])

w = template_field(g, "tanh", dims)
print("network field is equivariant:", bool(check_group_invariance(g, w)))


def rotating(x):
    a, b, c = x[..., 0], x[..., 1], x[..., 2]

    def h(p, q, s):
        return p * q + s ** 2 - np.sin(p)
    return np.stack([h(a, b, c), h(b, c, a), h(c, a, b)], axis=-1)


print("three-argument field is equivariant:", bool(check_group_invariance(g, rotating, dims=dims)))
wit = realizability_witness(g, rotating, dims)
print(f"but cell {wit.node} moves by {wit.change:.3f} when only its non-inputs change,")
print("so it is not the realization of any network field")
print("network field passes the same probe:", bool(realizability_witness(g, realize(w), dims)))
