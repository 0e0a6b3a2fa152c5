"""A three-cycle with a three-cell tail hanging off it.

Folding the tail back onto the cycle is étale, so the six-cell linear
system carries the three-cell one inside it: the cube roots of the
coupling show up in the larger spectrum, and trajectories started on the
diagonal {x1 = x4, x2 = x5, x3 = x6} stay there.
"""
import numpy as np

from cellnet import corpus
from cellnet.dynamics import check_related, load_field
from cellnet.linear import assemble_matrix, eigenvalues, linear_field, pullback_linear, spectrum_inclusion
from cellnet.sim import flow_sync_check

r = corpus.morphism("tail_fold")
big, small = r.domain, r.codomain

lf = linear_field(small, None, {"cell": 1}, shared={"arrow:cell": [[0.9]]})
A_small = assemble_matrix(lf)
A_big = assemble_matrix(pullback_linear(r, lf))
np.set_printoptions(precision=4, suppress=True)
print("three-cycle matrix\n", A_small)
print("six-cell matrix\n", A_big)
print("eigenvalues, 3 cells:", eigenvalues(A_small))
print("eigenvalues, 6 cells:", eigenvalues(A_big))
rep = spectrum_inclusion(r, A_small, A_big)
print("small spectrum inside large one:", bool(rep), f"(distance {rep.max_distance:.2g})")

w = load_field(corpus.path("tanh_single.toml"), small)
print("pointwise relatedness defect:", check_related(r, w).max_defect)
rep = flow_sync_check(r, w, [0.9, -0.3, 0.2], 1e-3, 10_000)
print("flow defect over t in [0, 10]:", rep.max_flow_defect)
