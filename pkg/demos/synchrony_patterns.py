"""Which synchrony patterns does a three-cell network support?

Cells 1 and 2 drive each other and cell 2 also drives cell 3.  Every
balanced partition gives a subspace that any admissible dynamics leaves
invariant; an unbalanced one does not.
"""
import numpy as np

from cellnet import corpus
from cellnet.balanced import Partition, enumerate_balanced, is_balanced, quotient
from cellnet.dynamics import load_field, pullback_field, realize
from cellnet.phase import apply, pushforward
from cellnet.sim import integrate_rk4

g = corpus.graph("feed3")
print("balanced partitions of", g.nodes)
for p in enumerate_balanced(g):
    q = quotient(g, p).quotient
    print(f"  {[list(b) for b in p.blocks]!s:28} quotient has {len(q.nodes)} cells, {len(q.edges)} arrows")

bad = Partition.of([["2", "3"], ["1"]])
print("is {2,3}|{1} balanced?", bool(is_balanced(g, bad)), "offending:", is_balanced(g, bad).offending)

# a field on the two-cell quotient pulls back to the three-cell network
psi = corpus.morphism("feed3_fold")
w2 = load_field(corpus.path("tanh_single.toml"), psi.codomain)
w3 = pullback_field(psi, w2)
X3 = realize(w3)

# start on x1 = x3 and the cells stay together
start = apply(pushforward(psi, w2.phase), np.array([0.8, -0.5]))
traj = integrate_rk4(X3, start, 1e-2, 1000)
print("start on x1 = x3:  max |x1 - x3| over t in [0, 10] =", np.abs(traj.states[:, 0] - traj.states[:, 2]).max())

# x2 = x3 is not invariant
traj = integrate_rk4(X3, [0.8, -0.5, -0.5], 1e-2, 1000)
print("start on x2 = x3:  max |x2 - x3| over t in [0, 10] =", np.abs(traj.states[:, 1] - traj.states[:, 2]).max())
