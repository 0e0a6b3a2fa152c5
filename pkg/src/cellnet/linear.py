"""Linear control modules, assembled system matrices and their spectra.

A linear module for a signature is a matrix ``root_dim x sum(slot dims)``.
It is invariant under swapping equal-type slots exactly when the column
blocks of equal-type slots coincide, so a linear field is fixed by one block
per slot type and class.  Assembly scatters the blocks into the columns of the
source nodes; parallel edges from one source add up.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.optimize import linear_sum_assignment

from .exprlang import Add, BoundModule, Expr, Mul, Num, Var, module_from_exprs
from .graphs import ColoredGraph, GraphMorphism, InputSignature, SlotType, input_tree
from .groupoid import Skeleton, skeleton
from .phase import PhaseAssignment, layout, materialize, pushforward


class LinearError(ValueError):
    pass


class BlockShapeMismatch(LinearError):
    pass


class AsymmetricBlocks(LinearError):
    pass


class ShapeMismatch(LinearError):
    pass


class NotInjectivePushforward(LinearError):
    pass


@dataclass(frozen=True, eq=False)
class LinearModule:
    signature: InputSignature
    matrix: np.ndarray            # root_dim x sum(slot dims)
    slot_dims: tuple[int, ...]

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[1] != sum(self.slot_dims):
            raise BlockShapeMismatch(f"matrix of shape {m.shape} does not fit slot dims {self.slot_dims}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        for b in self.signature.blocks():
            first = self.slot_block(b[0]) if b else None
            for i in b[1:]:
                if not np.array_equal(self.slot_block(i), first):
                    raise AsymmetricBlocks(f"slots {b[0]} and {i} share a type but have different blocks")

    @property
    def offsets(self) -> list[int]:
        return [sum(self.slot_dims[:i]) for i in range(len(self.slot_dims) + 1)]

    def slot_block(self, i: int) -> np.ndarray:
        o = self.offsets
        return self.matrix[:, o[i]:o[i + 1]]

    def type_block(self, t: SlotType) -> np.ndarray:
        return self.slot_block(self.signature.slot_types.index(t))

    @classmethod
    def from_type_blocks(cls, signature: InputSignature, blocks: Mapping[SlotType | str, object],
                         dims: PhaseAssignment) -> "LinearModule":
        root = dims[signature.root_color]
        blk = {SlotType.parse(k) if isinstance(k, str) else k: np.asarray(v, dtype=float)
               for k, v in blocks.items()}
        cols, sd = [], []
        for t in signature.slot_types:
            if t not in blk:
                raise BlockShapeMismatch(f"no block for slot type {t}")
            b = np.atleast_2d(blk[t])
            want = (root, dims[t.source_color])
            if b.shape != want:
                raise BlockShapeMismatch(f"block for {t} has shape {b.shape}, expected {want}")
            cols.append(b)
            sd.append(want[1])
        mat = np.hstack(cols) if cols else np.zeros((root, 0))
        return cls(signature, mat, tuple(sd))

    def to_bound(self) -> BoundModule:
        """The same map written as expressions, for use with the nonlinear machinery."""
        o = self.offsets
        exprs = []
        for r in range(self.matrix.shape[0]):
            acc: Expr | None = None
            for i, d in enumerate(self.slot_dims):
                for j in range(d):
                    c = float(self.matrix[r, o[i] + j])
                    if c == 0.0:
                        continue
                    term = Mul(Num(c), Var(i, j))
                    acc = term if acc is None else Add(acc, term)
            exprs.append(acc if acc is not None else Num(0.0))
        return module_from_exprs(self.signature, self.matrix.shape[0], self.slot_dims, exprs)


@dataclass(frozen=True, eq=False)
class LinearField:
    graph: ColoredGraph
    skeleton: Skeleton
    assignment: Mapping[str, LinearModule]
    phase: PhaseAssignment

    def to_virtual(self):
        from .dynamics import virtual_field
        return virtual_field(self.graph, {cid: m.to_bound() for cid, m in self.assignment.items()},
                             self.phase, check=False, sk=self.skeleton)


def linear_field(g: ColoredGraph, blocks: Mapping[str, Mapping[str, object]] | None,
                 dims: PhaseAssignment | Mapping[str, int],
                 shared: Mapping[str, object] | None = None) -> LinearField:
    """Linear field from per-class type blocks (keys: class id or signature).

    ``shared`` gives blocks by slot type used for any class without its own.
    """
    pa = dims if isinstance(dims, PhaseAssignment) else PhaseAssignment(dict(dims))
    sk = skeleton(g)
    per_class: dict[str, Mapping] = {}
    for key, b in (blocks or {}).items():
        c = next((c for c in sk.classes if key in (c.id, str(c.signature))), None)
        if c is None:
            raise LinearError(f"no class with id or signature {key!r}")
        per_class[c.id] = b
    assignment = {}
    for c in sk.classes:
        b = per_class.get(c.id, shared or {})
        assignment[c.id] = LinearModule.from_type_blocks(c.signature, b, pa)
    return LinearField(g, sk, assignment, pa)


def linear_field_from_dict(g: ColoredGraph, raw: Mapping) -> LinearField:
    mods = {k: v["blocks"] for k, v in raw.get("modules", {}).items()}
    return linear_field(g, mods, raw["dims"], raw.get("blocks"))


def is_linear_description(raw: Mapping) -> bool:
    if "blocks" in raw:
        return True
    mods = raw.get("modules", {})
    return bool(mods) and all(isinstance(v, Mapping) and "blocks" in v for v in mods.values())


def pullback_linear(phi: GraphMorphism, lf: LinearField) -> LinearField:
    """Pullback of a linear field: the block of each slot type carries over unchanged."""
    from .groupoid import induced_class_map
    cm = induced_class_map(phi, dst=lf.skeleton)
    out = {}
    for c in cm.source.classes:
        m = lf.assignment[cm.mapping[c.id]]
        # equal signatures and equal-type blocks make the re-binding the identity on matrices
        out[c.id] = LinearModule(c.signature, m.matrix, m.slot_dims)
    return LinearField(phi.domain, cm.source, out, lf.phase)


def _fsum_blocks(terms: list[np.ndarray]) -> np.ndarray:
    stack = np.stack(terms)
    out = np.empty(stack.shape[1:])
    for idx in np.ndindex(*out.shape):
        out[idx] = math.fsum(stack[(slice(None),) + idx])
    return out


def assemble_matrix(lf: LinearField) -> np.ndarray:
    """Exact system matrix: entries are correctly rounded sums of block entries."""
    g, lay = lf.graph, layout(lf.graph, lf.phase)
    A = np.zeros((lay.total_dim, lay.total_dim))
    for c in lf.skeleton.classes:
        m = lf.assignment[c.id]
        for a in c.members:
            terms: dict[str, list[np.ndarray]] = {}
            for i, leaf in enumerate(input_tree(g, a).leaves):
                terms.setdefault(leaf.source, []).append(m.slot_block(i))
            for src, ts in terms.items():
                A[lay.slice(a), lay.slice(src)] = ts[0] if len(ts) == 1 else _fsum_blocks(ts)
    return A


def _gather_cols_fsum(A: np.ndarray, index: np.ndarray, ncols: int) -> np.ndarray:
    """``A @ P`` for the 0/1 gather matrix ``P`` with ``P[k, index[k]] = 1``, summed with fsum."""
    out = np.zeros((A.shape[0], ncols))
    for y in range(ncols):
        cols = np.flatnonzero(index == y)
        if len(cols) == 1:
            out[:, y] = A[:, cols[0]]
        elif len(cols) > 1:
            out[:, y] = [math.fsum(row) for row in A[:, cols]]
    return out


@dataclass(frozen=True)
class IntertwineReport:
    ok: bool
    max_abs_diff: float
    mismatches: int

    def __bool__(self):
        return self.ok


def verify_intertwine(phi: GraphMorphism, A_cod: np.ndarray, A_dom: np.ndarray,
                      dims: PhaseAssignment) -> IntertwineReport:
    """Entry-exact test of ``Pphi @ A_cod == A_dom @ Pphi``."""
    P = pushforward(phi, dims)
    n_cod, n_dom = P.domain.total_dim, P.codomain.total_dim
    if A_cod.shape != (n_cod, n_cod) or A_dom.shape != (n_dom, n_dom):
        raise ShapeMismatch(f"expected {n_cod}x{n_cod} and {n_dom}x{n_dom}, "
                            f"got {A_cod.shape} and {A_dom.shape}")
    left = A_cod[P.index, :]
    right = _gather_cols_fsum(A_dom, P.index, n_cod)
    diff = left != right
    return IntertwineReport(not diff.any(), float(np.abs(left - right).max(initial=0.0)), int(diff.sum()))


def eigenvalues(A: np.ndarray) -> np.ndarray:
    """Eigenvalues (LAPACK dense nonsymmetric solver) sorted by real then imaginary part."""
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return np.zeros(0, dtype=complex)
    ev = np.linalg.eigvals(A).astype(complex)
    order = np.lexsort((ev.imag, ev.real))
    return ev[order]


@dataclass(frozen=True)
class InclusionReport:
    ok: bool
    max_distance: float
    pairs: list[tuple[complex, complex]]

    def __bool__(self):
        return self.ok


def match_spectra(small: np.ndarray, big: np.ndarray, tol: float = 1e-8) -> InclusionReport:
    """Match every eigenvalue of ``small`` to a distinct one of ``big``."""
    if len(small) == 0:
        return InclusionReport(True, 0.0, [])
    if len(small) > len(big):
        return InclusionReport(False, math.inf, [])
    cost = np.abs(small[:, None] - big[None, :])
    r, c = linear_sum_assignment(cost)
    d = float(cost[r, c].max())
    return InclusionReport(d <= tol, d, [(complex(small[i]), complex(big[j])) for i, j in zip(r, c)])


def spectrum_inclusion(phi: GraphMorphism, A_cod: np.ndarray, A_dom: np.ndarray,
                       tol: float = 1e-8) -> InclusionReport:
    """spec(A_cod) inside spec(A_dom), with multiplicity, for node-surjective ``phi``."""
    if set(phi.node_map.values()) != set(phi.codomain.nodes):
        raise NotInjectivePushforward("the map misses codomain nodes, so its gather map is not injective")
    return match_spectra(eigenvalues(A_cod), eigenvalues(A_dom), tol)


def pushforward_matrix(phi: GraphMorphism, dims: PhaseAssignment) -> np.ndarray:
    return materialize(pushforward(phi, dims))
