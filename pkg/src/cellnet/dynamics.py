"""Groupoid-invariant vector fields on colored graphs.

A virtual field assigns one control module to each skeleton class.  The
realization map turns it into an actual vector field on the product phase
space: the block of node ``a`` is the module of its class evaluated on the
states of the sources of ``a``'s in-edges, taken in canonical leaf order.

An étale map ``phi: G -> G'`` pulls virtual fields on ``G'`` back to ``G``,
and the gather map ``Pphi`` then sends trajectories of the realized field on
``G'`` to trajectories on ``G``.  The checks here verify that numerically.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import permutations, product
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .exprlang import (
    Add,
    BoundModule,
    Div,
    Expr,
    Num,
    bind,
    module_from_exprs,
    permute_slots,
    zero_module,
)
from .graphs import ColoredGraph, GraphMorphism, input_tree
from .groupoid import (
    ClassMap,
    Skeleton,
    graph_automorphisms,
    induced_class_map,
    is_essentially_surjective,
    skeleton,
)
from .phase import PhaseAssignment, SpaceLayout, apply, layout, pushforward

try:  # Python 3.11+
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib


class FieldError(ValueError):
    pass


class PhaseMismatch(FieldError):
    pass


class NotSymmetric(FieldError):
    pass


class GroupTooLarge(FieldError):
    pass


class NotEssentiallySurjective(FieldError):
    pass


# ---------------------------------------------------------------------------
# symmetry of a single module


def _slot_generators(m: BoundModule) -> list[tuple[int, int]]:
    """Adjacent transpositions inside each block of equal-type slots."""
    return [(b[k], b[k + 1]) for b in m.signature.blocks() for k in range(len(b) - 1)]


def _sample_slots(m: BoundModule, n: int, rng: np.random.Generator) -> list[np.ndarray]:
    return [rng.uniform(-1.0, 1.0, size=(n, d)) for d in m.slot_dims]


@dataclass(frozen=True)
class SymmetryReport:
    ok: bool
    max_deviation: float
    witness: dict | None = None

    def __bool__(self):
        return self.ok


def validate_symmetry(m: BoundModule, samples: int = 64, tol: float = 1e-9,
                      seed: int = 42) -> SymmetryReport:
    """Sampled check that ``m`` is invariant under swapping equal-type slots."""
    gens = _slot_generators(m)
    if not gens:
        return SymmetryReport(True, 0.0)
    rng = np.random.default_rng(seed)
    slots = _sample_slots(m, samples, rng)
    base = m(slots)
    worst, witness = 0.0, None
    for i, j in gens:
        swapped = list(slots)
        swapped[i], swapped[j] = slots[j], slots[i]
        dev = np.abs(m(swapped) - base).max(axis=-1)
        dev = np.where(np.isnan(dev), np.inf, dev)
        k = int(np.argmax(dev))
        if dev[k] > worst:
            worst = float(dev[k])
            witness = {"swap": [i, j], "point": [s[k].tolist() for s in slots]}
    ok = worst <= tol
    return SymmetryReport(ok, worst, None if ok else witness)


def _slot_group(m: BoundModule) -> list[tuple[int, ...]]:
    """All permutations of slot indices that only shuffle equal-type slots."""
    blocks = m.signature.blocks()
    perms = []
    for choice in product(*(permutations(b) for b in blocks)):
        perms.append(tuple(i for part in choice for i in part))
    return perms


def symmetrize(m: BoundModule, expand: bool | None = None, max_expand: int = 24) -> BoundModule:
    """Average ``m`` over every permutation of equal-type slots.

    The result is an explicit expression sum when the group has at most
    ``max_expand`` elements (or ``expand`` forces it), otherwise an evaluator
    that averages on the fly.
    """
    order = m.signature.aut_order
    if order == 1:
        return m
    if expand is None:
        expand = order <= max_expand and m.exprs is not None
    if expand and (order > max_expand or m.exprs is None):
        raise GroupTooLarge(f"cannot expand an average over {order} permutations")
    group = _slot_group(m)
    if expand:
        terms = [permute_slots(m, p).exprs for p in group]
        exprs = []
        for r in range(m.root_dim):
            acc: Expr = terms[0][r]
            for t in terms[1:]:
                acc = Add(acc, t[r])
            exprs.append(Div(acc, Num(float(order))))
        return module_from_exprs(m.signature, m.root_dim, m.slot_dims, exprs)

    inner = m.fn

    def fn(slots, batch_shape):
        total = 0.0
        for p in group:
            total = total + inner([slots[i] for i in p], batch_shape)
        return total / order
    return BoundModule(m.signature, m.root_dim, m.slot_dims, None, fn, f"symmetrized({m.label or 'module'})")


# ---------------------------------------------------------------------------
# virtual fields


@dataclass(frozen=True, eq=False)
class VirtualField:
    graph: ColoredGraph
    skeleton: Skeleton
    assignment: Mapping[str, BoundModule]
    phase: PhaseAssignment

    def module_of(self, a: str) -> BoundModule:
        return self.assignment[self.skeleton.class_of(a).id]


def virtual_field(g: ColoredGraph, modules: Mapping[str, object], dims: PhaseAssignment | Mapping[str, int],
                  check: bool = True, samples: int = 64, tol: float = 1e-9, seed: int = 42,
                  sk: Skeleton | None = None) -> VirtualField:
    """Bind one module per skeleton class.

    Keys of ``modules`` are class ids (``c0``, ...) or printed signatures.
    Values are module specs accepted by :func:`bind` or ready
    :class:`BoundModule` objects.  Leafless classes may be omitted.  With
    ``check`` every module must pass :func:`validate_symmetry`.
    """
    pa = dims if isinstance(dims, PhaseAssignment) else PhaseAssignment(dict(dims))
    sk = sk or skeleton(g)
    by_key = {}
    for c in sk.classes:
        by_key[c.id] = c
        by_key[str(c.signature)] = c
    assignment: dict[str, BoundModule] = {}
    for key, spec in modules.items():
        if key not in by_key:
            raise FieldError(f"no class with id or signature {key!r}; classes are "
                             + ", ".join(f"{c.id}={c.signature}" for c in sk.classes))
        c = by_key[key]
        if c.id in assignment:
            raise FieldError(f"class {c.id} is given two modules")
        if isinstance(spec, BoundModule):
            if spec.signature != c.signature:
                raise FieldError(f"module for {c.id} was bound to {spec.signature}, not {c.signature}")
            m = spec
        else:
            m = bind(spec, c.signature, pa)
        assignment[c.id] = m
    for c in sk.classes:
        if c.id not in assignment:
            assignment[c.id] = bind(None, c.signature, pa)
        if check:
            rep = validate_symmetry(assignment[c.id], samples, tol, seed)
            if not rep:
                raise NotSymmetric(f"module of class {c.id} ({c.signature}) is not invariant "
                                   f"under equal-slot swaps (deviation {rep.max_deviation:.3g})")
    return VirtualField(g, sk, assignment, pa)


# ---------------------------------------------------------------------------
# realization


@dataclass(frozen=True)
class _ClassPlan:
    module: BoundModule
    members: tuple[str, ...]
    gathers: tuple[np.ndarray, ...]   # per slot: (members, slot dim) indices into x
    scatter: np.ndarray               # (members, root dim) indices into the output


@dataclass(frozen=True, eq=False)
class AssembledField:
    """The realized vector field, evaluated by per-class gathers and scatters."""

    layout: SpaceLayout
    component_plans: Mapping[str, tuple[str, tuple[str, ...]]]   # node -> (class id, sources)
    _plans: tuple[_ClassPlan, ...] = field(repr=False)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for p in self._plans:
            slots = [x[..., idx] for idx in p.gathers]
            vals = p.module(slots, x.shape[:-1] + (len(p.members),))
            out[..., p.scatter] = vals
        return out

    @property
    def dim(self) -> int:
        return self.layout.total_dim


def realize(w: VirtualField) -> AssembledField:
    g, lay = w.graph, layout(w.graph, w.phase)
    plans, comp = [], {}
    for c in w.skeleton.classes:
        m = w.assignment[c.id]
        sources = {a: tuple(leaf.source for leaf in input_tree(g, a).leaves) for a in c.members}
        for a in c.members:
            comp[a] = (c.id, sources[a])
        if c.leafless:
            continue   # zero block
        gathers = tuple(
            np.array([lay.indices(sources[a][i]) for a in c.members], dtype=np.intp)
            for i in range(c.signature.n_slots)
        )
        scatter = np.array([lay.indices(a) for a in c.members], dtype=np.intp)
        plans.append(_ClassPlan(m, c.members, gathers, scatter))
    return AssembledField(lay, comp, tuple(plans))


# ---------------------------------------------------------------------------
# pullback along étale maps


def slot_permutation(phi: GraphMorphism, a: str) -> tuple[int, ...]:
    """``pi[i]``: position of the image of ``a``'s i-th canonical leaf among ``phi(a)``'s leaves."""
    mine = input_tree(phi.domain, a).leaves
    theirs = [leaf.edge for leaf in input_tree(phi.codomain, phi.node_map[a]).leaves]
    return tuple(theirs.index(phi.edge_map[leaf.edge]) for leaf in mine)


def _inverse(p: Sequence[int]) -> tuple[int, ...]:
    inv = [0] * len(p)
    for i, k in enumerate(p):
        inv[k] = i
    return tuple(inv)


def _check_phase(phi: GraphMorphism, w: VirtualField) -> None:
    if w.graph != phi.codomain:
        raise PhaseMismatch("field is not defined on the codomain of the map")


def pullback_field(phi: GraphMorphism, w: VirtualField, cm: ClassMap | None = None) -> VirtualField:
    """Virtual field on the domain of an étale map induced by one on its codomain."""
    _check_phase(phi, w)
    cm = cm or induced_class_map(phi, dst=w.skeleton)
    assignment = {}
    for c in cm.source.classes:
        m = w.assignment[cm.mapping[c.id]]
        if c.leafless:
            assignment[c.id] = zero_module(c.signature, w.phase)
            continue
        pi = slot_permutation(phi, c.representative)
        assignment[c.id] = permute_slots(m, _inverse(pi))
    return VirtualField(phi.domain, cm.source, assignment, w.phase)


def pushforward_field(phi: GraphMorphism, w: VirtualField, cm: ClassMap | None = None) -> VirtualField:
    """Inverse of :func:`pullback_field` when the class map is essentially surjective."""
    if w.graph != phi.domain:
        raise PhaseMismatch("field is not defined on the domain of the map")
    cm = cm or induced_class_map(phi, src=w.skeleton)
    if not is_essentially_surjective(cm):
        raise NotEssentiallySurjective("some class of the codomain is not hit")
    preimage = {t: s for s, t in cm.mapping.items()}
    assignment = {}
    for c in cm.target.classes:
        src = cm.source.by_id(preimage[c.id])
        m = w.assignment[src.id]
        if c.leafless:
            assignment[c.id] = zero_module(c.signature, w.phase)
            continue
        assignment[c.id] = permute_slots(m, slot_permutation(phi, src.representative))
    return VirtualField(phi.codomain, cm.target, assignment, w.phase)


# ---------------------------------------------------------------------------
# numerical certificates


@dataclass(frozen=True)
class DefectReport:
    ok: bool
    max_defect: float
    tol: float
    samples: int
    seed: int
    witness: list[float] | None = None
    details: dict = field(default_factory=dict)

    def __bool__(self):
        return self.ok

    def to_dict(self) -> dict:
        return {"pass": self.ok, "max_defect": self.max_defect, "tol": self.tol,
                "samples": self.samples, "seed": self.seed, "witness": self.witness, **self.details}


def _max_defect(a: np.ndarray, b: np.ndarray) -> tuple[float, int]:
    if a.size == 0:
        return 0.0, 0
    d = np.abs(a - b)
    d = np.where(np.isnan(d) & ~(np.isnan(a) & np.isnan(b)), np.inf, np.nan_to_num(d, nan=0.0))
    per = d.max(axis=-1)
    k = int(np.argmax(per))
    return float(per[k]), k


def check_related(phi: GraphMorphism, w: VirtualField, samples: int = 64, tol: float = 1e-10,
                  seed: int = 42) -> DefectReport:
    """Max over random ``x`` of ``|Pphi(X'(x)) - X(Pphi x)|`` with ``X = S(pullback w)``."""
    _check_phase(phi, w)
    X_cod = realize(w)
    X_dom = realize(pullback_field(phi, w))
    P = pushforward(phi, w.phase)
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, size=(samples, X_cod.dim))
    lhs = apply(P, X_cod(x))
    rhs = X_dom(apply(P, x))
    worst, k = _max_defect(lhs, rhs)
    return DefectReport(worst <= tol, worst, tol, samples, seed, None if worst <= tol else x[k].tolist())


def check_group_invariance(g: ColoredGraph, w: VirtualField | Callable[[np.ndarray], np.ndarray],
                           samples: int = 64, tol: float = 1e-10, seed: int = 42,
                           dims: PhaseAssignment | None = None, max_nodes: int = 12) -> DefectReport:
    """Check ``Ph(X(x)) == X(Ph x)`` for every automorphism ``h`` of ``g``.

    ``w`` is a virtual field or any callable vector field on the phase space
    of ``g`` (then ``dims`` is required).
    """
    if isinstance(w, VirtualField):
        X, pa = realize(w), w.phase
    else:
        if dims is None:
            raise FieldError("a callable field needs explicit dims")
        X, pa = w, dims
    group = graph_automorphisms(g, max_nodes)
    n = layout(g, pa).total_dim
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, size=(samples, n))
    fx = X(x)
    worst, wit = 0.0, None
    for h in group:
        P = pushforward(h, pa)
        d, k = _max_defect(apply(P, fx), X(apply(P, x)))
        if d > worst:
            worst, wit = d, {"point": x[k].tolist(), "automorphism": dict(h.node_map)}
    ok = worst <= tol
    return DefectReport(ok, worst, tol, samples, seed, None if ok else wit["point"],
                        {"group_order": group.order})


@dataclass(frozen=True)
class RealizabilityReport:
    """``realizable`` is False when a node's block provably depends on a non-input."""

    realizable: bool
    node: str | None = None
    point: list[float] | None = None
    perturbed: list[float] | None = None
    change: float = 0.0

    def __bool__(self):
        return self.realizable


def realizability_witness(g: ColoredGraph, F: Callable[[np.ndarray], np.ndarray],
                          dims: PhaseAssignment, samples: int = 64, tol: float = 1e-10,
                          seed: int = 42) -> RealizabilityReport:
    """Look for evidence that ``F`` is not of the form ``S(w)`` for any virtual field.

    Every realized field has block ``a`` depending only on the states of the
    sources of ``a``'s in-edges.  Resampling all other coordinates and seeing
    block ``a`` move is a witness that ``F`` lies outside the image.  Passing
    this test is necessary, not sufficient.
    """
    lay = layout(g, dims)
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, size=(samples, lay.total_dim))
    y = rng.uniform(-1.0, 1.0, size=(samples, lay.total_dim))
    fx = F(x)
    for a in lay.nodes:
        keep = np.zeros(lay.total_dim, dtype=bool)
        for leaf in input_tree(g, a).leaves:
            keep[lay.slice(leaf.source)] = True
        x2 = np.where(keep, x, y)
        diff = np.abs(F(x2)[..., lay.slice(a)] - fx[..., lay.slice(a)]).max(axis=-1)
        k = int(np.argmax(diff))
        if diff[k] > tol:
            return RealizabilityReport(False, a, x[k].tolist(), x2[k].tolist(), float(diff[k]))
    return RealizabilityReport(True)


@dataclass(frozen=True)
class EquivalenceReport:
    ok: bool
    class_map: Mapping[str, str]
    bijective: bool
    roundtrip_codomain: bool
    roundtrip_domain: bool

    def __bool__(self):
        return self.ok


def _same_assignment(u: VirtualField, v: VirtualField) -> bool:
    for cid, m in u.assignment.items():
        n = v.assignment[cid]
        if m.exprs is None or n.exprs is None or m.exprs != n.exprs or m.slot_dims != n.slot_dims:
            return False
    return set(u.assignment) == set(v.assignment)


def check_ode_equivalence(phi: GraphMorphism, w: VirtualField,
                          w_domain: VirtualField | None = None) -> EquivalenceReport:
    """Structural check that pullback along ``phi`` is a bijection of virtual fields.

    ``w`` lives on the codomain; ``w_domain`` (default: the pullback of ``w``)
    on the domain.  Both round trips through pullback and pushforward must
    return the same expressions exactly.
    """
    cm = induced_class_map(phi, dst=w.skeleton)
    if not is_essentially_surjective(cm):
        raise NotEssentiallySurjective("the induced class map misses a class of the codomain")
    bij = cm.bijective
    back = pullback_field(phi, w, cm)
    rt_cod = _same_assignment(pushforward_field(phi, back, cm), w)
    wd = w_domain if w_domain is not None else back
    rt_dom = _same_assignment(pullback_field(phi, pushforward_field(phi, wd, cm), cm), wd)
    return EquivalenceReport(bij and rt_cod and rt_dom, dict(cm.mapping), bij, rt_cod, rt_dom)


def evaluations_agree(u: VirtualField, v: VirtualField, samples: int = 64, tol: float = 1e-12,
                      seed: int = 42) -> bool:
    """Compare two virtual fields on one graph class by class at random slot values."""
    if u.graph != v.graph:
        return False
    rng = np.random.default_rng(seed)
    for c in u.skeleton.classes:
        m, n = u.assignment[c.id], v.assignment[c.id]
        slots = _sample_slots(m, samples, rng)
        if np.abs(m(slots, (samples,)) - n(slots, (samples,))).max(initial=0.0) > tol:
            return False
    return True


# ---------------------------------------------------------------------------
# template modules and field files


def template_outputs(kind: str, signature, dims: PhaseAssignment) -> list[str] | None:
    """Symmetric example modules for any signature.

    ``kind`` is ``linear``, ``tanh`` (tanh-coupled) or ``cubic``.
    Coefficients depend only on the slot type, so the result is invariant
    under swapping equal-type slots.  Leafless signatures get None.
    """
    types = signature.slot_types
    if not types:
        return None
    distinct = sorted(set(types))
    root = dims[signature.root_color]
    sd = [dims[t.source_color] for t in types]

    def coef(t, r, j):
        k = distinct.index(t)
        return round(0.6 - 0.35 * k + 0.15 * r - 0.1 * j, 6)

    outs = []
    for r in range(root):
        terms = []
        for i, t in enumerate(types):
            for j in range(sd[i]):
                c = coef(t, r, j)
                u = f"u{i}_{j}"
                if kind == "linear":
                    terms.append(f"{c}*{u}")
                elif kind == "tanh":
                    terms.append(f"{c}*tanh({u} + {0.1 * (r + 1):g})")
                elif kind == "cubic":
                    terms.append(f"{c}*{u} - {abs(c) / 3:g}*{u}^3")
                else:
                    raise ValueError(f"unknown template kind {kind!r}")
        body = " + ".join(terms)
        if kind == "tanh":
            # a genuinely multi-slot interaction on top of the sum
            s = " + ".join(f"u{i}_0" for i in range(len(types)))
            body = f"{body} + 0.2*sin({s})"
        outs.append(body)
    return outs


def template_field(g: ColoredGraph, kind: str, dims: PhaseAssignment | Mapping[str, int]) -> VirtualField:
    pa = dims if isinstance(dims, PhaseAssignment) else PhaseAssignment(dict(dims))
    sk = skeleton(g)
    mods = {}
    for c in sk.classes:
        out = template_outputs(kind, c.signature, pa)
        if out is not None:
            mods[c.id] = {"outputs": out}
    return virtual_field(g, mods, pa, sk=sk)


def read_field_file(path: str | Path) -> dict:
    """Parse a field file, JSON or TOML, by content."""
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise FieldError(f"{path} is neither JSON nor TOML: {exc}") from exc


def field_from_dict(g: ColoredGraph, raw: Mapping, check: bool = True) -> VirtualField:
    if "dims" not in raw:
        raise FieldError("field description lacks 'dims'")
    pa = PhaseAssignment({str(k): int(v) for k, v in raw["dims"].items()})
    from .linear import is_linear_description, linear_field_from_dict
    if is_linear_description(raw):
        return linear_field_from_dict(g, raw).to_virtual()
    return virtual_field(g, raw.get("modules", {}), pa, check=check)


def load_field(path: str | Path, g: ColoredGraph, check: bool = True) -> VirtualField:
    return field_from_dict(g, read_field_file(path), check)


def field_to_dict(w: VirtualField) -> dict:
    mods = {}
    for c in w.skeleton.classes:
        m = w.assignment[c.id]
        if not c.leafless:
            mods[str(c.signature)] = {"outputs": m.sources()}
    return {"dims": dict(w.phase.dims), "modules": mods}
