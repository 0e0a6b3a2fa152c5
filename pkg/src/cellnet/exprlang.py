"""A small arithmetic language for writing control modules.

Grammar, loosest to tightest::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | power
    power  := atom ("^" unary)?          # right associative, above unary minus
    atom   := number | var | func "(" expr ")" | "(" expr ")"

so ``-2^2 == -4`` and ``2^3^2 == 512``.  Variables are ``u<i>_<j>``: component
``j`` of input slot ``i``, both counted from zero in canonical slot order.
Evaluation is IEEE double arithmetic through numpy; NaN and inf propagate.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .graphs import InputSignature
from .phase import PhaseAssignment


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, msg: str, col: int):
        super().__init__(f"{msg} at col {col}")
        self.col = col


class UnknownFunction(ExprError):
    pass


class UnboundVariable(ExprError):
    pass


class ArityMismatch(ExprError):
    pass


class NonzeroModuleOnLeaflessClass(ExprError):
    pass


class OutOfRangeVariable(ExprError):
    pass


FUNCTIONS: Mapping[str, Callable] = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "tanh": np.tanh,
    "exp": np.exp, "log": np.log, "sqrt": np.sqrt, "abs": np.abs,
}


# ---------------------------------------------------------------------------
# syntax tree


class Expr:
    __slots__ = ()


@dataclass(frozen=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    slot: int
    comp: int


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Div(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Pow(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Call(Expr):
    func: str
    arg: Expr


BINARY = {Add: "+", Sub: "-", Mul: "*", Div: "/", Pow: "^"}
_OPS = {v: k for k, v in BINARY.items()}


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/^()]))"
)
_VAR = re.compile(r"u(\d+)_(\d+)\Z")


def _tokenize(src: str) -> list[tuple[str, str, int]]:
    toks, pos = [], 0
    while True:
        while pos < len(src) and src[pos].isspace():
            pos += 1
        if pos >= len(src):
            break
        m = _TOKEN.match(src, pos)
        if not m or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {src[pos]!r}", pos)
        kind = m.lastgroup
        toks.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    toks.append(("end", "", len(src)))
    return toks


class _Parser:
    def __init__(self, src: str):
        self.toks = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str):
        kind, val, col = self.peek()
        if val != text or kind != "op":
            what = "end of input" if kind == "end" else repr(val)
            raise ExprSyntaxError(f"expected {text!r}, found {what}", col)
        self.i += 1

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            node = _OPS[op](node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            node = _OPS[op](node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            return Pow(base, self.unary())
        return base

    def atom(self) -> Expr:
        kind, val, col = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "name":
            m = _VAR.match(val)
            if m:
                return Var(int(m.group(1)), int(m.group(2)))
            if self.peek()[:2] != ("op", "("):
                raise ExprSyntaxError(f"unknown name {val!r}", col)
            if val not in FUNCTIONS:
                raise UnknownFunction(f"unknown function {val!r} at col {col}")
            self.take()
            arg = self.expr()
            self.expect(")")
            return Call(val, arg)
        if (kind, val) == ("op", "("):
            inner = self.expr()
            self.expect(")")
            return inner
        what = "end of input" if kind == "end" else repr(val)
        raise ExprSyntaxError(f"unexpected {what}", col)


def parse(src: str) -> Expr:
    p = _Parser(src)
    e = p.expr()
    kind, val, col = p.peek()
    if kind != "end":
        raise ExprSyntaxError(f"unexpected {val!r}", col)
    return e


# ---------------------------------------------------------------------------
# printing

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, Pow: 4}


def _prec(e: Expr) -> int:
    if isinstance(e, Num) and (e.value < 0 or np.signbit(e.value)):
        return 3
    return _PREC.get(type(e), 5)


def _num(v: float) -> str:
    if v != v or v in (float("inf"), float("-inf")):
        raise ExprError(f"{v} has no literal form")
    if v == int(v) and abs(v) < 1e15:
        return str(int(v)) if not np.signbit(v) else "-" + str(int(-v))
    return repr(float(v))


def to_source(e: Expr) -> str:
    """Print with the fewest parentheses that still parse back to ``e``.

    Negative literals have no literal form and print as a negation, so they
    come back as ``Neg(Num(...))``.
    """
    def wrap(x: Expr, need: bool) -> str:
        s = to_source(x)
        return f"({s})" if need else s

    if isinstance(e, Num):
        return _num(e.value)
    if isinstance(e, Var):
        return f"u{e.slot}_{e.comp}"
    if isinstance(e, Call):
        return f"{e.func}({to_source(e.arg)})"
    if isinstance(e, Neg):
        return "-" + wrap(e.arg, _prec(e.arg) < 3)
    if isinstance(e, Pow):
        return f"{wrap(e.left, _prec(e.left) <= 4)}^{wrap(e.right, _prec(e.right) < 3)}"
    p = _PREC[type(e)]
    return f"{wrap(e.left, _prec(e.left) < p)}{BINARY[type(e)]}{wrap(e.right, _prec(e.right) <= p)}"


# ---------------------------------------------------------------------------
# evaluation


def variables(e: Expr) -> set[tuple[int, int]]:
    if isinstance(e, Var):
        return {(e.slot, e.comp)}
    if isinstance(e, Num):
        return set()
    if isinstance(e, (Neg, Call)):
        return variables(e.arg)
    return variables(e.left) | variables(e.right)


def substitute(e: Expr, slot_map: Mapping[int, int]) -> Expr:
    """Rename slot indices: ``Var(k, j) -> Var(slot_map[k], j)``."""
    if isinstance(e, Var):
        return Var(slot_map[e.slot], e.comp)
    if isinstance(e, Num):
        return e
    if isinstance(e, Neg):
        return Neg(substitute(e.arg, slot_map))
    if isinstance(e, Call):
        return Call(e.func, substitute(e.arg, slot_map))
    return type(e)(substitute(e.left, slot_map), substitute(e.right, slot_map))


def compile_expr(e: Expr) -> Callable[[Sequence[np.ndarray]], np.ndarray]:
    """Closure evaluating ``e`` on slot arrays; ``slots[i][..., j]`` is variable ``u<i>_<j>``."""
    if isinstance(e, Num):
        v = np.float64(e.value)
        return lambda s: v
    if isinstance(e, Var):
        i, j = e.slot, e.comp

        def var(s):
            try:
                return s[i][..., j]
            except IndexError:
                raise UnboundVariable(f"u{i}_{j} is not bound") from None
        return var
    if isinstance(e, Neg):
        f = compile_expr(e.arg)
        return lambda s: np.negative(f(s))
    if isinstance(e, Call):
        fn, f = FUNCTIONS[e.func], compile_expr(e.arg)
        return lambda s: fn(f(s))
    ufunc = {Add: np.add, Sub: np.subtract, Mul: np.multiply, Div: np.divide, Pow: np.power}[type(e)]
    fl, fr = compile_expr(e.left), compile_expr(e.right)
    return lambda s: ufunc(fl(s), fr(s))


def evaluate(e: Expr, slots: Sequence[Sequence[float]]) -> float:
    arrs = [np.asarray(x, dtype=float) for x in slots]
    with np.errstate(all="ignore"):
        return float(compile_expr(e)(arrs))


eval = evaluate  # noqa: A001  (public name used in the docs)


# ---------------------------------------------------------------------------
# binding to an input signature


@dataclass(frozen=True, eq=False)
class BoundModule:
    """A control module for one input signature.

    ``exprs`` holds one expression per output component.  Modules built by
    wrapping other modules carry ``exprs=None`` and only an evaluator.
    """

    signature: InputSignature
    root_dim: int
    slot_dims: tuple[int, ...]
    exprs: tuple[Expr, ...] | None
    fn: Callable[[Sequence[np.ndarray]], np.ndarray]
    label: str = ""

    def __call__(self, slots: Sequence[np.ndarray], batch_shape: tuple[int, ...] | None = None) -> np.ndarray:
        """Evaluate on slot arrays of shape ``batch + (d_i,)``; returns ``batch + (root_dim,)``."""
        slots = [np.asarray(x, dtype=float) for x in slots]
        if batch_shape is None:
            batch_shape = slots[0].shape[:-1] if slots else ()
        with np.errstate(all="ignore"):
            return self.fn(slots, tuple(batch_shape))

    @property
    def leafless(self) -> bool:
        return self.signature.n_slots == 0

    def sources(self) -> list[str]:
        if self.exprs is None:
            return [self.label]
        return [to_source(e) for e in self.exprs]


def _stack_fn(compiled):
    def fn(slots, batch_shape):
        outs = [np.broadcast_to(np.asarray(c(slots), dtype=float), batch_shape) for c in compiled]
        return np.stack(outs, axis=-1) if outs else np.zeros(batch_shape + (0,))
    return fn


def module_from_exprs(signature: InputSignature, root_dim: int, slot_dims: Sequence[int],
                      exprs: Sequence[Expr]) -> BoundModule:
    exprs = tuple(exprs)
    if len(exprs) != root_dim:
        raise ArityMismatch(f"{len(exprs)} outputs for a root of dimension {root_dim}")
    for e in exprs:
        for i, j in sorted(variables(e)):
            if i >= len(slot_dims) or j >= slot_dims[i]:
                raise OutOfRangeVariable(
                    f"u{i}_{j} is outside a signature with slot dims {list(slot_dims)}"
                )
    return BoundModule(signature, root_dim, tuple(slot_dims), exprs,
                       _stack_fn([compile_expr(e) for e in exprs]))


def zero_module(signature: InputSignature, dims: PhaseAssignment) -> BoundModule:
    root = dims[signature.root_color]
    sd = tuple(dims[t.source_color] for t in signature.slot_types)
    return module_from_exprs(signature, root, sd, [Num(0.0)] * root)


def bind(spec, signature: InputSignature, dims: PhaseAssignment) -> BoundModule:
    """Parse and check a module spec against a signature.

    ``spec`` is ``{"outputs": [...], "slots": [...]}`` (``slots`` optional,
    listing slot types as ``edgecolor:sourcecolor``), a bare list of output
    strings, or None for a leafless class.
    """
    root = dims[signature.root_color]
    slot_dims = tuple(dims[t.source_color] for t in signature.slot_types)
    if isinstance(spec, Mapping):
        declared = spec.get("slots")
        outputs = spec.get("outputs")
        if declared is not None:
            got = [str(x) for x in declared]
            want = [str(t) for t in signature.slot_types]
            if got != want:
                raise ArityMismatch(f"declared slots {got} do not match signature slots {want}")
    else:
        outputs = spec
    if signature.n_slots == 0:
        if outputs is not None:
            for text in outputs:
                e = text if isinstance(text, Expr) else parse(str(text))
                if variables(e) or evaluate(e, []) != 0.0:
                    raise NonzeroModuleOnLeaflessClass(
                        f"class {signature} has no inputs, so its only module is zero"
                    )
        return zero_module(signature, dims)
    if outputs is None:
        raise ArityMismatch(f"no module given for class {signature}")
    if isinstance(outputs, str):
        outputs = [outputs]
    exprs = [o if isinstance(o, Expr) else parse(str(o)) for o in outputs]
    return module_from_exprs(signature, root, slot_dims, exprs)


def permute_slots(m: BoundModule, perm: Sequence[int]) -> BoundModule:
    """Module ``m'`` with ``m'(s_0, ..., s_{n-1}) = m(s_{perm[0]}, ..., s_{perm[n-1]})``.

    Slot ``k`` of ``m`` reads slot ``perm[k]`` of the new module, so each
    variable ``u<k>_<j>`` becomes ``u<perm[k]>_<j>``.
    """
    perm = tuple(perm)
    dims = tuple(m.slot_dims[perm.index(i)] for i in range(len(perm)))
    if m.exprs is not None:
        exprs = tuple(substitute(e, dict(enumerate(perm))) for e in m.exprs)
        return module_from_exprs(m.signature, m.root_dim, dims, exprs)
    inner = m.fn

    def fn(slots, batch_shape):
        return inner([slots[p] for p in perm], batch_shape)
    return BoundModule(m.signature, m.root_dim, dims, None, fn, f"permute({m.label}, {list(perm)})")
