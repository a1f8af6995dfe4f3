"""Concrete semantics over finite 32-bit-word heaps.

This module is the trust anchor of the package: expressions evaluate to
values, heap assertions evaluate to decidable predicates over small finite
heaps, and entailment is checked by exhaustive enumeration within explicit
bounds.  Everything here favors being obviously correct over being fast;
the verification engine is the fast path, the model is the judge.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Mapping, Optional, Sequence

from . import terms
from .terms import (
    PROP,
    Const,
    Envs,
    Equal,
    Exists,
    Expr,
    Func,
    Inj,
    Prop,
    Pred,
    Sexpr,
    Star,
    Emp,
    Tvar,
    TypeIndex,
    UVar,
    Var,
)

WORD_MASK = 0xFFFFFFFF


# ---------------------------------------------------------------------------
# Values


class Value:
    __slots__ = ()


@dataclass(frozen=True)
class Word(Value):
    w: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "w", self.w & WORD_MASK)


@dataclass(frozen=True)
class Bool(Value):
    b: bool


@dataclass(frozen=True)
class Nat(Value):
    n: int


@dataclass(frozen=True)
class WordSeq(Value):
    ws: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "ws", tuple(w & WORD_MASK for w in self.ws))


@dataclass(frozen=True)
class PropV(Value):
    b: bool


TRUE = PropV(True)
FALSE = PropV(False)


# ---------------------------------------------------------------------------
# Heaps


class Heap:
    """Immutable finite map from nonzero word addresses to word values."""

    __slots__ = ("_cells",)

    def __init__(self, cells: Mapping[int, int] | Iterable[tuple[int, int]] = ()):
        d = dict(cells.items() if isinstance(cells, Mapping) else cells)
        for a in d:
            if not 0 < a <= WORD_MASK:
                raise ValueError(f"heap address out of range: {a}")
        self._cells = {a: v & WORD_MASK for a, v in d.items()}

    @property
    def cells(self) -> Mapping[int, int]:
        return self._cells

    def domain(self) -> frozenset[int]:
        return frozenset(self._cells)

    def is_empty(self) -> bool:
        return not self._cells

    def read(self, addr: int) -> Optional[int]:
        return self._cells.get(addr)

    def write(self, addr: int, value: int) -> "Heap":
        if addr not in self._cells:
            raise KeyError(addr)
        d = dict(self._cells)
        d[addr] = value & WORD_MASK
        return Heap(d)

    def restrict(self, addrs: Iterable[int]) -> "Heap":
        keep = set(addrs)
        return Heap({a: v for a, v in self._cells.items() if a in keep})

    def without(self, addrs: Iterable[int]) -> "Heap":
        drop = set(addrs)
        return Heap({a: v for a, v in self._cells.items() if a not in drop})

    def __len__(self) -> int:
        return len(self._cells)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Heap) and self._cells == other._cells

    def __hash__(self) -> int:
        return hash(frozenset(self._cells.items()))

    def __repr__(self) -> str:
        inner = ", ".join(f"{a}->{v}" for a, v in sorted(self._cells.items()))
        return f"Heap({{{inner}}})"


EMPTY_HEAP = Heap()


# ---------------------------------------------------------------------------
# Interpretation registry

FuncInterp = Callable[..., Value]
PredInterp = Callable[[Sequence[Value], Heap], bool]
EqTest = Callable[[object, object], bool]


@dataclass(frozen=True)
class Interp:
    """Maps interp identifiers from the environments to concrete semantics."""

    funcs: Mapping[str, FuncInterp]
    preds: Mapping[str, PredInterp]
    eq_tests: Mapping[str, EqTest]

    def extend(
        self,
        funcs: Mapping[str, FuncInterp] | None = None,
        preds: Mapping[str, PredInterp] | None = None,
    ) -> "Interp":
        """Overlay additional interpretations, e.g. values for globals."""
        f = dict(self.funcs)
        p = dict(self.preds)
        if funcs:
            f.update(funcs)
        if preds:
            p.update(preds)
        return Interp(funcs=f, preds=p, eq_tests=self.eq_tests)


# Carrier checks, keyed by the eq_test identifier of the type declaration.
_CARRIERS: dict[str, type] = {
    "word_eq": Word,
    "bool_eq": Bool,
    "nat_eq": Nat,
    "word_seq_eq": WordSeq,
}


def carrier_of(envs: Envs, t: Tvar) -> Optional[type]:
    if isinstance(t, Prop):
        return PropV
    if isinstance(t, TypeIndex) and t.n < len(envs.types):
        return _CARRIERS.get(envs.types[t.n].eq_test)
    return None


def first_word_type(envs: Envs) -> Optional[TypeIndex]:
    """The first declared type whose carrier is the 32-bit word."""
    for i, d in enumerate(envs.types):
        if d.eq_test == "word_eq":
            return TypeIndex(i)
    return None


# ---------------------------------------------------------------------------
# Built-in interpretations


def _w(x: Value) -> int:
    assert isinstance(x, Word)
    return x.w


def _seq(x: Value) -> tuple[int, ...]:
    assert isinstance(x, WordSeq)
    return x.ws


def _sll_holds(ws: tuple[int, ...], p: int, h: Heap) -> bool:
    # Two-word cells: p -> value, p+4 -> next; exact heap consumption.
    if p == 0:
        return not ws and h.is_empty()
    if not ws:
        return False
    nxt_addr = (p + 4) & WORD_MASK
    v = h.read(p)
    nxt = h.read(nxt_addr)
    if v is None or nxt is None or v != ws[0]:
        return False
    return _sll_holds(ws[1:], nxt, h.without((p, nxt_addr)))


def _bst_holds(ws: tuple[int, ...], p: int, h: Heap) -> bool:
    # Packed one-word fields (p: key, p+1: left, p+2: right) keep trees
    # inside small oracle bounds; ws is the strictly sorted element list.
    if p == 0:
        return not ws and h.is_empty()
    if not ws or any(a >= b for a, b in zip(ws, ws[1:])):
        return False
    addrs = (p, (p + 1) & WORD_MASK, (p + 2) & WORD_MASK)
    if len(set(addrs)) != 3:
        return False
    k, l, r = (h.read(a) for a in addrs)
    if k is None or l is None or r is None or k not in ws:
        return False
    i = ws.index(k)
    rest = h.without(addrs)
    rest_items = sorted(rest.cells.items())
    for m in range(1 << len(rest_items)):
        left = Heap(c for j, c in enumerate(rest_items) if m >> j & 1)
        right = Heap(c for j, c in enumerate(rest_items) if not m >> j & 1)
        if _bst_holds(ws[:i], l, left) and _bst_holds(ws[i + 1 :], r, right):
            return True
    return False


def _ptsto(args: Sequence[Value], h: Heap) -> bool:
    p, v = _w(args[0]), _w(args[1])
    return p != 0 and h.cells == {p: v}


def _array(args: Sequence[Value], h: Heap) -> bool:
    ws, base = _seq(args[0]), _w(args[1])
    if base == 0:
        return False
    addrs = [(base + 4 * i) & WORD_MASK for i in range(len(ws))]
    if 0 in addrs or len(set(addrs)) != len(addrs):
        return False
    return h.cells == dict(zip(addrs, ws))


def builtin_interp() -> Interp:
    funcs: dict[str, FuncInterp] = {
        "word_plus": lambda a, b: Word(_w(a) + _w(b)),
        "word_minus": lambda a, b: Word(_w(a) - _w(b)),
        "word_mult": lambda a, b: Word(_w(a) * _w(b)),
        "word_neq": lambda a, b: PropV(_w(a) != _w(b)),
        "word_lt": lambda a, b: PropV(_w(a) < _w(b)),
        "nat_plus": lambda a, b: Nat(a.n + b.n),
        "nat_ltb": lambda a, b: Bool(a.n < b.n),
        "seq_nil": lambda: WordSeq(()),
        "seq_cons": lambda x, l: WordSeq((_w(x),) + _seq(l)),
        "seq_len": lambda l: Word(len(_seq(l))),
        "seq_sel": lambda l, i: Word(_seq(l)[_w(i)]) if _w(i) < len(_seq(l)) else Word(0),
        "seq_upd": lambda l, i, v: WordSeq(
            tuple(
                _w(v) if j == _w(i) else x for j, x in enumerate(_seq(l))
            )
        ),
        "prop_true": lambda: TRUE,
    }
    preds: dict[str, PredInterp] = {
        "ptsto": _ptsto,
        "array": _array,
        "sll": lambda args, h: _sll_holds(_seq(args[0]), _w(args[1]), h),
        "bst": lambda args, h: _bst_holds(_seq(args[0]), _w(args[1]), h),
        "emp": lambda args, h: h.is_empty(),
    }
    eq_tests: dict[str, EqTest] = {
        "word_eq": lambda a, b: a == b,
        "bool_eq": lambda a, b: a == b,
        "nat_eq": lambda a, b: a == b,
        "word_seq_eq": lambda a, b: a == b,
    }
    for name, fn in eq_tests.items():
        terms.register_eq_test(name, fn)
    return Interp(funcs=funcs, preds=preds, eq_tests=eq_tests)


# ---------------------------------------------------------------------------
# Enumeration bounds


@dataclass(frozen=True)
class ModelBounds:
    """Finite search space for oracle checks; part of every oracle call."""

    max_address: int
    value_samples: Mapping[Tvar, tuple[Value, ...]]
    heap_values: tuple[int, ...]

    def samples_for(self, t: Tvar) -> tuple[Value, ...]:
        try:
            return self.value_samples[t]
        except KeyError:
            raise KeyError(f"no value samples registered for sort {t!r}") from None


def default_bounds(
    envs: Envs,
    *,
    max_address: int = 4,
    words: Sequence[int] = (0, 1, 2, 3),
    seq_max_len: int = 1,
    heap_values: Sequence[int] | None = None,
) -> ModelBounds:
    """Sample sets for every declared sort, sized for desk-scale checks."""
    samples: dict[Tvar, tuple[Value, ...]] = {PROP: (FALSE, TRUE)}
    seqs = [
        WordSeq(t)
        for n in range(seq_max_len + 1)
        for t in itertools.product(words, repeat=n)
    ]
    for i, decl in enumerate(envs.types):
        t = TypeIndex(i)
        if decl.eq_test == "word_eq":
            samples[t] = tuple(Word(w) for w in words)
        elif decl.eq_test == "bool_eq":
            samples[t] = (Bool(False), Bool(True))
        elif decl.eq_test == "nat_eq":
            samples[t] = tuple(Nat(n) for n in range(3))
        elif decl.eq_test == "word_seq_eq":
            samples[t] = tuple(seqs)
    hv = tuple(heap_values) if heap_values is not None else tuple(words)
    return ModelBounds(
        max_address=max_address, value_samples=samples, heap_values=hv
    )


def iter_heaps(bounds: ModelBounds) -> Iterator[Heap]:
    """All heaps with domain inside [1, max_address] and sampled cell values."""
    addrs = range(1, bounds.max_address + 1)
    for k in range(len(addrs) + 1):
        for dom in itertools.combinations(addrs, k):
            for vals in itertools.product(bounds.heap_values, repeat=k):
                yield Heap(zip(dom, vals))


def iter_assignments(
    tvars: Sequence[Tvar], bounds: ModelBounds
) -> Iterator[tuple[tuple[Tvar, Value], ...]]:
    """All sampled value assignments for a context of sorts."""
    pools = [bounds.samples_for(t) for t in tvars]
    for choice in itertools.product(*pools):
        yield tuple(zip(tvars, choice))


# ---------------------------------------------------------------------------
# Denotation

Assignment = Sequence[tuple[Tvar, Value]]


def denote_expr(
    envs: Envs,
    interp: Interp,
    uvar_values: Assignment,
    var_values: Assignment,
    e: Expr,
    t: Tvar,
) -> Optional[Value]:
    """Value of `e` at sort `t`, or None when ill-typed for these contexts."""
    if isinstance(e, Const):
        if e.t != t or not envs.type_ok(t):
            return None
        want = carrier_of(envs, t)
        if want is not None and not isinstance(e.value, want):
            return None
        return e.value  # type: ignore[return-value]
    if isinstance(e, Var):
        if not 0 <= e.n < len(var_values):
            return None
        vt, v = var_values[e.n]
        return v if vt == t else None
    if isinstance(e, UVar):
        if not 0 <= e.n < len(uvar_values):
            return None
        vt, v = uvar_values[e.n]
        return v if vt == t else None
    if isinstance(e, Func):
        if not 0 <= e.f < len(envs.funcs):
            return None
        sig = envs.funcs[e.f]
        if sig.range != t or len(e.args) != len(sig.domain):
            return None
        fn = interp.funcs.get(sig.interp)
        if fn is None:
            return None
        vals = []
        for a, at in zip(e.args, sig.domain):
            v = denote_expr(envs, interp, uvar_values, var_values, a, at)
            if v is None:
                return None
            vals.append(v)
        return fn(*vals)
    if isinstance(e, Equal):
        if t != PROP:
            return None
        a = denote_expr(envs, interp, uvar_values, var_values, e.lhs, e.t)
        b = denote_expr(envs, interp, uvar_values, var_values, e.rhs, e.t)
        if a is None or b is None:
            return None
        if isinstance(e.t, TypeIndex) and e.t.n < len(envs.types):
            eq = interp.eq_tests.get(envs.types[e.t.n].eq_test)
            if eq is not None:
                return PropV(bool(eq(a, b)))
        return PropV(a == b)
    return None


def denote_pure(
    envs: Envs, interp: Interp, uvar_values: Assignment, var_values: Assignment, e: Expr
) -> bool:
    return denote_expr(envs, interp, uvar_values, var_values, e, PROP) == TRUE


def all_pures_hold(
    envs: Envs,
    interp: Interp,
    uvar_values: Assignment,
    var_values: Assignment,
    pures: Iterable[Expr],
) -> bool:
    return all(denote_pure(envs, interp, uvar_values, var_values, e) for e in pures)


def denote_sexpr(
    envs: Envs,
    interp: Interp,
    uvar_values: Assignment,
    var_values: Assignment,
    s: Sexpr,
    h: Heap,
    bounds: ModelBounds,
) -> bool:
    """Decide whether heap `h` satisfies `s`; ill-typed parts count as false.

    Star is decided exactly by enumerating disjoint splits of the (finite)
    heap domain; Inj holds only on the empty heap; Exists ranges over the
    sampled values in `bounds`.
    """
    if isinstance(s, Emp):
        return h.is_empty()
    if isinstance(s, Inj):
        return h.is_empty() and denote_pure(envs, interp, uvar_values, var_values, s.e)
    if isinstance(s, Star):
        items = sorted(h.cells.items())
        for m in range(1 << len(items)):
            left = Heap(c for j, c in enumerate(items) if m >> j & 1)
            right = Heap(c for j, c in enumerate(items) if not m >> j & 1)
            if denote_sexpr(
                envs, interp, uvar_values, var_values, s.l, left, bounds
            ) and denote_sexpr(
                envs, interp, uvar_values, var_values, s.r, right, bounds
            ):
                return True
        return False
    if isinstance(s, Pred):
        if not 0 <= s.p < len(envs.preds):
            return False
        sig = envs.preds[s.p]
        if len(s.args) != len(sig.domain):
            return False
        fn = interp.preds.get(sig.interp)
        if fn is None:
            return False
        vals = []
        for a, at in zip(s.args, sig.domain):
            v = denote_expr(envs, interp, uvar_values, var_values, a, at)
            if v is None:
                return False
            vals.append(v)
        return bool(fn(vals, h))
    if isinstance(s, Exists):
        return any(
            denote_sexpr(
                envs, interp, uvar_values, ((s.t, v), *var_values), s.body, h, bounds
            )
            for v in bounds.samples_for(s.t)
        )
    return False


# ---------------------------------------------------------------------------
# Entailment oracle


def entails_oracle(
    envs: Envs,
    interp: Interp,
    uvars: Sequence[Tvar],
    lhs: Sexpr,
    rhs: Sexpr,
    bounds: ModelBounds,
) -> bool:
    """Exhaustive check that lhs entails rhs at the given bounds.

    Quantifies over every sampled unification-variable assignment and every
    heap with domain inside [1, max_address].  Exponential in the bounds;
    desk scale only.
    """
    heaps = list(iter_heaps(bounds))
    for uvals in iter_assignments(uvars, bounds):
        for h in heaps:
            if denote_sexpr(envs, interp, uvals, (), lhs, h, bounds):
                if not denote_sexpr(envs, interp, uvals, (), rhs, h, bounds):
                    return False
    return True
