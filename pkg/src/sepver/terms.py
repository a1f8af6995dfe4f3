"""Reified syntax for pure expressions and heap assertions.

Terms use de Bruijn indices for bound variables (``Var``) and a separate
index space for unification variables (``UVar``); globals are nullary
functions.  Well-typedness is a separate, decidable judgment
(`typecheck_expr` / `typecheck_sexpr`) rather than an intrinsic property
of the representation, so denotation elsewhere is partial.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, Mapping, Optional, Sequence


# ---------------------------------------------------------------------------
# Sorts


class Tvar:
    """Sort of a term: the proposition sort or an index into the type table."""

    __slots__ = ()


@dataclass(frozen=True)
class Prop(Tvar):
    def __repr__(self) -> str:
        return "Prop"


@dataclass(frozen=True)
class TypeIndex(Tvar):
    n: int

    def __repr__(self) -> str:
        return f"TypeIndex({self.n})"


PROP = Prop()


# ---------------------------------------------------------------------------
# Environment declarations


@dataclass(frozen=True)
class TypeDecl:
    """A named type with the identifier of its registered equality tester."""

    name: str
    eq_test: str


@dataclass(frozen=True)
class FuncSig:
    name: str
    domain: tuple[Tvar, ...]
    range: Tvar
    interp: str


@dataclass(frozen=True)
class PredSig:
    name: str
    domain: tuple[Tvar, ...]
    interp: str


@dataclass(frozen=True)
class Envs:
    """Positional tables of types, functions, and heap predicates."""

    types: tuple[TypeDecl, ...] = ()
    funcs: tuple[FuncSig, ...] = ()
    preds: tuple[PredSig, ...] = ()

    def type_ok(self, t: Tvar) -> bool:
        return isinstance(t, Prop) or (
            isinstance(t, TypeIndex) and 0 <= t.n < len(self.types)
        )

    def func_named(self, name: str) -> Optional[int]:
        for i, f in enumerate(self.funcs):
            if f.name == name:
                return i
        return None

    def func_by_interp(self, interp: str) -> Optional[int]:
        for i, f in enumerate(self.funcs):
            if f.interp == interp:
                return i
        return None

    def pred_by_interp(self, interp: str) -> Optional[int]:
        for i, p in enumerate(self.preds):
            if p.interp == interp:
                return i
        return None


# ---------------------------------------------------------------------------
# Pure expressions


class Expr:
    __slots__ = ()


@dataclass(frozen=True)
class Const(Expr):
    t: Tvar
    value: object


@dataclass(frozen=True)
class Var(Expr):
    n: int


@dataclass(frozen=True)
class UVar(Expr):
    n: int


@dataclass(frozen=True)
class Func(Expr):
    f: int
    args: tuple[Expr, ...] = ()


@dataclass(frozen=True)
class Equal(Expr):
    """Equality at an explicit sort; denotes a proposition."""

    t: Tvar
    lhs: Expr
    rhs: Expr


# ---------------------------------------------------------------------------
# Heap assertions


class Sexpr:
    __slots__ = ()


@dataclass(frozen=True)
class Star(Sexpr):
    l: Sexpr
    r: Sexpr


@dataclass(frozen=True)
class Emp(Sexpr):
    pass


@dataclass(frozen=True)
class Pred(Sexpr):
    p: int
    args: tuple[Expr, ...] = ()


@dataclass(frozen=True)
class Inj(Sexpr):
    e: Expr


@dataclass(frozen=True)
class Exists(Sexpr):
    t: Tvar
    body: Sexpr


EMP = Emp()


# ---------------------------------------------------------------------------
# Value-equality testers for Const leaves.  Testers are registered by the
# model module under the identifiers named in TypeDecl.eq_test; structural
# equality is the fallback for identifiers nobody registered.

_EQ_TESTS: dict[str, Callable[[object, object], bool]] = {}


def register_eq_test(name: str, fn: Callable[[object, object], bool]) -> None:
    _EQ_TESTS[name] = fn


def _const_eq(envs: Envs, t: Tvar, a: object, b: object) -> bool:
    if isinstance(t, TypeIndex) and t.n < len(envs.types):
        fn = _EQ_TESTS.get(envs.types[t.n].eq_test)
        if fn is not None:
            return fn(a, b)
    return a == b


# ---------------------------------------------------------------------------
# Typechecking


def typecheck_expr(
    envs: Envs,
    vars: Sequence[Tvar],
    uvars: Sequence[Tvar],
    e: Expr,
) -> Optional[Tvar]:
    """Sort of `e` in the given contexts, or None if ill-typed.

    Var/UVar index 0 is the innermost binder; weakening a context by
    appending entries never changes the verdict.
    """
    if isinstance(e, Const):
        return e.t if envs.type_ok(e.t) else None
    if isinstance(e, Var):
        return vars[e.n] if 0 <= e.n < len(vars) else None
    if isinstance(e, UVar):
        return uvars[e.n] if 0 <= e.n < len(uvars) else None
    if isinstance(e, Func):
        if not 0 <= e.f < len(envs.funcs):
            return None
        sig = envs.funcs[e.f]
        if len(e.args) != len(sig.domain):
            return None
        for arg, want in zip(e.args, sig.domain):
            if typecheck_expr(envs, vars, uvars, arg) != want:
                return None
        return sig.range if envs.type_ok(sig.range) else None
    if isinstance(e, Equal):
        if not envs.type_ok(e.t):
            return None
        if typecheck_expr(envs, vars, uvars, e.lhs) != e.t:
            return None
        if typecheck_expr(envs, vars, uvars, e.rhs) != e.t:
            return None
        return PROP
    return None


def typecheck_sexpr(
    envs: Envs,
    vars: Sequence[Tvar],
    uvars: Sequence[Tvar],
    s: Sexpr,
) -> bool:
    if isinstance(s, Emp):
        return True
    if isinstance(s, Star):
        return typecheck_sexpr(envs, vars, uvars, s.l) and typecheck_sexpr(
            envs, vars, uvars, s.r
        )
    if isinstance(s, Inj):
        return typecheck_expr(envs, vars, uvars, s.e) == PROP
    if isinstance(s, Pred):
        if not 0 <= s.p < len(envs.preds):
            return False
        sig = envs.preds[s.p]
        if len(s.args) != len(sig.domain):
            return False
        return all(
            typecheck_expr(envs, vars, uvars, a) == want
            for a, want in zip(s.args, sig.domain)
        )
    if isinstance(s, Exists):
        if not envs.type_ok(s.t):
            return False
        return typecheck_sexpr(envs, (s.t, *vars), uvars, s.body)
    return False


# ---------------------------------------------------------------------------
# Syntactic equality


def expr_syntactic_eq(envs: Envs, a: Expr, b: Expr) -> bool:
    """Structural equality; Const leaves go through the registered tester."""
    if isinstance(a, Const) and isinstance(b, Const):
        return a.t == b.t and _const_eq(envs, a.t, a.value, b.value)
    if isinstance(a, Var) and isinstance(b, Var):
        return a.n == b.n
    if isinstance(a, UVar) and isinstance(b, UVar):
        return a.n == b.n
    if isinstance(a, Func) and isinstance(b, Func):
        return (
            a.f == b.f
            and len(a.args) == len(b.args)
            and all(expr_syntactic_eq(envs, x, y) for x, y in zip(a.args, b.args))
        )
    if isinstance(a, Equal) and isinstance(b, Equal):
        return (
            a.t == b.t
            and expr_syntactic_eq(envs, a.lhs, b.lhs)
            and expr_syntactic_eq(envs, a.rhs, b.rhs)
        )
    return False


# ---------------------------------------------------------------------------
# Index manipulation


def lift_expr(e: Expr, skip: int, by: int) -> Expr:
    """Shift Var indices >= skip up by `by`."""
    if by == 0:
        return e
    if isinstance(e, Var):
        return Var(e.n + by) if e.n >= skip else e
    if isinstance(e, Func):
        return Func(e.f, tuple(lift_expr(a, skip, by) for a in e.args))
    if isinstance(e, Equal):
        return Equal(e.t, lift_expr(e.lhs, skip, by), lift_expr(e.rhs, skip, by))
    return e


def lift_uvars(e: Expr, skip: int, by: int) -> Expr:
    """Shift UVar indices >= skip up by `by`."""
    if by == 0:
        return e
    if isinstance(e, UVar):
        return UVar(e.n + by) if e.n >= skip else e
    if isinstance(e, Func):
        return Func(e.f, tuple(lift_uvars(a, skip, by) for a in e.args))
    if isinstance(e, Equal):
        return Equal(e.t, lift_uvars(e.lhs, skip, by), lift_uvars(e.rhs, skip, by))
    return e


def lift_sexpr(s: Sexpr, skip: int, by: int) -> Sexpr:
    """Shift free Var indices in a heap assertion; Exists bumps the cutoff."""
    if by == 0:
        return s
    if isinstance(s, Star):
        return Star(lift_sexpr(s.l, skip, by), lift_sexpr(s.r, skip, by))
    if isinstance(s, Pred):
        return Pred(s.p, tuple(lift_expr(a, skip, by) for a in s.args))
    if isinstance(s, Inj):
        return Inj(lift_expr(s.e, skip, by))
    if isinstance(s, Exists):
        return Exists(s.t, lift_sexpr(s.body, skip + 1, by))
    return s


def open_exists(s: Sexpr) -> tuple[tuple[Tvar, ...], Sexpr]:
    """Strip the maximal Exists prefix, outermost binder first."""
    binders: list[Tvar] = []
    while isinstance(s, Exists):
        binders.append(s.t)
        s = s.body
    return tuple(binders), s


# ---------------------------------------------------------------------------
# Traversal helpers shared by unification, cancellation, and the frontend.


def subst_expr(e: Expr, mapping: Mapping[int, Expr]) -> Expr:
    """Replace UVar occurrences per `mapping` (indices not present stay)."""
    if isinstance(e, UVar):
        return mapping.get(e.n, e)
    if isinstance(e, Func):
        return Func(e.f, tuple(subst_expr(a, mapping) for a in e.args))
    if isinstance(e, Equal):
        return Equal(e.t, subst_expr(e.lhs, mapping), subst_expr(e.rhs, mapping))
    return e


def subst_vars(e: Expr, mapping: Mapping[int, Expr]) -> Expr:
    """Replace Var occurrences per `mapping`."""
    if isinstance(e, Var):
        return mapping.get(e.n, e)
    if isinstance(e, Func):
        return Func(e.f, tuple(subst_vars(a, mapping) for a in e.args))
    if isinstance(e, Equal):
        return Equal(e.t, subst_vars(e.lhs, mapping), subst_vars(e.rhs, mapping))
    return e


def subst_vars_sexpr(s: Sexpr, mapping: Mapping[int, Expr]) -> Sexpr:
    """Replace free Var occurrences in a heap assertion."""
    if isinstance(s, Star):
        return Star(subst_vars_sexpr(s.l, mapping), subst_vars_sexpr(s.r, mapping))
    if isinstance(s, Pred):
        return Pred(s.p, tuple(subst_vars(a, mapping) for a in s.args))
    if isinstance(s, Inj):
        return Inj(subst_vars(s.e, mapping))
    if isinstance(s, Exists):
        shifted = {k + 1: lift_expr(v, 0, 1) for k, v in mapping.items()}
        return Exists(s.t, subst_vars_sexpr(s.body, shifted))
    return s


def subst_funcs(e: Expr, mapping: Mapping[int, Expr]) -> Expr:
    """Replace nullary-function applications per `mapping` (register refs)."""
    if isinstance(e, Func):
        if not e.args and e.f in mapping:
            return mapping[e.f]
        return Func(e.f, tuple(subst_funcs(a, mapping) for a in e.args))
    if isinstance(e, Equal):
        return Equal(e.t, subst_funcs(e.lhs, mapping), subst_funcs(e.rhs, mapping))
    return e


def iter_subexprs(e: Expr) -> Iterator[Expr]:
    yield e
    if isinstance(e, Func):
        for a in e.args:
            yield from iter_subexprs(a)
    elif isinstance(e, Equal):
        yield from iter_subexprs(e.lhs)
        yield from iter_subexprs(e.rhs)


def uvars_of(e: Expr) -> set[int]:
    return {x.n for x in iter_subexprs(e) if isinstance(x, UVar)}


def vars_of(e: Expr) -> set[int]:
    return {x.n for x in iter_subexprs(e) if isinstance(x, Var)}
