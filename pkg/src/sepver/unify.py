"""First-order unification over expressions with UVars as unifiables.

Substitutions are kept fully resolved: binding eagerly rewrites existing
images, so no image ever mentions a bound unification variable and
`instantiate` is a single pass.  Acyclicity is enforced by an occurs
check at bind time.
"""

from __future__ import annotations

from typing import Iterator, Mapping, Optional, Sequence

from .model import Assignment, Interp, denote_expr
from .terms import (
    Const,
    Envs,
    Equal,
    Expr,
    Func,
    Tvar,
    UVar,
    Var,
    expr_syntactic_eq,
    subst_expr,
    uvars_of,
)


class Subst:
    """Immutable, acyclic map from UVar index to expression."""

    __slots__ = ("_m",)

    def __init__(self, m: Mapping[int, Expr] = ()):
        self._m = dict(m)

    def lookup(self, u: int) -> Optional[Expr]:
        return self._m.get(u)

    def domain(self) -> frozenset[int]:
        return frozenset(self._m)

    def items(self) -> Iterator[tuple[int, Expr]]:
        return iter(sorted(self._m.items()))

    def __contains__(self, u: int) -> bool:
        return u in self._m

    def __len__(self) -> int:
        return len(self._m)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Subst) and self._m == other._m

    def __repr__(self) -> str:
        inner = ", ".join(f"?{u} -> {e}" for u, e in self.items())
        return f"Subst({{{inner}}})"

    def bind(self, u: int, e: Expr) -> Optional["Subst"]:
        """Extend with u -> e (resolved through self); None on occurs failure."""
        resolved = subst_expr(e, self._m)
        if isinstance(resolved, UVar) and resolved.n == u:
            return self  # trivial binding
        if u in uvars_of(resolved):
            return None
        m = {v: subst_expr(img, {u: resolved}) for v, img in self._m.items()}
        m[u] = resolved
        return Subst(m)


EMPTY_SUBST = Subst()


def occurs(u: int, e: Expr, s: Subst) -> bool:
    """Does UVar u appear in e after resolving bound UVars through s?"""
    if isinstance(e, UVar):
        img = s.lookup(e.n)
        if img is not None:
            return occurs(u, img, s)
        return e.n == u
    if isinstance(e, Func):
        return any(occurs(u, a, s) for a in e.args)
    if isinstance(e, Equal):
        return occurs(u, e.lhs, s) or occurs(u, e.rhs, s)
    return False


def instantiate(s: Subst, e: Expr) -> Expr:
    """Replace every bound UVar by its (fully resolved) image."""
    if isinstance(e, UVar):
        img = s.lookup(e.n)
        return e if img is None else img
    if isinstance(e, Func):
        return Func(e.f, tuple(instantiate(s, a) for a in e.args))
    if isinstance(e, Equal):
        return Equal(e.t, instantiate(s, e.lhs), instantiate(s, e.rhs))
    return e


def expr_unify(envs: Envs, a: Expr, b: Expr, s: Subst) -> Optional[Subst]:
    """Left-to-right, non-backtracking unification; None when not unifiable.

    Returns an extension of `s` under which both sides instantiate to
    syntactically equal terms.  Vars only unify with identical Vars; Const
    leaves compare via the registered equality tester.
    """
    a = instantiate(s, a)
    b = instantiate(s, b)
    if isinstance(a, UVar):
        return s.bind(a.n, b)
    if isinstance(b, UVar):
        return s.bind(b.n, a)
    if isinstance(a, Var) and isinstance(b, Var):
        return s if a.n == b.n else None
    if isinstance(a, Const) and isinstance(b, Const):
        return s if expr_syntactic_eq(envs, a, b) else None
    if isinstance(a, Func) and isinstance(b, Func):
        if a.f != b.f or len(a.args) != len(b.args):
            return None
        for x, y in zip(a.args, b.args):
            nxt = expr_unify(envs, x, y, s)
            if nxt is None:
                return None
            s = nxt
        return s
    if isinstance(a, Equal) and isinstance(b, Equal):
        if a.t != b.t:
            return None
        for x, y in ((a.lhs, b.lhs), (a.rhs, b.rhs)):
            nxt = expr_unify(envs, x, y, s)
            if nxt is None:
                return None
            s = nxt
        return s
    return None


def subst_holds(
    envs: Envs, interp: Interp, uvar_values: Assignment, s: Subst
) -> bool:
    """Does the assignment make every binding an equality of denotations?"""
    for u, e in s.items():
        if not 0 <= u < len(uvar_values):
            return False
        t = uvar_values[u][0]
        lhs = denote_expr(envs, interp, uvar_values, (), UVar(u), t)
        rhs = denote_expr(envs, interp, uvar_values, (), e, t)
        if lhs is None or rhs is None or lhs != rhs:
            return False
    return True
