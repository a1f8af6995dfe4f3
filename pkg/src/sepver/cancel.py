"""Heap-assertion normal form and the cancellation procedure.

Cancellation matches equal atoms on both sides of an entailment by
unification and removes them, producing a residual goal.  The four kinds
of variables get four treatments: left-hand existentials come back as
top-level universals, pre-existing unification variables yield equations
for their inferred replacements, solved fresh unification variables are
substituted away, and unsolved ones come back as existentials.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

from .provers import Prover, congruence_split
from .terms import (
    Const,
    Envs,
    Equal,
    Exists,
    Expr,
    Func,
    Inj,
    Pred,
    Prop,
    Sexpr,
    Star,
    Emp,
    EMP,
    Tvar,
    TypeIndex,
    UVar,
    Var,
    lift_expr,
    subst_vars,
    vars_of,
)
from .unify import EMPTY_SUBST, Subst, expr_unify, instantiate

Atom = tuple[int, tuple[Expr, ...]]


@dataclass(frozen=True)
class SHeap:
    """Normalized heap assertion: hoisted binders, pure facts, grouped atoms.

    `var_binders[i]` is the sort of Var i inside the pures and atom
    arguments; `uvar_binders` records unification variables this heap
    introduced when conclusion existentials were converted.
    """

    pures: tuple[Expr, ...] = ()
    impures: Mapping[int, tuple[tuple[Expr, ...], ...]] = field(default_factory=dict)
    var_binders: tuple[Tvar, ...] = ()
    uvar_binders: tuple[Tvar, ...] = ()

    def atoms(self) -> list[Atom]:
        out: list[Atom] = []
        for p in sorted(self.impures):
            out.extend((p, args) for args in self.impures[p])
        return out

    def atom_count(self) -> int:
        return sum(len(v) for v in self.impures.values())

    def with_atoms(self, atoms: Sequence[Atom]) -> "SHeap":
        return replace(self, impures=group_atoms(atoms))

    def map_exprs(self, fn) -> "SHeap":
        return replace(
            self,
            pures=tuple(fn(e) for e in self.pures),
            impures={
                p: tuple(tuple(fn(a) for a in args) for args in argss)
                for p, argss in self.impures.items()
            },
        )


def group_atoms(atoms: Sequence[Atom]) -> dict[int, tuple[tuple[Expr, ...], ...]]:
    out: dict[int, list[tuple[Expr, ...]]] = {}
    for p, args in atoms:
        out.setdefault(p, []).append(tuple(args))
    return {p: tuple(v) for p, v in sorted(out.items())}


# ---------------------------------------------------------------------------
# Normalization


def normalize(s: Sexpr) -> SHeap:
    """Flatten Star/Emp, hoist every Exists, split Inj from predicate atoms."""
    binders, pures, atoms = _normalize(s)
    return SHeap(pures=tuple(pures), impures=group_atoms(atoms), var_binders=binders)


def _normalize(s: Sexpr) -> tuple[tuple[Tvar, ...], list[Expr], list[Atom]]:
    if isinstance(s, Emp):
        return (), [], []
    if isinstance(s, Inj):
        return (), [s.e], []
    if isinstance(s, Pred):
        return (), [], [(s.p, s.args)]
    if isinstance(s, Exists):
        binders, pures, atoms = _normalize(s.body)
        # the binder of this Exists sits just outside the body's own binders
        return binders + (s.t,), pures, atoms
    if isinstance(s, Star):
        bl, pl, al = _normalize(s.l)
        br, pr, ar = _normalize(s.r)
        kl, kr = len(bl), len(br)
        # combined context: left binders at 0..kl-1, right binders after
        pl = [lift_expr(e, kl, kr) for e in pl]
        al = [(p, tuple(lift_expr(a, kl, kr) for a in args)) for p, args in al]
        pr = [lift_expr(e, 0, kl) for e in pr]
        ar = [(p, tuple(lift_expr(a, 0, kl) for a in args)) for p, args in ar]
        return bl + br, pl + pr, al + ar
    raise TypeError(f"not a heap assertion: {s!r}")


def denormalize(sh: SHeap) -> Sexpr:
    """Sexpr with the same denotation as the normal form (Exists re-wrapped)."""
    parts: list[Sexpr] = [Pred(p, args) for p, args in sh.atoms()]
    parts.extend(Inj(e) for e in sh.pures)
    if not parts:
        body: Sexpr = EMP
    else:
        body = parts[-1]
        for part in reversed(parts[:-1]):
            body = Star(part, body)
    for t in sh.var_binders:
        body = Exists(t, body)
    return body


def uvarize(sh: SHeap, next_uvar: int) -> SHeap:
    """Turn hoisted binders into fresh unification variables.

    Used on the conclusion side: existentials there may be solved by
    unification.  Fresh indices start at `next_uvar` so existing terms
    need no shifting.
    """
    k = len(sh.var_binders)
    if k == 0:
        return sh
    mapping = {i: UVar(next_uvar + i) for i in range(k)}
    out = sh.map_exprs(lambda e: subst_vars(e, mapping))
    return replace(out, var_binders=(), uvar_binders=sh.uvar_binders + sh.var_binders)


# ---------------------------------------------------------------------------
# Atom ordering


_VALUE_TAGS = {"Word": 0, "Bool": 1, "Nat": 2, "WordSeq": 3, "PropV": 4}


def _tvar_key(t: Tvar):
    return (0, 0) if isinstance(t, Prop) else (1, t.n)  # type: ignore[union-attr]


def _value_key(v: object):
    tag = _VALUE_TAGS.get(type(v).__name__)
    if tag is None:
        return (len(_VALUE_TAGS), str(v))
    payload = getattr(v, "w", None)
    if payload is None:
        payload = getattr(v, "ws", getattr(v, "b", getattr(v, "n", 0)))
    return (tag, payload)


def expr_sort_key(e: Expr):
    """Lexicographic key ranking Const < Var < Func < Equal < UVar.

    Unification variables order last so cancellation commits to concrete
    matches before speculative ones.
    """
    if isinstance(e, Const):
        return (0, _tvar_key(e.t), _value_key(e.value))
    if isinstance(e, Var):
        return (1, e.n)
    if isinstance(e, Func):
        return (2, e.f, tuple(expr_sort_key(a) for a in e.args))
    if isinstance(e, Equal):
        return (3, _tvar_key(e.t), expr_sort_key(e.lhs), expr_sort_key(e.rhs))
    return (4, e.n)  # type: ignore[union-attr]


def atom_sort_key(atom: Atom):
    p, args = atom
    return (p, tuple(expr_sort_key(a) for a in args))


def atom_order(a: Atom, b: Atom) -> int:
    """-1, 0, or 1 comparing two atoms in the cancellation order."""
    ka, kb = atom_sort_key(a), atom_sort_key(b)
    return -1 if ka < kb else (0 if ka == kb else 1)


# ---------------------------------------------------------------------------
# Residuals


@dataclass(frozen=True)
class Residual:
    """What remains of an entailment after cancellation."""

    foralls: tuple[Tvar, ...] = ()
    exists_left: tuple[Tvar, ...] = ()
    subst: Subst = EMPTY_SUBST
    uvar_equations: tuple[tuple[int, Expr], ...] = ()
    lhs_rem: SHeap = SHeap()
    rhs_rem: SHeap = SHeap()
    mem_fault: Optional[int] = None


def _protected_images_ok(s: Subst, protected: int) -> bool:
    # A pre-existing unification variable scopes over the left-hand
    # universals, so its inferred replacement must not mention them.
    for u, img in s.items():
        if u < protected and vars_of(img):
            return False
    return True


def _match_atoms(
    envs: Envs,
    sig_domain: tuple[Tvar, ...],
    lhs_args: tuple[Expr, ...],
    rhs_args: tuple[Expr, ...],
    s: Subst,
    prover: Prover,
    facts: object,
    protected: int,
) -> Optional[Subst]:
    """Try to cancel one lhs/rhs atom pair; None if they cannot match."""
    cand = s
    for t, rx, lx in zip(sig_domain, rhs_args, lhs_args):
        nxt = expr_unify(envs, rx, lx, cand)
        if nxt is not None:
            cand = nxt
            continue
        # unification failed outright: split into equal-denotation
        # obligations and hand those to the prover
        obligations = congruence_split(
            envs, instantiate(cand, lx), instantiate(cand, rx), t
        )
        if not obligations:
            continue
        if not all(
            prover.prove(envs, facts, Equal(ot, ox, oy)) for ot, ox, oy in obligations
        ):
            return None
    if not _protected_images_ok(cand, protected):
        return None
    return cand


def cancel_sheaps(
    envs: Envs,
    lhs: SHeap,
    rhs: SHeap,
    prover: Prover,
    uvar_ctx: Sequence[Tvar],
    protected: int,
) -> Residual:
    """Greedy, non-backtracking cancellation of two normal forms.

    `uvar_ctx` is the full unification-variable context; indices below
    `protected` are pre-existing variables owned by the caller, the rest
    were introduced for conclusion existentials.
    """
    facts = prover.summarize(envs, lhs.pures)
    lhs_atoms = sorted(lhs.atoms(), key=atom_sort_key)
    rhs_atoms = sorted(rhs.atoms(), key=atom_sort_key)

    s = EMPTY_SUBST
    lhs_left = list(lhs_atoms)
    rhs_left: list[Atom] = []
    for rp, rargs in rhs_atoms:
        matched = None
        for i, (lp, largs) in enumerate(lhs_left):
            if lp != rp:
                continue
            cand = _match_atoms(
                envs, envs.preds[rp].domain, largs, rargs, s, prover, facts, protected
            )
            if cand is not None:
                matched = i
                s = cand
                break
        if matched is None:
            rhs_left.append((rp, rargs))
        else:
            del lhs_left[matched]

    inst = lambda e: instantiate(s, e)
    equations = tuple(
        (u, img) for u, img in s.items() if u < protected
    )
    exists_left = tuple(
        uvar_ctx[u]
        for u in range(protected, len(uvar_ctx))
        if u not in s
    )
    lhs_rem = SHeap(
        pures=tuple(inst(e) for e in lhs.pures),
        impures=group_atoms(
            [(p, tuple(inst(a) for a in args)) for p, args in lhs_left]
        ),
        var_binders=lhs.var_binders,
    )
    rhs_rem = SHeap(
        pures=tuple(inst(e) for e in rhs.pures),
        impures=group_atoms(
            [(p, tuple(inst(a) for a in args)) for p, args in rhs_left]
        ),
    )
    return Residual(
        foralls=lhs.var_binders,
        exists_left=exists_left,
        subst=s,
        uvar_equations=equations,
        lhs_rem=lhs_rem,
        rhs_rem=rhs_rem,
    )


def cancel(
    envs: Envs,
    lhs: Sexpr,
    rhs: Sexpr,
    prover: Prover,
    pre_uvars: Sequence[Tvar],
) -> Residual:
    """Normalize both sides and cancel; never fails, only leaves residue."""
    nl = normalize(lhs)
    nr = uvarize(normalize(rhs), len(pre_uvars))
    uvar_ctx = tuple(pre_uvars) + nr.uvar_binders
    return cancel_sheaps(envs, nl, nr, prover, uvar_ctx, len(pre_uvars))


def residual_trivial(envs: Envs, r: Residual, prover: Prover) -> bool:
    """Is the residual closed: no atoms left and every obligation proved?"""
    if r.mem_fault is not None:
        return False
    if r.lhs_rem.atom_count() or r.rhs_rem.atom_count():
        return False
    facts = prover.summarize(envs, r.lhs_rem.pures)
    return all(
        prover.prove(envs, facts, instantiate(r.subst, e)) for e in r.rhs_rem.pures
    )
