"""Hint databases: environment constraints, refinement lemmas, unfolding.

A database pins parts of the type/function/predicate environments by
position, so lemma terms built against the database stay valid in any
environment the constraints have been applied to.  Compatible databases
compose; their lemmas concatenate and their provers combine
disjunctively.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Generic, Optional, Sequence, TypeVar

from .cancel import SHeap, group_atoms, normalize
from .model import Interp, ModelBounds, all_pures_hold, entails_oracle
from .provers import Prover
from .terms import (
    PROP,
    Const,
    Envs,
    Expr,
    FuncSig,
    PredSig,
    Sexpr,
    Tvar,
    TypeDecl,
    UVar,
    Var,
    subst_expr,
    subst_vars,
    subst_vars_sexpr,
    typecheck_expr,
    typecheck_sexpr,
    uvars_of,
)
from .unify import EMPTY_SUBST, expr_unify, instantiate

T = TypeVar("T")

Constraint = tuple  # tuple[Optional[T], ...]

FORWARD = "forward"
BACKWARD = "backward"

# Defaults used when a constraint reaches past the given environment.
DEFAULT_TYPE = TypeDecl("_pad", "word_eq")
DEFAULT_FUNC = FuncSig("_pad", (), PROP, "prop_true")
DEFAULT_PRED = PredSig("_pad", (), "emp")


def apply_constraint(c: Sequence[Optional[T]], e: Sequence[T], default: T) -> tuple[T, ...]:
    """Rebuild `e` so it satisfies `c`: required entries win positionally."""
    out: list[T] = []
    for i, want in enumerate(c):
        if want is not None:
            out.append(want)
        elif i < len(e):
            out.append(e[i])
        else:
            out.append(default)
    out.extend(e[len(c) :])
    return tuple(out)


def compatible(c1: Sequence[Optional[T]], c2: Sequence[Optional[T]]) -> bool:
    return all(
        a is None or b is None or a == b for a, b in zip(c1, c2)
    )


def merge(
    c1: Sequence[Optional[T]], c2: Sequence[Optional[T]]
) -> Optional[tuple[Optional[T], ...]]:
    if not compatible(c1, c2):
        return None
    n = max(len(c1), len(c2))
    out: list[Optional[T]] = []
    for i in range(n):
        a = c1[i] if i < len(c1) else None
        b = c2[i] if i < len(c2) else None
        out.append(a if a is not None else b)
    return tuple(out)


def satisfies(c: Sequence[Optional[T]], e: Sequence[T]) -> bool:
    return len(e) >= len(c) and all(
        want is None or e[i] == want for i, want in enumerate(c)
    )


# ---------------------------------------------------------------------------
# Lemmas and databases


@dataclass(frozen=True)
class HintLemma:
    """A quantified heap implication lhs ==> rhs with pure side conditions.

    `binders[i]` is the sort of Var i inside all components.  Forward
    lemmas rewrite hypotheses left-to-right; backward lemmas rewrite
    conclusions right-to-left.
    """

    name: str
    binders: tuple[Tvar, ...]
    pures: tuple[Expr, ...]
    lhs: Sexpr
    rhs: Sexpr
    direction: str

    def typechecks(self, envs: Envs) -> bool:
        return (
            all(typecheck_expr(envs, self.binders, (), p) == PROP for p in self.pures)
            and typecheck_sexpr(envs, self.binders, (), self.lhs)
            and typecheck_sexpr(envs, self.binders, (), self.rhs)
        )


@dataclass(frozen=True)
class HintDatabase:
    name: str = "empty"
    tconstraint: tuple = ()
    fconstraint: tuple = ()
    pconstraint: tuple = ()
    lemmas: tuple[HintLemma, ...] = ()
    prover: str = "reflexivity+assumption"
    memevals: tuple[str, ...] = ()
    validated_at: Optional[str] = None

    def seed_envs(self) -> Envs:
        return self.constrain(Envs())

    def constrain(self, envs: Envs) -> Envs:
        return Envs(
            types=apply_constraint(self.tconstraint, envs.types, DEFAULT_TYPE),
            funcs=apply_constraint(self.fconstraint, envs.funcs, DEFAULT_FUNC),
            preds=apply_constraint(self.pconstraint, envs.preds, DEFAULT_PRED),
        )


def empty_db() -> HintDatabase:
    return HintDatabase()


def compose_db(d1: HintDatabase, d2: HintDatabase) -> Optional[HintDatabase]:
    """Merge two databases; None when their constraints clash."""
    tc = merge(d1.tconstraint, d2.tconstraint)
    fc = merge(d1.fconstraint, d2.fconstraint)
    pc = merge(d1.pconstraint, d2.pconstraint)
    if tc is None or fc is None or pc is None:
        return None
    provers = list(dict.fromkeys(d1.prover.split("+") + d2.prover.split("+")))
    memevals = tuple(dict.fromkeys(d1.memevals + d2.memevals))
    return HintDatabase(
        name=f"{d1.name}+{d2.name}",
        tconstraint=tc,
        fconstraint=fc,
        pconstraint=pc,
        lemmas=d1.lemmas + d2.lemmas,
        prover="+".join(p for p in provers if p),
        memevals=memevals,
    )


# ---------------------------------------------------------------------------
# Lemma validation against the model


def validate_lemma(
    envs: Envs, interp: Interp, lem: HintLemma, bounds: ModelBounds
) -> bool:
    """Bounded model check: under every sampled binder assignment whose
    side conditions hold, the left side must entail the right side."""
    from .model import iter_assignments

    for assignment in iter_assignments(lem.binders, bounds):
        ground = {i: Const(t, v) for i, (t, v) in enumerate(assignment)}
        pures = [subst_vars(p, ground) for p in lem.pures]
        if not all_pures_hold(envs, interp, (), (), pures):
            continue
        lhs = subst_vars_sexpr(lem.lhs, ground)
        rhs = subst_vars_sexpr(lem.rhs, ground)
        if not entails_oracle(envs, interp, (), lhs, rhs, bounds):
            return False
    return True


# ---------------------------------------------------------------------------
# Unfolding


@dataclass(frozen=True)
class UnfoldState:
    """One side of a goal mid-refinement.

    `pures` are ambient assumptions usable to discharge side conditions;
    the heap's own pures are hypotheses when unfolding forward and
    obligations when unfolding backward.
    """

    vars: tuple[Tvar, ...] = ()
    uvars: tuple[Tvar, ...] = ()
    pures: tuple[Expr, ...] = ()
    heap: SHeap = SHeap()


@dataclass
class TraceEvent:
    phase: str
    description: str
    before: str = ""
    after: str = ""


def _single_atom_pattern(side: Sexpr) -> Optional[tuple[int, tuple[Expr, ...]]]:
    # unfolding matches one heap atom at a time; lemmas whose matching
    # side is not a lone predicate atom are validation-only
    sh = normalize(side)
    if sh.var_binders or sh.pures or sh.atom_count() != 1:
        return None
    return sh.atoms()[0]


def _try_apply(
    envs: Envs,
    state: UnfoldState,
    lem: HintLemma,
    pred: int,
    args: tuple[Expr, ...],
    prover: Prover,
    direction: str,
) -> Optional[tuple[UnfoldState, str]]:
    pattern = _single_atom_pattern(lem.lhs if direction == FORWARD else lem.rhs)
    if pattern is None or pattern[0] != pred:
        return None
    k = len(lem.binders)
    base = len(state.uvars)
    temp = {i: UVar(base + i) for i in range(k)}
    s = EMPTY_SUBST
    for px, ax in zip(pattern[1], args):
        nxt = expr_unify(envs, subst_vars(px, temp), ax, s)
        if nxt is None:
            return None
        s = nxt
    if any(u < base for u in s.domain()):
        # matching may only determine lemma binders, not goal variables
        return None

    images = [instantiate(s, UVar(base + i)) for i in range(k)]
    unresolved = [i for i in range(k) if images[i] == UVar(base + i)]

    other = lem.rhs if direction == FORWARD else lem.lhs
    osh = normalize(other)
    m = len(osh.var_binders)

    new_vars = state.vars
    new_uvars = state.uvars
    fresh: dict[int, Expr] = {}
    if direction == FORWARD:
        for i in unresolved:
            fresh[i] = Var(len(new_vars))
            new_vars = new_vars + (lem.binders[i],)
        hoisted = {j: Var(len(new_vars) + j) for j in range(m)}
        new_vars = new_vars + osh.var_binders
    else:
        for i in unresolved:
            fresh[i] = UVar(len(new_uvars))
            new_uvars = new_uvars + (lem.binders[i],)
        hoisted = {j: UVar(len(new_uvars) + j) for j in range(m)}
        new_uvars = new_uvars + osh.var_binders

    # fully resolved binder images (unresolved ones now point at fresh symbols)
    temp_fix = {base + i: fresh[i] for i in unresolved}
    binder_img = {
        m + i: subst_expr(images[i], temp_fix) for i in range(k)
    }
    mapping = {**hoisted, **binder_img}

    side_conditions = [
        subst_vars(p, {i: binder_img[m + i] for i in range(k)}) for p in lem.pures
    ]
    facts_pool = (
        state.pures + state.heap.pures if direction == FORWARD else state.pures
    )
    facts = prover.summarize(envs, facts_pool)
    leftover: list[Expr] = []
    for cond in side_conditions:
        if prover.prove(envs, facts, cond):
            continue
        if direction == FORWARD:
            return None  # hypotheses may not assume unproved conditions
        leftover.append(cond)  # becomes an obligation on the conclusion

    atoms = state.heap.atoms()
    atoms.remove((pred, args))
    new_atoms = [
        (p, tuple(subst_vars(a, mapping) for a in aa)) for p, aa in osh.atoms()
    ]
    new_pures = tuple(subst_vars(p, mapping) for p in osh.pures)

    heap = SHeap(
        pures=state.heap.pures + new_pures + tuple(leftover),
        impures=group_atoms(atoms + new_atoms),
        var_binders=state.heap.var_binders,
        uvar_binders=state.heap.uvar_binders,
    )
    out = UnfoldState(vars=new_vars, uvars=new_uvars, pures=state.pures, heap=heap)
    return out, lem.name


def unfold(
    envs: Envs,
    state: UnfoldState,
    db: HintDatabase,
    direction: str,
    fuel: int,
    prover: Prover,
    trace: Optional[list[TraceEvent]] = None,
) -> UnfoldState:
    """Rewrite heap atoms with matching lemmas until fixpoint or fuel runs out.

    Deterministic order: atoms in heap order, lemmas in registration
    order; the first applicable pair fires each round.  Conclusion-side
    existentials hoist as fresh unification variables, hypothesis-side
    ones as fresh variables.
    """
    lemmas = [l for l in db.lemmas if l.direction == direction]
    while fuel > 0:
        applied = None
        for pred, args in state.heap.atoms():
            for lem in lemmas:
                got = _try_apply(envs, state, lem, pred, args, prover, direction)
                if got is not None:
                    applied = got
                    break
            if applied is not None:
                break
        if applied is None:
            break
        state, lem_name = applied
        fuel -= 1
        if trace is not None:
            trace.append(
                TraceEvent(
                    phase="unfold",
                    description=f"{direction} {lem_name}",
                )
            )
    return state
