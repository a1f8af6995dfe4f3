"""Pluggable provers for pure proof goals.

Each prover summarizes the assumed pure facts once into a digest and then
answers individual goals against that digest.  Provers are total and
sound but deliberately incomplete: false means "not proved", never
"disproved".  Composition is disjunctive.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from .model import Word
from .terms import (
    Const,
    Envs,
    Equal,
    Expr,
    Func,
    Tvar,
    expr_syntactic_eq,
)

WORD_MOD = 1 << 32

Facts = object


@dataclass(frozen=True)
class Prover:
    name: str
    summarize: Callable[[Envs, Sequence[Expr]], Facts]
    prove: Callable[[Envs, Facts, Expr], bool]


# ---------------------------------------------------------------------------
# Reflexivity and assumptions


def reflexivity_prover() -> Prover:
    """Proves goals of the shape e = e, syntactically."""

    def prove(envs: Envs, facts: Facts, goal: Expr) -> bool:
        return isinstance(goal, Equal) and expr_syntactic_eq(envs, goal.lhs, goal.rhs)

    return Prover("reflexivity", lambda envs, pures: None, prove)


def assumption_prover() -> Prover:
    """Proves goals that syntactically match an assumed fact."""

    def summarize(envs: Envs, pures: Sequence[Expr]) -> Facts:
        return tuple(pures)

    def prove(envs: Envs, facts: Facts, goal: Expr) -> bool:
        return any(expr_syntactic_eq(envs, goal, f) for f in facts)  # type: ignore[union-attr]

    return Prover("assumption", summarize, prove)


# ---------------------------------------------------------------------------
# Word prover: equality chains e1 = e2 + k over 32-bit words


class _ConstBase:
    """Sentinel key all word constants reduce to in the offset union-find."""

    def __repr__(self) -> str:
        return "<const>"


_CONST_BASE = _ConstBase()


def _split_offset(envs: Envs, e: Expr) -> tuple[object, int]:
    """Decompose into (base, k) with e = base + k mod 2^32."""
    k = 0
    while isinstance(e, Func) and len(e.args) == 2:
        interp = envs.funcs[e.f].interp if e.f < len(envs.funcs) else ""
        a, b = e.args
        if interp == "word_plus":
            if isinstance(b, Const) and isinstance(b.value, Word):
                e, k = a, (k + b.value.w) % WORD_MOD
                continue
            if isinstance(a, Const) and isinstance(a.value, Word):
                e, k = b, (k + a.value.w) % WORD_MOD
                continue
        if interp == "word_minus" and isinstance(b, Const) and isinstance(b.value, Word):
            e, k = a, (k - b.value.w) % WORD_MOD
            continue
        break
    if isinstance(e, Const) and isinstance(e.value, Word):
        return _CONST_BASE, (k + e.value.w) % WORD_MOD
    return e, k


@dataclass(frozen=True)
class WordFacts:
    parent: dict  # key -> (parent key, offset), with key = parent + offset
    contradictory: bool


def _find(parent: dict, key) -> tuple[object, int]:
    off = 0
    while key in parent:
        key, step = parent[key]
        off = (off + step) % WORD_MOD
    return key, off


def word_prover() -> Prover:
    """Linear word arithmetic over hypotheses of the shape e1 = e2 + k."""

    def summarize(envs: Envs, pures: Sequence[Expr]) -> Facts:
        parent: dict = {}
        contradictory = False
        for e in pures:
            if not isinstance(e, Equal):
                continue
            ba, ka = _split_offset(envs, e.lhs)
            bb, kb = _split_offset(envs, e.rhs)
            # e.lhs = e.rhs means ba + ka = bb + kb
            ra, oa = _find(parent, ba)
            rb, ob = _find(parent, bb)
            if ra == rb:
                if (oa + ka) % WORD_MOD != (ob + kb) % WORD_MOD:
                    contradictory = True
            else:
                parent[ra] = (rb, (ob + kb - oa - ka) % WORD_MOD)
        return WordFacts(parent, contradictory)

    def prove(envs: Envs, facts: Facts, goal: Expr) -> bool:
        assert isinstance(facts, WordFacts)
        if facts.contradictory:
            return True  # vacuous: no assignment satisfies the hypotheses
        if not isinstance(goal, Equal):
            return False
        ba, ka = _split_offset(envs, goal.lhs)
        bb, kb = _split_offset(envs, goal.rhs)
        ra, oa = _find(facts.parent, ba)
        rb, ob = _find(facts.parent, bb)
        return ra == rb and (oa + ka) % WORD_MOD == (ob + kb) % WORD_MOD

    return Prover("word", summarize, prove)


# ---------------------------------------------------------------------------
# Array-bounds prover: i < len(arr), closed under arr updates


def _strip_upds(envs: Envs, e: Expr) -> Expr:
    while (
        isinstance(e, Func)
        and e.f < len(envs.funcs)
        and envs.funcs[e.f].interp == "seq_upd"
        and len(e.args) == 3
    ):
        e = e.args[0]
    return e


def _as_len_bound(envs: Envs, e: Expr) -> Optional[tuple[Expr, Expr]]:
    # shape: lt(i, len(arr)) via the word_lt / seq_len interpretations
    if not (isinstance(e, Func) and e.f < len(envs.funcs) and len(e.args) == 2):
        return None
    if envs.funcs[e.f].interp != "word_lt":
        return None
    i, ln = e.args
    if not (
        isinstance(ln, Func)
        and ln.f < len(envs.funcs)
        and envs.funcs[ln.f].interp == "seq_len"
        and len(ln.args) == 1
    ):
        return None
    return i, _strip_upds(envs, ln.args[0])


def bounds_prover() -> Prover:
    """Array bounds: i < len(e) when e is a known array modulo updates."""

    def summarize(envs: Envs, pures: Sequence[Expr]) -> Facts:
        out = []
        for e in pures:
            got = _as_len_bound(envs, e)
            if got is not None:
                out.append(got)
        return tuple(out)

    def prove(envs: Envs, facts: Facts, goal: Expr) -> bool:
        got = _as_len_bound(envs, goal)
        if got is None:
            return False
        i, arr = got
        return any(
            expr_syntactic_eq(envs, i, fi) and expr_syntactic_eq(envs, arr, fa)
            for fi, fa in facts  # type: ignore[union-attr]
        )

    return Prover("bounds", summarize, prove)


# ---------------------------------------------------------------------------
# Composition and lookup


def compose_provers(p1: Prover, p2: Prover) -> Prover:
    """Disjunctive composition: provable if either component proves it."""

    def summarize(envs: Envs, pures: Sequence[Expr]) -> Facts:
        return (p1.summarize(envs, pures), p2.summarize(envs, pures))

    def prove(envs: Envs, facts: Facts, goal: Expr) -> bool:
        f1, f2 = facts  # type: ignore[misc]
        return p1.prove(envs, f1, goal) or p2.prove(envs, f2, goal)

    return Prover(f"{p1.name}+{p2.name}", summarize, prove)


PROVER_FACTORIES: dict[str, Callable[[], Prover]] = {
    "reflexivity": reflexivity_prover,
    "assumption": assumption_prover,
    "word": word_prover,
    "bounds": bounds_prover,
}


def resolve_prover(name: str) -> Prover:
    """Look up a prover by name; `a+b` composes disjunctively."""
    parts = []
    seen = set()
    for part in name.split("+"):
        part = part.strip()
        if not part or part in seen:
            continue
        seen.add(part)
        if part not in PROVER_FACTORIES:
            raise KeyError(f"unknown prover: {part}")
        parts.append(PROVER_FACTORIES[part]())
    if not parts:
        raise KeyError(f"no prover named in: {name!r}")
    p = parts[0]
    for q in parts[1:]:
        p = compose_provers(p, q)
    return p


# ---------------------------------------------------------------------------
# Congruence splitting


def congruence_split(
    envs: Envs, a: Expr, b: Expr, t: Tvar
) -> list[tuple[Tvar, Expr, Expr]]:
    """Residual equality obligations whose truth forces denote(a) = denote(b).

    Matching head symbols recurse into arguments; anything else becomes a
    single obligation.  Worst case is [(t, a, b)] itself.
    """
    if expr_syntactic_eq(envs, a, b):
        return []
    if (
        isinstance(a, Func)
        and isinstance(b, Func)
        and a.f == b.f
        and a.f < len(envs.funcs)
        and len(a.args) == len(b.args)
    ):
        out: list[tuple[Tvar, Expr, Expr]] = []
        for at, x, y in zip(envs.funcs[a.f].domain, a.args, b.args):
            for ob in congruence_split(envs, x, y, at):
                if not any(
                    ot == ob[0]
                    and expr_syntactic_eq(envs, ox, ob[1])
                    and expr_syntactic_eq(envs, oy, ob[2])
                    for ot, ox, oy in out
                ):
                    out.append(ob)
        return out
    if isinstance(a, Equal) and isinstance(b, Equal) and a.t == b.t:
        out = []
        for x, y in ((a.lhs, b.lhs), (a.rhs, b.rhs)):
            for ob in congruence_split(envs, x, y, a.t):
                if not any(
                    ot == ob[0]
                    and expr_syntactic_eq(envs, ox, ob[1])
                    and expr_syntactic_eq(envs, oy, ob[2])
                    for ot, ox, oy in out
                ):
                    out.append(ob)
        return out
    return [(t, a, b)]
