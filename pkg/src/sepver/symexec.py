"""Strongest-postcondition symbolic execution for a small register machine.

Straight-line instruction sequences only; callers encode branches as
per-path Assume prefixes.  Memory accesses go through pluggable memory
evaluators that reason about heap atoms directly; when an access fails,
the heap is refined once with forward hints and the access retried.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional, Sequence, Union

from .cancel import Residual, SHeap, cancel_sheaps, group_atoms, normalize, uvarize
from .hints import BACKWARD, FORWARD, HintDatabase, TraceEvent, UnfoldState, unfold
from .model import Heap, Interp, Word, PropV, denote_expr
from .provers import Prover
from .terms import (
    PROP,
    Const,
    Envs,
    Equal,
    Expr,
    Func,
    Sexpr,
    Tvar,
    expr_syntactic_eq,
    iter_subexprs,
    subst_funcs,
)


class SymexecError(Exception):
    """Malformed program or state, e.g. a register read before assignment."""


# ---------------------------------------------------------------------------
# Instructions


class Instr:
    __slots__ = ()


@dataclass(frozen=True)
class Assign(Instr):
    reg: str
    e: Expr


@dataclass(frozen=True)
class Read(Instr):
    reg: str
    addr: Expr


@dataclass(frozen=True)
class Write(Instr):
    addr: Expr
    val: Expr


@dataclass(frozen=True)
class Assume(Instr):
    cond: Expr


@dataclass(frozen=True)
class MemFault:
    at: int


@dataclass(frozen=True)
class SymState:
    regs: Mapping[str, Expr]
    heap: SHeap
    pures: tuple[Expr, ...] = ()
    vars: tuple[Tvar, ...] = ()
    uvars: tuple[Tvar, ...] = ()
    reg_funcs: Mapping[str, int] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Memory evaluators


@dataclass(frozen=True)
class MemEvaluator:
    name: str
    sread: Callable[[Envs, Prover, object, SHeap, Expr], Optional[Expr]]
    swrite: Callable[[Envs, Prover, object, SHeap, Expr, Expr], Optional[SHeap]]


def _addr_matches(
    envs: Envs, prover: Prover, facts: object, addr: Expr, atom_addr: Expr, t: Tvar
) -> bool:
    if expr_syntactic_eq(envs, addr, atom_addr):
        return True
    return prover.prove(envs, facts, Equal(t, addr, atom_addr))


def ptsto_eval() -> MemEvaluator:
    """Reads and writes against single points-to atoms."""

    def locate(envs, prover, facts, heap: SHeap, addr: Expr):
        p = envs.pred_by_interp("ptsto")
        if p is None:
            return None
        t = envs.preds[p].domain[0]
        for i, args in enumerate(heap.impures.get(p, ())):
            if _addr_matches(envs, prover, facts, addr, args[0], t):
                return p, i, args
        return None

    def sread(envs, prover, facts, heap, addr):
        got = locate(envs, prover, facts, heap, addr)
        return got[2][1] if got else None

    def swrite(envs, prover, facts, heap, addr, val):
        got = locate(envs, prover, facts, heap, addr)
        if got is None:
            return None
        p, i, args = got
        atoms = heap.atoms()
        atoms[atoms.index((p, args))] = (p, (args[0], val))
        return heap.with_atoms(atoms)

    return MemEvaluator("ptsto", sread, swrite)


def _array_index(
    envs: Envs, prover: Prover, facts: object, addr: Expr, base: Expr, t: Tvar
) -> Optional[Expr]:
    """Index i with addr = base + 4*i, or None if the shape is unfamiliar."""
    word = lambda n: Const(t, Word(n))
    if _addr_matches(envs, prover, facts, addr, base, t):
        return word(0)
    if not isinstance(addr, Func) or len(addr.args) != 2:
        return None
    if envs.funcs[addr.f].interp != "word_plus":
        return None
    b, off = addr.args
    if not _addr_matches(envs, prover, facts, b, base, t):
        return None
    if isinstance(off, Const) and isinstance(off.value, Word):
        k = off.value.w
        return word(k // 4) if k % 4 == 0 else None
    if isinstance(off, Func) and len(off.args) == 2:
        if envs.funcs[off.f].interp == "word_mult":
            x, y = off.args
            if isinstance(x, Const) and x.value == Word(4):
                return y
            if isinstance(y, Const) and y.value == Word(4):
                return x
    return None


def array_eval() -> MemEvaluator:
    """Word-granularity reads and writes against whole-array atoms."""

    def locate(envs: Envs, prover, facts, heap: SHeap, addr: Expr):
        p = envs.pred_by_interp("array")
        lt = envs.func_by_interp("word_lt")
        ln = envs.func_by_interp("seq_len")
        if p is None or lt is None or ln is None:
            return None
        t = envs.preds[p].domain[1]
        for args in heap.impures.get(p, ()):
            ws, base = args
            i = _array_index(envs, prover, facts, addr, base, t)
            if i is None:
                continue
            in_bounds = Func(lt, (i, Func(ln, (ws,))))
            if prover.prove(envs, facts, in_bounds):
                return p, args, i
        return None

    def sread(envs, prover, facts, heap, addr):
        got = locate(envs, prover, facts, heap, addr)
        if got is None:
            return None
        sel = envs.func_by_interp("seq_sel")
        if sel is None:
            return None
        _, (ws, _base), i = got
        return Func(sel, (ws, i))

    def swrite(envs, prover, facts, heap, addr, val):
        got = locate(envs, prover, facts, heap, addr)
        if got is None:
            return None
        upd = envs.func_by_interp("seq_upd")
        if upd is None:
            return None
        p, args, i = got
        atoms = heap.atoms()
        atoms[atoms.index((p, args))] = (p, (Func(upd, (args[0], i, val)), args[1]))
        return heap.with_atoms(atoms)

    return MemEvaluator("array", sread, swrite)


def compose_mem_evals(m1: MemEvaluator, m2: MemEvaluator) -> MemEvaluator:
    """First-wins composition for both reads and writes."""

    def sread(envs, prover, facts, heap, addr):
        got = m1.sread(envs, prover, facts, heap, addr)
        return got if got is not None else m2.sread(envs, prover, facts, heap, addr)

    def swrite(envs, prover, facts, heap, addr, val):
        got = m1.swrite(envs, prover, facts, heap, addr, val)
        return (
            got if got is not None else m2.swrite(envs, prover, facts, heap, addr, val)
        )

    return MemEvaluator(f"{m1.name}+{m2.name}", sread, swrite)


MEMEVAL_FACTORIES: dict[str, Callable[[], MemEvaluator]] = {
    "ptsto": ptsto_eval,
    "array": array_eval,
}


def resolve_memeval(name: str) -> MemEvaluator:
    parts = []
    for part in dict.fromkeys(p.strip() for p in name.split("+")):
        if not part:
            continue
        if part not in MEMEVAL_FACTORIES:
            raise KeyError(f"unknown memory evaluator: {part}")
        parts.append(MEMEVAL_FACTORIES[part]())
    if not parts:
        raise KeyError(f"no memory evaluator named in: {name!r}")
    m = parts[0]
    for q in parts[1:]:
        m = compose_mem_evals(m, q)
    return m


# ---------------------------------------------------------------------------
# Execution


def _resolve_regs(st: SymState, e: Expr) -> Expr:
    idx_to_val: dict[int, Expr] = {}
    for name, idx in st.reg_funcs.items():
        if name in st.regs:
            idx_to_val[idx] = st.regs[name]
    out = subst_funcs(e, idx_to_val)
    unassigned = {idx for idx in st.reg_funcs.values()} - set(idx_to_val)
    for sub in iter_subexprs(out):
        if isinstance(sub, Func) and not sub.args and sub.f in unassigned:
            raise SymexecError(f"register read before assignment: {sub.f}")
    return out


def _refine(
    envs: Envs,
    st: SymState,
    db: HintDatabase,
    prover: Prover,
    fuel: int,
    trace: Optional[list[TraceEvent]],
) -> SymState:
    u = unfold(
        envs,
        UnfoldState(vars=st.vars, uvars=st.uvars, pures=st.pures, heap=st.heap),
        db,
        FORWARD,
        fuel,
        prover,
        trace,
    )
    return replace(st, vars=u.vars, uvars=u.uvars, heap=u.heap)


def sym_exec(
    envs: Envs,
    st: SymState,
    prog: Sequence[Instr],
    mev: MemEvaluator,
    prover: Prover,
    db: HintDatabase,
    fuel: int = 10,
    trace: Optional[list[TraceEvent]] = None,
) -> Union[SymState, MemFault]:
    """Interpret instructions over a symbolic state; MemFault on an access
    no memory evaluator can justify."""

    def facts(state: SymState):
        return prover.summarize(envs, state.pures + state.heap.pures)

    for idx, ins in enumerate(prog):
        if isinstance(ins, Assign):
            v = _resolve_regs(st, ins.e)
            st = replace(st, regs={**st.regs, ins.reg: v})
        elif isinstance(ins, Assume):
            st = replace(st, pures=st.pures + (_resolve_regs(st, ins.cond),))
        elif isinstance(ins, Read):
            addr = _resolve_regs(st, ins.addr)
            got = mev.sread(envs, prover, facts(st), st.heap, addr)
            if got is None:
                st = _refine(envs, st, db, prover, fuel, trace)
                got = mev.sread(envs, prover, facts(st), st.heap, addr)
            if got is None:
                return MemFault(idx)
            st = replace(st, regs={**st.regs, ins.reg: got})
            if trace is not None:
                trace.append(TraceEvent(phase="exec", description=f"read@{idx}"))
        elif isinstance(ins, Write):
            addr = _resolve_regs(st, ins.addr)
            val = _resolve_regs(st, ins.val)
            got = mev.swrite(envs, prover, facts(st), st.heap, addr, val)
            if got is None:
                st = _refine(envs, st, db, prover, fuel, trace)
                got = mev.swrite(envs, prover, facts(st), st.heap, addr, val)
            if got is None:
                return MemFault(idx)
            st = replace(st, heap=got)
            if trace is not None:
                trace.append(TraceEvent(phase="exec", description=f"write@{idx}"))
        else:
            raise SymexecError(f"unknown instruction: {ins!r}")
    return st


def verify_block(
    envs: Envs,
    pre: Sexpr,
    prog: Sequence[Instr],
    post: Sexpr,
    db: HintDatabase,
    prover: Prover,
    mev: MemEvaluator,
    *,
    fuel: int = 10,
    pre_uvars: Sequence[Tvar] = (),
    reg_funcs: Mapping[str, int] = {},
    trace: Optional[list[TraceEvent]] = None,
) -> Residual:
    """Forward-unfold, execute, backward-unfold the postcondition, cancel."""
    npre = normalize(pre)
    st = SymState(
        regs={},
        heap=npre,
        pures=(),
        vars=npre.var_binders,
        uvars=tuple(pre_uvars),
        reg_funcs=dict(reg_funcs),
    )
    st = _refine(envs, st, db, prover, fuel, trace)
    got = sym_exec(envs, st, prog, mev, prover, db, fuel=fuel, trace=trace)
    if isinstance(got, MemFault):
        return Residual(mem_fault=got.at)
    st = got

    npost = normalize(post)
    reg_ids = set(reg_funcs.values())
    post_exprs = list(npost.pures) + [a for _, args in npost.atoms() for a in args]
    for e in post_exprs:
        for sub in iter_subexprs(e):
            if isinstance(sub, Func) and not sub.args and sub.f in reg_ids:
                raise SymexecError("postcondition mentions a register")

    lhs = SHeap(
        pures=st.heap.pures + st.pures,
        impures=st.heap.impures,
        var_binders=st.vars,
    )
    rhs = uvarize(npost, len(pre_uvars))
    bstate = unfold(
        envs,
        UnfoldState(
            vars=(),
            uvars=tuple(pre_uvars) + rhs.uvar_binders,
            pures=lhs.pures,
            heap=rhs,
        ),
        db,
        BACKWARD,
        fuel,
        prover,
        trace,
    )
    return cancel_sheaps(
        envs, lhs, bstate.heap, prover, bstate.uvars, len(tuple(pre_uvars))
    )


# ---------------------------------------------------------------------------
# Concrete execution, used to cross-check symbolic results


def run_concrete(
    envs: Envs,
    interp: Interp,
    prog: Sequence[Instr],
    reg_funcs: Mapping[str, int],
    regs0: Mapping[str, int],
    heap0: Heap,
    word_t: Tvar,
    uvar_values: Sequence[tuple[Tvar, object]] = (),
) -> tuple[str, object]:
    """Execute concretely: ('ok', (regs, heap)) | ('fault', i) | ('infeasible', i)."""
    regs = dict(regs0)
    h = heap0

    def ev(e: Expr, t: Tvar):
        ext = {
            envs.funcs[idx].interp: (lambda w: (lambda: Word(w)))(regs[name])
            for name, idx in reg_funcs.items()
            if name in regs
        }
        return denote_expr(envs, interp.extend(funcs=ext), uvar_values, (), e, t)

    for idx, ins in enumerate(prog):
        if isinstance(ins, Assign):
            v = ev(ins.e, word_t)
            if not isinstance(v, Word):
                raise SymexecError(f"assign of non-word at {idx}")
            regs[ins.reg] = v.w
        elif isinstance(ins, Assume):
            v = ev(ins.cond, PROP)
            if v != PropV(True):
                return "infeasible", idx
        elif isinstance(ins, Read):
            a = ev(ins.addr, word_t)
            if not isinstance(a, Word) or h.read(a.w) is None:
                return "fault", idx
            regs[ins.reg] = h.read(a.w)  # type: ignore[assignment]
        elif isinstance(ins, Write):
            a = ev(ins.addr, word_t)
            v = ev(ins.val, word_t)
            if not isinstance(a, Word) or not isinstance(v, Word):
                return "fault", idx
            if h.read(a.w) is None:
                return "fault", idx
            h = h.write(a.w, v.w)
    return "ok", (regs, h)
