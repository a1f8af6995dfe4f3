"""Orchestration: check / symexec / bench / validate pipelines.

This is the layer the HTTP service and the CLI both call.  Reports are
plain dataclasses with deterministic text rendering; timing information
only appears in benchmark rows, never in check reports.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from dataclasses import replace as dataclasses_replace
from typing import Optional, Sequence

from .cancel import Residual, SHeap, cancel_sheaps, normalize, uvarize
from .goals import (
    GoalFile,
    ParseError,
    load_hint_db,
    parse_goal,
    parse_hint_db,
    render_expr,
    render_sexpr,
    _type_name,
)
from .hints import (
    BACKWARD,
    FORWARD,
    HintDatabase,
    TraceEvent,
    UnfoldState,
    compose_db,
    empty_db,
    unfold,
    validate_lemma,
)
from .model import (
    Heap,
    Interp,
    ModelBounds,
    Value,
    Word,
    builtin_interp,
    default_bounds,
    denote_sexpr,
    first_word_type,
    iter_assignments,
    iter_heaps,
)
from .provers import Prover, resolve_prover
from .symexec import MemFault, SymexecError, resolve_memeval, run_concrete, verify_block
from .terms import Envs, Func, FuncSig, Tvar, UVar
from .unify import Subst, subst_holds


class EngineError(Exception):
    def __init__(self, msg: str, exit_code: int = 2):
        super().__init__(msg)
        self.exit_code = exit_code


@dataclass
class CheckReport:
    verdict: str  # proved | unproved | memfault
    exit_code: int
    unfold_count: int
    report_text: str
    trace: list[TraceEvent] = field(default_factory=list)
    oracle_checked: bool = False
    oracle_agrees: Optional[bool] = None
    residual_goal: Optional[str] = None
    cancel_time_ms: float = 0.0
    total_time_ms: float = 0.0


@dataclass
class BenchRow:
    n: int
    unfold_count: int
    cancel_time_ms: float
    total_time_ms: float
    verdict: str


@dataclass
class LemmaVerdict:
    db: str
    lemma: str
    ok: bool


# ---------------------------------------------------------------------------
# Hint loading


def load_databases(specs: Sequence[str]) -> HintDatabase:
    """Load and compose hint databases by name or path; order matters only
    for lemma precedence."""
    db = empty_db()
    for spec in specs:
        try:
            nxt = load_hint_db(spec)
        except (KeyError, FileNotFoundError) as e:
            raise EngineError(f"cannot load hint database {spec!r}: {e}") from e
        except ParseError as e:
            raise EngineError(f"hint database {spec!r}: {e}") from e
        merged = compose_db(db, nxt)
        if merged is None:
            raise EngineError(
                f"hint database {spec!r} is incompatible with the others"
            )
        db = merged
    return db


def make_bounds(
    envs: Envs,
    max_address: int = 4,
    max_word: int = 3,
    seq_max_len: int = 1,
) -> ModelBounds:
    return default_bounds(
        envs,
        max_address=max_address,
        words=tuple(range(max_word + 1)),
        seq_max_len=seq_max_len,
    )


# ---------------------------------------------------------------------------
# Residual rendering


def _uvar_name_map(protected: int, uvar_ctx: Sequence[Tvar]) -> dict[int, str]:
    return {i: f"?{i}" for i in range(len(uvar_ctx))}


def render_residual(
    envs: Envs, r: Residual, uvar_ctx: Sequence[Tvar], protected: int
) -> str:
    if r.mem_fault is not None:
        return f"memory fault at instruction {r.mem_fault}\n"
    lines: list[str] = []
    forall_names = [f"v{i}" for i in range(len(r.foralls))]
    if r.foralls:
        decls = ", ".join(
            f"{n}:{_type_name(envs, t)}" for n, t in zip(forall_names, r.foralls)
        )
        lines.append(f"forall {decls}")
    exists_idx = [u for u in range(protected, len(uvar_ctx)) if u not in r.subst]
    if exists_idx:
        decls = ", ".join(f"?{u}:{_type_name(envs, uvar_ctx[u])}" for u in exists_idx)
        lines.append(f"exists {decls}")
    for u, e in r.uvar_equations:
        lines.append(f"equation ?{u} = {render_expr(envs, e, forall_names)}")
    lines.append(
        "lhs left: " + render_sexpr(envs, _rem_sexpr(r.lhs_rem), forall_names)
    )
    lines.append(
        "rhs left: " + render_sexpr(envs, _rem_sexpr(r.rhs_rem), forall_names)
    )
    return "\n".join(lines) + "\n"


def _rem_sexpr(sh: SHeap):
    from .cancel import denormalize

    return denormalize(SHeap(pures=sh.pures, impures=sh.impures))


def residual_goal_text(
    envs: Envs, r: Residual, uvar_ctx: Sequence[Tvar], protected: int
) -> str:
    """Serialize the residual as a self-contained goal file.

    Universals become fresh globals; surviving unification variables are
    redeclared.  Feeding the output back to `check` reproduces the
    remaining obligation.
    """
    from .goals import _EQ_CARRIER
    from .terms import subst_vars

    lines: list[str] = []
    for d in envs.types:
        if d.name != "_pad":
            lines.append(f"type {d.name} {_EQ_CARRIER[d.eq_test]}")
    for sig in envs.funcs:
        if sig.name == "_pad" or sig.interp.startswith("reg:"):
            continue
        dom = " ".join(_type_name(envs, t) for t in sig.domain)
        dom = dom + " " if dom else ""
        interp = "global" if sig.interp == f"global:{sig.name}" else sig.interp
        lines.append(f"func {sig.name} : {dom}-> {_type_name(envs, sig.range)} = {interp}")
    fresh_funcs = []
    n_funcs = len(envs.funcs)
    for i, t in enumerate(r.foralls):
        name = f"fv{i}"
        lines.append(f"func {name} : -> {_type_name(envs, t)} = global")
        fresh_funcs.append(FuncSig(name, (), t, f"global:{name}"))
    for sig in envs.preds:
        if sig.name == "_pad":
            continue
        dom = " ".join(_type_name(envs, t) for t in sig.domain)
        lines.append(f"pred {sig.name} : {dom} = {sig.interp}")

    keep = [u for u in range(len(uvar_ctx)) if u not in r.subst]
    remap = {u: i for i, u in enumerate(keep)}
    for u in keep:
        lines.append(f"uvar u{u} : {_type_name(envs, uvar_ctx[u])}")

    wide = Envs(envs.types, envs.funcs + tuple(fresh_funcs), envs.preds)
    var_map = {i: Func(n_funcs + i, ()) for i in range(len(r.foralls))}

    def fix(e):
        out = subst_vars(e, var_map)
        return _remap_uvars(out, remap)

    lhs = _rem_sexpr(r.lhs_rem.map_exprs(fix))
    rhs = _rem_sexpr(r.rhs_rem.map_exprs(fix))
    lines.append(f"lhs {render_sexpr(wide, lhs)}")
    lines.append(f"rhs {render_sexpr(wide, rhs)}")
    return "\n".join(lines) + "\n"


def _remap_uvars(e, remap: dict[int, int]):
    from .terms import Equal, Func as F, UVar as U

    if isinstance(e, U):
        return U(remap.get(e.n, e.n))
    if isinstance(e, F):
        return F(e.f, tuple(_remap_uvars(a, remap) for a in e.args))
    if isinstance(e, Equal):
        return Equal(e.t, _remap_uvars(e.lhs, remap), _remap_uvars(e.rhs, remap))
    return e


# ---------------------------------------------------------------------------
# The check pipeline


def check_goalfile(
    gf: GoalFile,
    db: HintDatabase,
    prover: Prover,
    fuel: int = 10,
    oracle: Optional[ModelBounds] = None,
    interp: Optional[Interp] = None,
) -> CheckReport:
    from .cancel import residual_trivial

    t0 = time.perf_counter()
    trace: list[TraceEvent] = []
    envs = gf.envs
    protected = len(gf.uvar_tvars)

    if gf.kind == "entailment":
        nl = normalize(gf.lhs)
        fstate = UnfoldState(
            vars=nl.var_binders, uvars=gf.uvar_tvars, pures=(), heap=nl
        )
        fstate = unfold(envs, fstate, db, FORWARD, fuel, prover, trace)
        rhs_sh = uvarize(normalize(gf.rhs), protected)
        bstate = UnfoldState(
            vars=(),
            uvars=gf.uvar_tvars + rhs_sh.uvar_binders,
            pures=fstate.heap.pures,
            heap=rhs_sh,
        )
        bstate = unfold(envs, bstate, db, BACKWARD, fuel, prover, trace)
        lhs_sh = SHeap(
            pures=fstate.heap.pures,
            impures=fstate.heap.impures,
            var_binders=fstate.vars,
        )
        tc = time.perf_counter()
        residual = cancel_sheaps(
            envs, lhs_sh, bstate.heap, prover, bstate.uvars, protected
        )
        cancel_ms = (time.perf_counter() - tc) * 1000.0
        uvar_ctx: tuple[Tvar, ...] = bstate.uvars
    else:
        mev_names = "+".join(db.memevals) if db.memevals else "ptsto"
        try:
            mev = resolve_memeval(mev_names)
        except KeyError as e:
            raise EngineError(str(e))
        tc = time.perf_counter()
        try:
            residual = verify_block(
                envs,
                gf.pre,
                gf.program,
                gf.post,
                db,
                prover,
                mev,
                fuel=fuel,
                pre_uvars=gf.uvar_tvars,
                reg_funcs=gf.reg_funcs,
                trace=trace,
            )
        except SymexecError as e:
            raise EngineError(str(e))
        cancel_ms = (time.perf_counter() - tc) * 1000.0
        uvar_ctx = reconstruct_uvar_ctx(gf.uvar_tvars, residual)

    unfold_count = sum(1 for e in trace if e.phase == "unfold")
    trivial = residual.mem_fault is None and residual_trivial(envs, residual, prover)

    if residual.mem_fault is not None:
        verdict, exit_code = "memfault", 1
    elif trivial:
        verdict, exit_code = "proved", 0
    else:
        verdict, exit_code = "unproved", 1

    lines = [f"verdict: {verdict}", f"unfolds: {unfold_count}"]
    residual_goal = None
    if not trivial:
        lines.append("residual:")
        body = render_residual(envs, residual, uvar_ctx, protected)
        lines.extend("  " + ln for ln in body.splitlines())
        if residual.mem_fault is None:
            residual_goal = residual_goal_text(envs, residual, uvar_ctx, protected)

    oracle_checked = False
    oracle_agrees: Optional[bool] = None
    if oracle is not None and verdict == "proved":
        oracle_checked = True
        oracle_agrees = oracle_confirms(
            gf, residual, oracle, interp or builtin_interp()
        )
        lines.append(f"oracle: {'agrees' if oracle_agrees else 'DISAGREES'}")
        if not oracle_agrees:
            verdict, exit_code = "unsound", 3

    total_ms = (time.perf_counter() - t0) * 1000.0
    return CheckReport(
        verdict=verdict,
        exit_code=exit_code,
        unfold_count=unfold_count,
        report_text="\n".join(lines) + "\n",
        trace=trace,
        oracle_checked=oracle_checked,
        oracle_agrees=oracle_agrees,
        residual_goal=residual_goal,
        cancel_time_ms=cancel_ms,
        total_time_ms=total_ms,
    )


def reconstruct_uvar_ctx(
    pre_uvars: Sequence[Tvar], residual: Residual
) -> tuple[Tvar, ...]:
    """Recover the unification-variable context a residual was built in.

    Fresh indices were allocated contiguously after the protected prefix;
    solved ones were substituted away, so their sorts are irrelevant and
    get a placeholder.  Unsolved ones carry the exists_left sorts in order.
    """
    from .terms import PROP

    protected = len(pre_uvars)
    bound_fresh = sum(1 for u in residual.subst.domain() if u >= protected)
    n = protected + bound_fresh + len(residual.exists_left)
    ctx: list[Tvar] = list(pre_uvars)
    unbound = iter(residual.exists_left)
    for u in range(protected, n):
        ctx.append(PROP if u in residual.subst else next(unbound))
    return tuple(ctx)


def run_check(
    goal_text: str,
    hint_specs: Sequence[str] = (),
    prover_name: Optional[str] = None,
    fuel: int = 10,
    validate: bool = False,
    with_oracle: bool = False,
    oracle_max_address: int = 4,
    oracle_max_word: int = 3,
) -> CheckReport:
    db = load_databases(hint_specs)
    try:
        gf = parse_goal(goal_text, db)
    except ParseError as e:
        raise EngineError(f"goal: {e}")
    try:
        prover = resolve_prover(prover_name or db.prover)
    except KeyError as e:
        raise EngineError(str(e))
    interp = builtin_interp()
    if validate:
        bounds = make_bounds(gf.envs, oracle_max_address, oracle_max_word)
        bad = [
            lem.name
            for lem in db.lemmas
            if not validate_lemma(gf.envs, interp, lem, bounds)
        ]
        if bad:
            raise EngineError(f"hint validation failed: {', '.join(bad)}")
    bounds = (
        make_bounds(gf.envs, oracle_max_address, oracle_max_word)
        if with_oracle
        else None
    )
    return check_goalfile(gf, db, prover, fuel=fuel, oracle=bounds, interp=interp)


# ---------------------------------------------------------------------------
# Oracle cross-checking


def goal_globals(gf: GoalFile) -> list[FuncSig]:
    return [
        sig
        for sig in gf.envs.funcs
        if sig.interp.startswith("global:") and not sig.domain
    ]


def _global_assignments(gf: GoalFile, bounds: ModelBounds):
    gs = goal_globals(gf)
    pools = [bounds.samples_for(sig.range) for sig in gs]
    for choice in itertools.product(*pools):
        yield {
            sig.interp: (lambda v: (lambda: v))(val) for sig, val in zip(gs, choice)
        }


def oracle_confirms(
    gf: GoalFile,
    residual: Residual,
    bounds: ModelBounds,
    interp: Optional[Interp] = None,
) -> bool:
    """Exhaustively re-check a proved claim against the concrete model.

    Globals range over their sampled values; pre-existing unification
    variables range over assignments consistent with the equations the
    engine inferred for them.
    """
    interp = interp or builtin_interp()
    eq_subst = Subst(dict(residual.uvar_equations))
    heaps = list(iter_heaps(bounds))
    envs = gf.envs
    for ext in _global_assignments(gf, bounds):
        interp2 = interp.extend(funcs=ext)
        for uvals in iter_assignments(gf.uvar_tvars, bounds):
            if not subst_holds(envs, interp2, uvals, eq_subst):
                continue
            if gf.kind == "entailment":
                if not _entails_for(envs, interp2, uvals, gf.lhs, gf.rhs, heaps, bounds):
                    return False
            else:
                if not _program_ok(gf, interp2, uvals, heaps, bounds):
                    return False
    return True


def _entails_for(envs, interp, uvals, lhs, rhs, heaps, bounds) -> bool:
    for h in heaps:
        if denote_sexpr(envs, interp, uvals, (), lhs, h, bounds):
            if not denote_sexpr(envs, interp, uvals, (), rhs, h, bounds):
                return False
    return True


def _program_ok(gf: GoalFile, interp, uvals, heaps, bounds) -> bool:
    envs = gf.envs
    w = first_word_type(envs)
    if w is None:
        return True
    for h in heaps:
        if not denote_sexpr(envs, interp, uvals, (), gf.pre, h, bounds):
            continue
        status, out = run_concrete(
            envs, interp, gf.program, gf.reg_funcs, {}, h, w, uvals
        )
        if status == "infeasible":
            continue
        if status == "fault":
            return False
        _regs, h2 = out  # type: ignore[misc]
        if not denote_sexpr(envs, interp, uvals, (), gf.post, h2, bounds):
            return False
    return True


# ---------------------------------------------------------------------------
# Symbolic execution entry (report the computed post-state)


def run_symexec(
    goal_text: str,
    hint_specs: Sequence[str] = (),
    prover_name: Optional[str] = None,
    fuel: int = 10,
) -> CheckReport:
    from .hints import UnfoldState as US
    from .symexec import SymState, sym_exec

    db = load_databases(hint_specs)
    try:
        gf = parse_goal(goal_text, db)
    except ParseError as e:
        raise EngineError(f"goal: {e}")
    if gf.kind != "program":
        raise EngineError("symexec needs a program goal (pre/instr/post)")
    try:
        prover = resolve_prover(prover_name or db.prover)
        mev = resolve_memeval("+".join(db.memevals) if db.memevals else "ptsto")
    except KeyError as e:
        raise EngineError(str(e))

    trace: list[TraceEvent] = []
    envs = gf.envs
    npre = normalize(gf.pre)
    st = SymState(
        regs={},
        heap=npre,
        pures=(),
        vars=npre.var_binders,
        uvars=gf.uvar_tvars,
        reg_funcs=gf.reg_funcs,
    )
    u = unfold(
        envs,
        US(vars=st.vars, uvars=st.uvars, pures=st.pures, heap=st.heap),
        db,
        FORWARD,
        fuel,
        prover,
        trace,
    )
    st = dataclasses_replace(st, vars=u.vars, uvars=u.uvars, heap=u.heap)
    try:
        got = sym_exec(envs, st, gf.program, mev, prover, db, fuel=fuel, trace=trace)
    except SymexecError as e:
        raise EngineError(str(e))
    if isinstance(got, MemFault):
        return CheckReport(
            verdict="memfault",
            exit_code=1,
            unfold_count=sum(1 for e in trace if e.phase == "unfold"),
            report_text=f"memory fault at instruction {got.at}\n",
            trace=trace,
        )
    names = [f"v{i}" for i in range(len(got.vars))]
    lines = ["post-state:"]
    for reg in sorted(got.regs):
        lines.append(f"  reg {reg} = {render_expr(envs, got.regs[reg], names)}")
    heap_s = _rem_sexpr(
        SHeap(pures=got.heap.pures + got.pures, impures=got.heap.impures)
    )
    lines.append(f"  heap {render_sexpr(envs, heap_s, names)}")
    return CheckReport(
        verdict="ok",
        exit_code=0,
        unfold_count=sum(1 for e in trace if e.phase == "unfold"),
        report_text="\n".join(lines) + "\n",
        trace=trace,
    )


# ---------------------------------------------------------------------------
# Hint validation entry


def run_validate(
    hint_specs: Sequence[str],
    max_address: int = 4,
    max_word: int = 3,
    seq_max_len: int = 1,
) -> tuple[list[LemmaVerdict], int]:
    interp = builtin_interp()
    verdicts: list[LemmaVerdict] = []
    for spec in hint_specs:
        db = load_databases([spec])
        envs = db.seed_envs()
        bounds = make_bounds(envs, max_address, max_word, seq_max_len)
        for lem in db.lemmas:
            ok = validate_lemma(envs, interp, lem, bounds)
            verdicts.append(LemmaVerdict(db=db.name, lemma=lem.name, ok=ok))
    exit_code = 0 if all(v.ok for v in verdicts) else 1
    return verdicts, exit_code


# ---------------------------------------------------------------------------
# Benchmarks


def gen_sll_goal(n: int) -> GoalFile:
    """The linked-list entailment family: a chain of n two-word cells on
    the left, the abstract list predicate on the right."""
    return parse_goal(gen_sll_goal_text(n), load_hint_db("sll"))


def gen_sll_goal_text(n: int) -> str:
    lines = [f"func p{i} : -> w = global" for i in range(n + 1)]
    lines += [f"func x{i} : -> w = global" for i in range(n)]
    if n == 0:
        lines.append("lhs [(p0 = 0)]")
    else:
        parts = []
        for i in range(n):
            parts.append(f"ptsto(p{i}, x{i})")
            parts.append(f"ptsto((p{i} + 4), p{i + 1})")
        parts.extend(f"[(p{i} != 0)]" for i in range(n))
        parts.append(f"[(p{n} = 0)]")
        lines.append("lhs " + " * ".join(parts))
    rhs = "nil"
    for i in reversed(range(n)):
        rhs = f"cons(x{i}, {rhs})"
    lines.append(f"rhs sll({rhs}, p0)")
    return "\n".join(lines) + "\n"


def run_bench(
    family: str, sizes: Sequence[int], fuel: Optional[int] = None
) -> list[BenchRow]:
    if family != "sll":
        raise EngineError(f"unknown benchmark family: {family!r}")
    db = load_databases(["sll"])
    prover = resolve_prover(db.prover)
    rows: list[BenchRow] = []
    for n in sizes:
        gf = gen_sll_goal(n)
        rep = check_goalfile(gf, db, prover, fuel=fuel if fuel is not None else n + 2)
        rows.append(
            BenchRow(
                n=n,
                unfold_count=rep.unfold_count,
                cancel_time_ms=rep.cancel_time_ms,
                total_time_ms=rep.total_time_ms,
                verdict=rep.verdict,
            )
        )
    return rows


def bench_csv(rows: Sequence[BenchRow]) -> str:
    out = ["n,unfold_count,cancel_time_ms,total_time_ms,verdict"]
    for r in rows:
        out.append(
            f"{r.n},{r.unfold_count},{r.cancel_time_ms:.3f},{r.total_time_ms:.3f},{r.verdict}"
        )
    return "\n".join(out) + "\n"
