"""Text formats for goals and hint databases, plus rendering.

Goal files declare their environments explicitly and then state either an
entailment (lhs / rhs) or a program block (pre / instr* / post).  Hint
database files additionally fix environment entries by position, which is
what makes separately authored databases composable.  The grammar is
documented in docs/format.md and locked by golden tests.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .hints import (
    BACKWARD,
    DEFAULT_FUNC,
    DEFAULT_PRED,
    DEFAULT_TYPE,
    FORWARD,
    HintDatabase,
    HintLemma,
    empty_db,
)
from .model import Bool, Nat, PropV, Word, first_word_type
from .symexec import Assign, Assume, Instr, Read, Write
from .terms import (
    PROP,
    Const,
    Envs,
    Equal,
    Exists,
    Expr,
    Func,
    FuncSig,
    Inj,
    Pred,
    PredSig,
    Prop,
    Sexpr,
    Star,
    Emp,
    EMP,
    Tvar,
    TypeDecl,
    TypeIndex,
    UVar,
    Var,
    typecheck_expr,
    typecheck_sexpr,
)


class ParseError(Exception):
    def __init__(self, line: int, col: int, msg: str):
        super().__init__(f"{line}:{col}: {msg}")
        self.line = line
        self.col = col
        self.msg = msg


_CARRIER_EQ = {
    "word": "word_eq",
    "wordseq": "word_seq_eq",
    "bool": "bool_eq",
    "nat": "nat_eq",
}
_EQ_CARRIER = {v: k for k, v in _CARRIER_EQ.items()}

_OPERATORS = {"+", "-", "<", "!="}


# ---------------------------------------------------------------------------
# Tokens

_TOKEN_RE = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_']*)"
    r"|(?P<int>\d+)"
    r"|(?P<uvar>\?(?:[A-Za-z_][A-Za-z0-9_']*|\d+))"
    r"|(?P<op>->|!=|[()\[\]*.:,=+\-<])"
)


@dataclass(frozen=True)
class Token:
    kind: str  # name | int | uvar | op | eol
    text: str
    col: int


def _tokenize(line: int, text: str) -> list[Token]:
    out: list[Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(line, pos + 1, f"unexpected character {text[pos]!r}")
        pos = m.end()
        if m.lastgroup == "ws":
            continue
        out.append(Token(m.lastgroup, m.group(), m.start() + 1))  # type: ignore[arg-type]
    out.append(Token("eol", "", len(text) + 1))
    return out


class _Cursor:
    def __init__(self, line: int, tokens: list[Token]):
        self.line = line
        self.toks = tokens
        self.i = 0

    def peek(self) -> Token:
        return self.toks[self.i]

    def next(self) -> Token:
        t = self.toks[self.i]
        if t.kind != "eol":
            self.i += 1
        return t

    def expect(self, text: str) -> Token:
        t = self.next()
        if t.text != text:
            raise ParseError(
                self.line, t.col, f"expected {text!r}, found {t.text or 'end of line'!r}"
            )
        return t

    def expect_kind(self, kind: str, what: str) -> Token:
        t = self.next()
        if t.kind != kind:
            raise ParseError(
                self.line, t.col, f"expected {what}, found {t.text or 'end of line'!r}"
            )
        return t

    def done(self) -> bool:
        return self.peek().kind == "eol"

    def fail(self, msg: str) -> ParseError:
        return ParseError(self.line, self.peek().col, msg)


def _strip_comment(text: str) -> str:
    if text.lstrip().startswith("#"):
        return ""
    cut = text.find(" #")
    return text[:cut] if cut >= 0 else text


# ---------------------------------------------------------------------------
# Environment building shared by goal and hint parsing


class _EnvBuilder:
    """Accumulates positional declarations with name resolution.

    Seeded entries come from hint-database constraints; goal-local
    declarations fill unconstrained slots (or append) and are remembered
    so rendering can reproduce exactly the local part.
    """

    def __init__(self, db: HintDatabase):
        seed = db.seed_envs()
        self.types: list[TypeDecl] = list(seed.types)
        self.funcs: list[FuncSig] = list(seed.funcs)
        self.preds: list[PredSig] = list(seed.preds)
        self.free_types = [
            i
            for i, d in enumerate(self.types)
            if d.name == "_pad" and _none_at(db.tconstraint, i)
        ]
        self.free_funcs = [
            i
            for i, d in enumerate(self.funcs)
            if d.name == "_pad" and _none_at(db.fconstraint, i)
        ]
        self.free_preds = [
            i
            for i, d in enumerate(self.preds)
            if d.name == "_pad" and _none_at(db.pconstraint, i)
        ]
        self.local_types: list[int] = []
        self.local_funcs: list[int] = []
        self.local_preds: list[int] = []

    def envs(self) -> Envs:
        return Envs(tuple(self.types), tuple(self.funcs), tuple(self.preds))

    def type_index(self, name: str) -> Optional[int]:
        for i, d in enumerate(self.types):
            if d.name == name:
                return i
        return None

    def func_index(self, name: str) -> Optional[int]:
        for i, d in enumerate(self.funcs):
            if d.name == name:
                return i
        return None

    def pred_index(self, name: str) -> Optional[int]:
        for i, d in enumerate(self.preds):
            if d.name == name:
                return i
        return None

    def _place(self, table: list, free: list[int], local: list[int], decl) -> int:
        if free:
            i = free.pop(0)
            table[i] = decl
        else:
            i = len(table)
            table.append(decl)
        local.append(i)
        return i

    def add_type(self, cur: _Cursor, decl: TypeDecl) -> int:
        i = self.type_index(decl.name)
        if i is not None:
            if self.types[i] != decl:
                raise cur.fail(f"type {decl.name!r} conflicts with an earlier declaration")
            return i
        return self._place(self.types, self.free_types, self.local_types, decl)

    def add_func(self, cur: _Cursor, decl: FuncSig) -> int:
        i = self.func_index(decl.name)
        if i is not None:
            if self.funcs[i] != decl:
                raise cur.fail(f"func {decl.name!r} conflicts with an earlier declaration")
            return i
        return self._place(self.funcs, self.free_funcs, self.local_funcs, decl)

    def add_pred(self, cur: _Cursor, decl: PredSig) -> int:
        i = self.pred_index(decl.name)
        if i is not None:
            if self.preds[i] != decl:
                raise cur.fail(f"pred {decl.name!r} conflicts with an earlier declaration")
            return i
        return self._place(self.preds, self.free_preds, self.local_preds, decl)


def _none_at(constraint: tuple, i: int) -> bool:
    return i >= len(constraint) or constraint[i] is None


# ---------------------------------------------------------------------------
# Expression / assertion parsing


class _TermParser:
    def __init__(
        self,
        eb: _EnvBuilder,
        uvar_names: Sequence[str],
        uvar_tvars: Sequence[Tvar],
        allow_uvars: bool = True,
    ):
        self.eb = eb
        self.uvar_names = list(uvar_names)
        self.uvar_tvars = list(uvar_tvars)
        self.allow_uvars = allow_uvars
        self.scope: list[tuple[str, Tvar]] = []  # binders, innermost first

    # -- types

    def parse_tvar(self, cur: _Cursor) -> Tvar:
        t = cur.expect_kind("name", "a type name")
        if t.text == "prop":
            return PROP
        i = self.eb.type_index(t.text)
        if i is None:
            raise ParseError(cur.line, t.col, f"unknown type {t.text!r}")
        return TypeIndex(i)

    def scope_index(self, name: str) -> Optional[int]:
        for i, (n, _t) in enumerate(self.scope):
            if n == name:
                return i
        return None

    # -- expressions

    def parse_expr(self, cur: _Cursor) -> Expr:
        first = self.parse_primary(cur)
        op = cur.peek()
        if op.text not in {"+", "-", "<", "!=", "="}:
            return first
        seen = op.text
        out = first
        while cur.peek().text == seen:
            cur.next()
            rhs = self.parse_primary(cur)
            out = self.build_binop(cur, op, seen, out, rhs)
        nxt = cur.peek()
        if nxt.text in {"+", "-", "<", "!=", "="} and nxt.text != seen:
            raise ParseError(
                cur.line, nxt.col, "mixed operators need parentheses"
            )
        return out

    def build_binop(self, cur: _Cursor, tok: Token, op: str, l: Expr, r: Expr) -> Expr:
        if op == "=":
            t = self.typecheck(l)
            if t is None:
                raise ParseError(cur.line, tok.col, "left side of '=' does not typecheck")
            if self.typecheck(r) != t:
                raise ParseError(
                    cur.line, tok.col, "both sides of '=' must have the same type"
                )
            return Equal(t, l, r)
        i = self.eb.func_index(op)
        if i is None:
            raise ParseError(cur.line, tok.col, f"operator {op!r} is not a declared func")
        sig = self.eb.funcs[i]
        if len(sig.domain) != 2:
            raise ParseError(cur.line, tok.col, f"operator {op!r} is not binary")
        return Func(i, (l, r))

    def parse_primary(self, cur: _Cursor) -> Expr:
        t = cur.next()
        if t.kind == "int":
            value = int(t.text)
            if cur.peek().text == ":":
                cur.next()
                ty = self.parse_tvar_at(cur, t)
            else:
                ty = first_word_type(self.eb.envs())
                if ty is None:
                    raise ParseError(
                        cur.line, t.col, "integer literal needs a declared word type"
                    )
            return Const(ty, self._literal(cur, t, ty, value))
        if t.kind == "uvar":
            if not self.allow_uvars:
                raise ParseError(cur.line, t.col, "unification variables not allowed here")
            body = t.text[1:]
            if body.isdigit():
                n = int(body)
            else:
                if body not in self.uvar_names:
                    raise ParseError(cur.line, t.col, f"undeclared unification variable ?{body}")
                n = self.uvar_names.index(body)
            if n >= len(self.uvar_tvars):
                raise ParseError(cur.line, t.col, f"unification variable ?{body} out of range")
            return UVar(n)
        if t.kind == "name":
            bi = self.scope_index(t.text)
            if bi is not None:
                return Var(bi)
            i = self.eb.func_index(t.text)
            if i is None:
                raise ParseError(cur.line, t.col, f"unknown name {t.text!r}")
            sig = self.eb.funcs[i]
            if cur.peek().text == "(":
                args = self.parse_args(cur)
            else:
                args = ()
            if len(args) != len(sig.domain):
                raise ParseError(
                    cur.line,
                    t.col,
                    f"func {t.text!r} expects {len(sig.domain)} argument(s), got {len(args)}",
                )
            return Func(i, args)
        if t.text == "(":
            e = self.parse_expr(cur)
            cur.expect(")")
            return e
        raise ParseError(cur.line, t.col, f"expected an expression, found {t.text or 'end of line'!r}")

    def parse_tvar_at(self, cur: _Cursor, at: Token) -> Tvar:
        t = cur.expect_kind("name", "a type name")
        if t.text == "prop":
            return PROP
        i = self.eb.type_index(t.text)
        if i is None:
            raise ParseError(cur.line, t.col, f"unknown type {t.text!r}")
        return TypeIndex(i)

    def _literal(self, cur: _Cursor, tok: Token, ty: Tvar, value: int) -> object:
        if isinstance(ty, Prop):
            return PropV(bool(value))
        eq = self.eb.types[ty.n].eq_test  # type: ignore[union-attr]
        if eq == "word_eq":
            return Word(value)
        if eq == "nat_eq":
            return Nat(value)
        if eq == "bool_eq":
            return Bool(bool(value))
        raise ParseError(cur.line, tok.col, "this type has no integer literals")

    def parse_args(self, cur: _Cursor) -> tuple[Expr, ...]:
        cur.expect("(")
        args: list[Expr] = []
        if cur.peek().text != ")":
            args.append(self.parse_expr(cur))
            while cur.peek().text == ",":
                cur.next()
                args.append(self.parse_expr(cur))
        cur.expect(")")
        return tuple(args)

    # -- heap assertions

    def parse_sexpr(self, cur: _Cursor) -> Sexpr:
        parts = [self.parse_sterm(cur)]
        while cur.peek().text == "*":
            cur.next()
            parts.append(self.parse_sterm(cur))
        out = parts[-1]
        for p in reversed(parts[:-1]):
            out = Star(p, out)
        return out

    def parse_sterm(self, cur: _Cursor) -> Sexpr:
        t = cur.peek()
        if t.text == "emp":
            cur.next()
            return EMP
        if t.text == "EX":
            cur.next()
            name = cur.expect_kind("name", "a binder name").text
            cur.expect(":")
            ty = self.parse_tvar(cur)
            cur.expect(".")
            self.scope.insert(0, (name, ty))
            try:
                body = self.parse_sexpr(cur)
            finally:
                self.scope.pop(0)
            return Exists(ty, body)
        if t.text == "[":
            cur.next()
            e = self.parse_expr(cur)
            cur.expect("]")
            return Inj(e)
        if t.text == "(":
            cur.next()
            s = self.parse_sexpr(cur)
            cur.expect(")")
            return s
        if t.kind == "name":
            cur.next()
            i = self.eb.pred_index(t.text)
            if i is None:
                raise ParseError(cur.line, t.col, f"unknown predicate {t.text!r}")
            args = self.parse_args(cur)
            if len(args) != len(self.eb.preds[i].domain):
                raise ParseError(
                    cur.line,
                    t.col,
                    f"predicate {t.text!r} expects {len(self.eb.preds[i].domain)} argument(s)",
                )
            return Pred(i, args)
        raise ParseError(cur.line, t.col, f"expected a heap assertion, found {t.text!r}")

    def typecheck(self, e: Expr) -> Optional[Tvar]:
        binder_tvars = tuple(t for _n, t in self.scope)
        return typecheck_expr(self.eb.envs(), binder_tvars, tuple(self.uvar_tvars), e)


# ---------------------------------------------------------------------------
# Goal files


@dataclass(frozen=True)
class GoalFile:
    """A parsed goal: either an entailment or a program block."""

    envs: Envs
    uvar_tvars: tuple[Tvar, ...] = ()
    uvar_names: tuple[str, ...] = ()
    lhs: Optional[Sexpr] = None
    rhs: Optional[Sexpr] = None
    pre: Optional[Sexpr] = None
    post: Optional[Sexpr] = None
    program: tuple[Instr, ...] = ()
    regs: tuple[str, ...] = ()
    reg_funcs: Mapping[str, int] = field(default_factory=dict)
    local_types: tuple[int, ...] = ()
    local_funcs: tuple[int, ...] = ()
    local_preds: tuple[int, ...] = ()

    @property
    def kind(self) -> str:
        return "program" if self.pre is not None else "entailment"


def parse_goal(text: str, db: Optional[HintDatabase] = None) -> GoalFile:
    """Parse a goal file against the (already composed) hint database."""
    eb = _EnvBuilder(db if db is not None else empty_db())
    uvar_names: list[str] = []
    uvar_tvars: list[Tvar] = []
    regs: list[str] = []
    reg_funcs: dict[str, int] = {}
    lhs = rhs = pre = post = None
    program: list[Instr] = []

    def term_parser() -> _TermParser:
        return _TermParser(eb, uvar_names, uvar_tvars)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = _strip_comment(raw).strip()
        if not stripped:
            continue
        cur = _Cursor(lineno, _tokenize(lineno, stripped))
        kw = cur.expect_kind("name", "a keyword").text
        if kw == "type":
            name = cur.expect_kind("name", "a type name").text
            carrier = cur.expect_kind("name", "a carrier (word|wordseq|bool|nat)").text
            if carrier not in _CARRIER_EQ:
                raise cur.fail(f"unknown carrier {carrier!r}")
            eb.add_type(cur, TypeDecl(name, _CARRIER_EQ[carrier]))
        elif kw == "func":
            _parse_func_decl(cur, eb)
        elif kw == "pred":
            _parse_pred_decl(cur, eb)
        elif kw == "uvar":
            name = cur.expect_kind("name", "a variable name").text
            cur.expect(":")
            tp = term_parser()
            ty = tp.parse_tvar(cur)
            if name in uvar_names:
                raise cur.fail(f"duplicate unification variable {name!r}")
            uvar_names.append(name)
            uvar_tvars.append(ty)
        elif kw == "reg":
            name = cur.expect_kind("name", "a register name").text
            w = first_word_type(eb.envs())
            if w is None:
                raise cur.fail("declare a word type before registers")
            idx = eb.add_func(cur, FuncSig(name, (), w, f"reg:{name}"))
            regs.append(name)
            reg_funcs[name] = idx
        elif kw in ("lhs", "rhs", "pre", "post"):
            tp = term_parser()
            s = tp.parse_sexpr(cur)
            if not cur.done():
                raise cur.fail("trailing input after assertion")
            if kw == "lhs":
                lhs = s
            elif kw == "rhs":
                rhs = s
            elif kw == "pre":
                pre = s
            else:
                post = s
        elif kw == "instr":
            program.append(_parse_instr(cur, term_parser(), regs))
        else:
            raise ParseError(lineno, 1, f"unknown keyword {kw!r}")

    gf = GoalFile(
        envs=eb.envs(),
        uvar_tvars=tuple(uvar_tvars),
        uvar_names=tuple(uvar_names),
        lhs=lhs,
        rhs=rhs,
        pre=pre,
        post=post,
        program=tuple(program),
        regs=tuple(regs),
        reg_funcs=reg_funcs,
        local_types=tuple(eb.local_types),
        local_funcs=tuple(eb.local_funcs),
        local_preds=tuple(eb.local_preds),
    )
    _check_goal(gf)
    return gf


def _parse_func_decl(cur: _Cursor, eb: _EnvBuilder) -> None:
    t = cur.next()
    if t.kind != "name" and t.text not in _OPERATORS:
        raise ParseError(cur.line, t.col, "expected a func name")
    name = t.text
    cur.expect(":")
    tp = _TermParser(eb, [], [])
    domain: list[Tvar] = []
    while cur.peek().text != "->":
        domain.append(tp.parse_tvar(cur))
    cur.expect("->")
    rng = tp.parse_tvar(cur)
    cur.expect("=")
    interp = cur.expect_kind("name", "an interpretation name").text
    if interp == "global":
        interp = f"global:{name}"
    eb.add_func(cur, FuncSig(name, tuple(domain), rng, interp))


def _parse_pred_decl(cur: _Cursor, eb: _EnvBuilder) -> None:
    name = cur.expect_kind("name", "a predicate name").text
    cur.expect(":")
    tp = _TermParser(eb, [], [])
    domain: list[Tvar] = []
    while cur.peek().text != "=":
        domain.append(tp.parse_tvar(cur))
    cur.expect("=")
    interp = cur.expect_kind("name", "an interpretation name").text
    eb.add_pred(cur, PredSig(name, tuple(domain), interp))


def _parse_instr(cur: _Cursor, tp: _TermParser, regs: list[str]) -> Instr:
    op = cur.expect_kind("name", "an instruction (assign|read|write|assume)").text
    if op == "assign":
        reg = cur.expect_kind("name", "a register name").text
        if reg not in regs:
            raise cur.fail(f"undeclared register {reg!r}")
        return Assign(reg, tp.parse_expr(cur))
    if op == "read":
        reg = cur.expect_kind("name", "a register name").text
        if reg not in regs:
            raise cur.fail(f"undeclared register {reg!r}")
        return Read(reg, tp.parse_expr(cur))
    if op == "write":
        return Write(tp.parse_expr(cur), tp.parse_expr(cur))
    if op == "assume":
        return Assume(tp.parse_expr(cur))
    raise cur.fail(f"unknown instruction {op!r}")


def _check_goal(gf: GoalFile) -> None:
    has_ent = gf.lhs is not None or gf.rhs is not None
    has_prog = gf.pre is not None or gf.post is not None or gf.program
    if has_ent and has_prog:
        raise ParseError(0, 0, "goal mixes lhs/rhs with a program block")
    if has_ent and (gf.lhs is None or gf.rhs is None):
        raise ParseError(0, 0, "entailment goal needs both lhs and rhs")
    if has_prog and (gf.pre is None or gf.post is None):
        raise ParseError(0, 0, "program goal needs both pre and post")
    if not has_ent and not has_prog:
        raise ParseError(0, 0, "goal file declares no goal")
    for side, what in ((gf.lhs, "lhs"), (gf.rhs, "rhs"), (gf.pre, "pre"), (gf.post, "post")):
        if side is not None and not typecheck_sexpr(gf.envs, (), gf.uvar_tvars, side):
            raise ParseError(0, 0, f"{what} does not typecheck")


# ---------------------------------------------------------------------------
# Rendering


def _type_name(envs: Envs, t: Tvar) -> str:
    return "prop" if isinstance(t, Prop) else envs.types[t.n].name  # type: ignore[union-attr]


class _Renderer:
    def __init__(self, envs: Envs, binder_names: Sequence[str] = ()):
        self.envs = envs
        self.names = list(binder_names)  # innermost first
        self.counter = 0

    def fresh(self) -> str:
        name = f"v{self.counter}"
        self.counter += 1
        return name

    def expr(self, e: Expr) -> str:
        if isinstance(e, Const):
            return self.const(e)
        if isinstance(e, Var):
            return self.names[e.n] if e.n < len(self.names) else f"_v{e.n}"
        if isinstance(e, UVar):
            return f"?{e.n}"
        if isinstance(e, Func):
            sig = self.envs.funcs[e.f]
            if not e.args:
                return sig.name
            if sig.name in _OPERATORS and len(e.args) == 2:
                return f"({self.expr(e.args[0])} {sig.name} {self.expr(e.args[1])})"
            return f"{sig.name}({', '.join(self.expr(a) for a in e.args)})"
        if isinstance(e, Equal):
            return f"({self.expr(e.lhs)} = {self.expr(e.rhs)})"
        raise TypeError(f"not an expression: {e!r}")

    def const(self, e: Const) -> str:
        v = e.value
        if isinstance(v, Word):
            if e.t == first_word_type(self.envs):
                return str(v.w)
            return f"{v.w}:{_type_name(self.envs, e.t)}"
        if isinstance(v, Nat):
            return f"{v.n}:{_type_name(self.envs, e.t)}"
        if isinstance(v, Bool):
            return f"{int(v.b)}:{_type_name(self.envs, e.t)}"
        if isinstance(v, PropV):
            return f"{int(v.b)}:prop"
        raise ValueError(f"constant of this sort has no literal syntax: {v!r}")

    def sexpr(self, s: Sexpr) -> str:
        if isinstance(s, Emp):
            return "emp"
        if isinstance(s, Inj):
            return f"[{self.expr(s.e)}]"
        if isinstance(s, Pred):
            sig = self.envs.preds[s.p]
            return f"{sig.name}({', '.join(self.expr(a) for a in s.args)})"
        if isinstance(s, Exists):
            name = self.fresh()
            self.names.insert(0, name)
            try:
                body = self.sexpr(s.body)
            finally:
                self.names.pop(0)
            return f"EX {name}:{_type_name(self.envs, s.t)}. {body}"
        if isinstance(s, Star):
            l = self.sexpr(s.l)
            if isinstance(s.l, (Star, Exists)):
                l = f"({l})"
            return f"{l} * {self.sexpr(s.r)}"
        raise TypeError(f"not a heap assertion: {s!r}")


def render_expr(envs: Envs, e: Expr, binder_names: Sequence[str] = ()) -> str:
    return _Renderer(envs, binder_names).expr(e)


def render_sexpr(envs: Envs, s: Sexpr, binder_names: Sequence[str] = ()) -> str:
    return _Renderer(envs, binder_names).sexpr(s)


def render_goal(gf: GoalFile) -> str:
    """Render back to goal-file text (the parser's normal form)."""
    envs = gf.envs
    lines: list[str] = []
    for i in gf.local_types:
        d = envs.types[i]
        lines.append(f"type {d.name} {_EQ_CARRIER[d.eq_test]}")
    reg_ids = set(gf.reg_funcs.values())
    for i in gf.local_funcs:
        if i in reg_ids:
            continue
        sig = envs.funcs[i]
        dom = " ".join(_type_name(envs, t) for t in sig.domain)
        dom = dom + " " if dom else ""
        interp = "global" if sig.interp == f"global:{sig.name}" else sig.interp
        lines.append(f"func {sig.name} : {dom}-> {_type_name(envs, sig.range)} = {interp}")
    for i in gf.local_preds:
        sig = envs.preds[i]
        dom = " ".join(_type_name(envs, t) for t in sig.domain)
        lines.append(f"pred {sig.name} : {dom} = {sig.interp}")
    for name, t in zip(gf.uvar_names, gf.uvar_tvars):
        lines.append(f"uvar {name} : {_type_name(envs, t)}")
    for name in gf.regs:
        lines.append(f"reg {name}")
    if gf.lhs is not None and gf.rhs is not None:
        lines.append(f"lhs {render_sexpr(envs, gf.lhs)}")
        lines.append(f"rhs {render_sexpr(envs, gf.rhs)}")
    if gf.pre is not None:
        lines.append(f"pre {render_sexpr(envs, gf.pre)}")
        for ins in gf.program:
            lines.append(f"instr {_render_instr(envs, ins)}")
        lines.append(f"post {render_sexpr(envs, gf.post)}")
    return "\n".join(lines) + "\n"


def _render_instr(envs: Envs, ins: Instr) -> str:
    if isinstance(ins, Assign):
        return f"assign {ins.reg} {render_expr(envs, ins.e)}"
    if isinstance(ins, Read):
        return f"read {ins.reg} {render_expr(envs, ins.addr)}"
    if isinstance(ins, Write):
        return f"write {render_expr(envs, ins.addr)} {render_expr(envs, ins.val)}"
    if isinstance(ins, Assume):
        return f"assume {render_expr(envs, ins.cond)}"
    raise TypeError(f"not an instruction: {ins!r}")


# ---------------------------------------------------------------------------
# Hint database files


def parse_hint_db(text: str, default_name: str = "db") -> HintDatabase:
    eb = _EnvBuilder(empty_db())
    tconstraint: list = []
    fconstraint: list = []
    pconstraint: list = []
    lemmas: list[HintLemma] = []
    name = default_name
    prover = "reflexivity+assumption"
    memevals: tuple[str, ...] = ()

    in_hint: Optional[dict] = None

    def close_hint(cur: _Cursor) -> None:
        nonlocal in_hint
        assert in_hint is not None
        if in_hint["lhs"] is None or in_hint["rhs"] is None:
            raise cur.fail(f"hint {in_hint['name']!r} needs both lhs and rhs")
        lem = HintLemma(
            name=in_hint["name"],
            binders=tuple(t for _n, t in in_hint["binders"]),
            pures=tuple(in_hint["pures"]),
            lhs=in_hint["lhs"],
            rhs=in_hint["rhs"],
            direction=in_hint["direction"],
        )
        envs = eb.envs()
        if not lem.typechecks(envs):
            raise cur.fail(f"hint {lem.name!r} does not typecheck")
        lemmas.append(lem)
        in_hint = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = _strip_comment(raw).strip()
        if not stripped:
            continue
        cur = _Cursor(lineno, _tokenize(lineno, stripped))
        kw = cur.expect_kind("name", "a keyword").text

        if in_hint is not None:
            tp = _TermParser(eb, [], [], allow_uvars=False)
            tp.scope = list(in_hint["binders"])
            if kw == "binder":
                bname = cur.expect_kind("name", "a binder name").text
                cur.expect(":")
                ty = tp.parse_tvar(cur)
                # newest binder is Var 0 inside the lemma components
                in_hint["binders"].insert(0, (bname, ty))
                continue
            if kw == "pure":
                in_hint["pures"].append(tp.parse_expr(cur))
                continue
            if kw in ("lhs", "rhs"):
                in_hint[kw] = tp.parse_sexpr(cur)
                continue
            if kw == "end":
                close_hint(cur)
                continue
            raise cur.fail(f"unexpected {kw!r} inside hint block")

        if kw == "db":
            name = cur.expect_kind("name", "a database name").text
        elif kw == "prover":
            parts = [cur.expect_kind("name", "a prover name").text]
            while cur.peek().text == "+":
                cur.next()
                parts.append(cur.expect_kind("name", "a prover name").text)
            prover = "+".join(parts)
        elif kw in ("memevals", "memeval"):
            evs = [cur.expect_kind("name", "a memory evaluator name").text]
            while cur.peek().text == ",":
                cur.next()
                evs.append(cur.expect_kind("name", "a memory evaluator name").text)
            memevals = tuple(evs)
        elif kw == "skip":
            what = cur.expect_kind("name", "type|func|pred").text
            if what == "type":
                eb.types.append(DEFAULT_TYPE)
                tconstraint.append(None)
            elif what == "func":
                eb.funcs.append(DEFAULT_FUNC)
                fconstraint.append(None)
            elif what == "pred":
                eb.preds.append(DEFAULT_PRED)
                pconstraint.append(None)
            else:
                raise cur.fail("skip expects type, func, or pred")
        elif kw == "type":
            tname = cur.expect_kind("name", "a type name").text
            carrier = cur.expect_kind("name", "a carrier").text
            if carrier not in _CARRIER_EQ:
                raise cur.fail(f"unknown carrier {carrier!r}")
            decl = TypeDecl(tname, _CARRIER_EQ[carrier])
            eb.add_type(cur, decl)
            tconstraint.append(decl)
        elif kw == "func":
            before = len(eb.funcs)
            _parse_func_decl(cur, eb)
            if len(eb.funcs) == before:
                raise cur.fail("duplicate func declaration in hint database")
            fconstraint.append(eb.funcs[-1])
        elif kw == "pred":
            before = len(eb.preds)
            _parse_pred_decl(cur, eb)
            if len(eb.preds) == before:
                raise cur.fail("duplicate pred declaration in hint database")
            pconstraint.append(eb.preds[-1])
        elif kw == "hint":
            hname = cur.expect_kind("name", "a hint name").text
            direction = cur.expect_kind("name", "forward|backward").text
            if direction not in (FORWARD, BACKWARD):
                raise cur.fail("hint direction must be forward or backward")
            in_hint = {
                "name": hname,
                "direction": direction,
                "binders": [],
                "pures": [],
                "lhs": None,
                "rhs": None,
            }
        else:
            raise ParseError(lineno, 1, f"unknown keyword {kw!r}")

    if in_hint is not None:
        raise ParseError(0, 0, f"hint {in_hint['name']!r} is missing its end line")
    return HintDatabase(
        name=name,
        tconstraint=tuple(tconstraint),
        fconstraint=tuple(fconstraint),
        pconstraint=tuple(pconstraint),
        lemmas=tuple(lemmas),
        prover=prover,
        memevals=memevals,
    )


def load_hint_db(spec: str) -> HintDatabase:
    """Load a hint database by file path or packaged name."""
    p = Path(spec)
    if p.suffix == ".hints" or "/" in spec:
        if not p.exists():
            raise FileNotFoundError(spec)
        return parse_hint_db(p.read_text(), default_name=p.stem)
    packaged = resources.files("sepver.data").joinpath(f"{spec}.hints")
    if not packaged.is_file():
        raise KeyError(f"unknown hint database: {spec!r}")
    return parse_hint_db(packaged.read_text(), default_name=spec)
