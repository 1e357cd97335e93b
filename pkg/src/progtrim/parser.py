"""Recursive-descent parser for the concrete syntax.

Desugarings applied here: deterministic ``if (p)`` becomes a nondeterministic
conditional guarded by ``assume p`` / ``assume !p``; ``!=``, ``<=`` and ``>=``
become negated core comparisons; non-variable call arguments are hoisted into
fresh ``_t<N>`` temporaries.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .lang import (
    FALSE,
    TRUE,
    Assert,
    Assign,
    Assume,
    BinOp,
    Call,
    Cmp,
    Const,
    Havoc,
    Load,
    Malloc,
    NondetIf,
    Not,
    Procedure,
    Program,
    Seq,
    SourceSpan,
    Store,
    Var,
    make_and,
    make_or,
    seq,
    walk,
)


class ParseError(Exception):
    """Syntax or name-resolution error, carrying the offending source span."""

    def __init__(self, message: str, span: SourceSpan | None = None):
        self.span = span
        where = f"{span}: " if span else ""
        super().__init__(f"{where}{message}")


KEYWORDS = {"proc", "call", "malloc", "nondet", "assert", "assume", "if", "else", "true", "false"}

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+) | (?P<nl>\n) | (?P<comment>//[^\n]*)
  | (?P<int>\d+)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>:=|==|!=|<=|>=|&&|\|\||[-+*<>=!(){};:,])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True, slots=True)
class Token:
    kind: str  # "int", "id", "op", "eof"
    text: str
    line: int
    col: int


def tokenize(text: str, file: str = "<input>") -> list:
    tokens, line, line_start, pos = [], 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            col = pos - line_start + 1
            raise ParseError(f"unexpected character {text[pos]!r}", SourceSpan(file, line, col, line, col))
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind in ("int", "id", "op"):
            tokens.append(Token(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str, file: str):
        self.file = file
        self.toks = tokenize(text, file)
        self.i = 0
        self.temps = 0
        self.pending: list = []

    # -- token helpers -------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def span(self, start: Token, end: Token | None = None) -> SourceSpan:
        end = end or self.toks[max(self.i - 1, 0)]
        return SourceSpan(self.file, start.line, start.col, end.line, end.col + len(end.text))

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind != "int"

    def eat(self, text: str) -> Token:
        t = self.tok
        if t.text != text or t.kind == "int":
            raise ParseError(f"expected {text!r}, found {t.text or 'end of input'!r}", self.span(t, t))
        self.i += 1
        return t

    def ident(self) -> str:
        t = self.tok
        if t.kind != "id" or t.text in KEYWORDS:
            raise ParseError(f"expected identifier, found {t.text or 'end of input'!r}", self.span(t, t))
        self.i += 1
        return t.text

    # -- program structure ---------------------------------------------------

    def program(self):
        procs = []
        while self.tok.kind != "eof":
            procs.append(self.procedure())
        if not procs:
            raise ParseError("empty program", self.span(self.tok, self.tok))
        return procs

    def procedure(self) -> Procedure:
        start = self.eat("proc")
        name = self.ident()
        self.eat("(")
        params = []
        if not self.at(")"):
            params.append(self.ident())
            while self.at(","):
                self.eat(",")
                params.append(self.ident())
        self.eat(")")
        self.eat(":")
        ret = self.ident()
        self.temps = self._max_temp_ahead()
        body = self.block()
        return Procedure(name, tuple(params), ret, body, self.span(start))

    def _max_temp_ahead(self) -> int:
        depth, j, best = 0, self.i, 0
        while self.toks[j].kind != "eof":
            t = self.toks[j]
            if t.text == "{":
                depth += 1
            elif t.text == "}":
                depth -= 1
                if depth == 0:
                    break
            elif t.kind == "id" and re.fullmatch(r"_t\d+", t.text):
                best = max(best, int(t.text[2:]))
            j += 1
        return best

    def block(self) -> Seq:
        start = self.eat("{")
        stmts = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                raise ParseError("unterminated block", self.span(start, start))
            stmts.extend(self.statement())
        self.eat("}")
        return Seq(tuple(stmts), self.span(start))

    def statement(self) -> list:
        start = self.tok
        if self.at("assert") or self.at("assume"):
            kw = self.tok.text
            self.i += 1
            p = self.pred()
            self.eat(";")
            node = Assert if kw == "assert" else Assume
            return [node(p, self.span(start))]
        if self.at("if"):
            return [self.conditional()]
        if self.at("*"):
            self.eat("*")
            ptr = self.ident()
            self.eat(":=")
            e = self.expr()
            self.eat(";")
            return [Store(ptr, e, self.span(start))]
        var = self.ident()
        self.eat(":=")
        if self.at("*"):
            self.eat("*")
            ptr = self.ident()
            self.eat(";")
            return [Load(var, ptr, self.span(start))]
        if self.at("malloc"):
            self.eat("malloc")
            self.eat("(")
            e = self.expr()
            self.eat(")")
            self.eat(";")
            return [Malloc(var, e, self.span(start))]
        if self.at("nondet"):
            self.eat("nondet")
            self.eat("(")
            self.eat(")")
            self.eat(";")
            return [Havoc(var, self.span(start))]
        if self.at("call"):
            self.eat("call")
            callee = self.ident()
            self.eat("(")
            pre, args = [], []
            if not self.at(")"):
                self._arg(pre, args)
                while self.at(","):
                    self.eat(",")
                    self._arg(pre, args)
            self.eat(")")
            self.eat(";")
            return pre + [Call(var, callee, tuple(args), self.span(start))]
        e = self.expr()
        self.eat(";")
        return [Assign(var, e, self.span(start))]

    def _arg(self, pre: list, args: list) -> None:
        start = self.tok
        e = self.expr()
        if isinstance(e, Var):
            args.append(e.name)
            return
        self.temps += 1
        tmp = f"_t{self.temps}"
        pre.append(Assign(tmp, e, self.span(start)))
        args.append(tmp)

    def conditional(self) -> NondetIf:
        start = self.eat("if")
        self.eat("(")
        guard = None
        if self.at("*") and self.toks[self.i + 1].text == ")":
            self.eat("*")
        else:
            guard = self.pred()
        self.eat(")")
        then = self.block()
        if self.at("else"):
            self.eat("else")
            orelse = self.block()
        else:
            orelse = Seq(())
        if guard is not None:
            then = seq([Assume(guard, then.span), then])
            orelse = seq([Assume(Not(guard), orelse.span), orelse])
        return NondetIf(then, orelse, self.span(start))

    # -- predicates and expressions -----------------------------------------

    def pred(self):
        parts = [self.conj()]
        while self.at("||"):
            self.eat("||")
            parts.append(self.conj())
        return make_or(parts) if len(parts) > 1 else parts[0]

    def conj(self):
        parts = [self.unary()]
        while self.at("&&"):
            self.eat("&&")
            parts.append(self.unary())
        return make_and(parts) if len(parts) > 1 else parts[0]

    def unary(self):
        if self.at("!"):
            self.eat("!")
            return Not(self.unary())
        if self.at("true"):
            self.eat("true")
            return TRUE
        if self.at("false"):
            self.eat("false")
            return FALSE
        if self.at("("):
            save = self.i
            try:
                return self.comparison()
            except ParseError:
                self.i = save
            self.eat("(")
            p = self.pred()
            self.eat(")")
            return p
        return self.comparison()

    def comparison(self):
        left = self.expr()
        op = self.tok.text
        if self.tok.kind != "op" or op not in ("<", ">", "=", "==", "!=", "<=", ">="):
            raise ParseError(f"expected comparison operator, found {op or 'end of input'!r}", self.span(self.tok, self.tok))
        self.i += 1
        right = self.expr()
        if op in ("=", "=="):
            return Cmp("=", left, right)
        if op == "!=":
            return Not(Cmp("=", left, right))
        if op == "<=":
            return Not(Cmp(">", left, right))
        if op == ">=":
            return Not(Cmp("<", left, right))
        return Cmp(op, left, right)

    def expr(self):
        e = self.term()
        while self.at("+") or self.at("-"):
            op = self.tok.text
            self.i += 1
            e = BinOp(op, e, self.term())
        return e

    def term(self):
        e = self.factor()
        while self.at("*"):
            self.eat("*")
            e = BinOp("*", e, self.factor())
        return e

    def factor(self):
        t = self.tok
        if t.kind == "int":
            self.i += 1
            return Const(int(t.text))
        if self.at("-"):
            self.eat("-")
            if self.tok.kind == "int":
                v = int(self.tok.text)
                self.i += 1
                return Const(-v)
            return BinOp("-", Const(0), self.factor())
        if self.at("("):
            self.eat("(")
            e = self.expr()
            self.eat(")")
            return e
        return Var(self.ident())


# -- well-formedness ---------------------------------------------------------


def _uses(s) -> set:
    from .formula import free_vars, term_vars

    if isinstance(s, Assign):
        return term_vars(s.expr)
    if isinstance(s, Load):
        return {s.ptr}
    if isinstance(s, Store):
        return {s.ptr} | term_vars(s.expr)
    if isinstance(s, Malloc):
        return term_vars(s.size)
    if isinstance(s, Call):
        return set(s.args)
    if isinstance(s, (Assert, Assume)):
        return free_vars(s.pred)
    return set()


def _definitely_assigned(s, defined: set, proc: str) -> set:
    if isinstance(s, Seq):
        for c in s.stmts:
            defined = _definitely_assigned(c, defined, proc)
        return defined
    if isinstance(s, NondetIf):
        a = _definitely_assigned(s.then, set(defined), proc)
        b = _definitely_assigned(s.orelse, set(defined), proc)
        return a & b
    missing = _uses(s) - defined
    if missing:
        raise ParseError(f"in {proc}: identifier {sorted(missing)[0]!r} used before assignment", s.span)
    if isinstance(s, (Assign, Load, Malloc, Call, Havoc)):
        defined = defined | {s.var}
    return defined


def check_program(prog: Program) -> None:
    """Raise ParseError unless ``prog`` satisfies the well-formedness invariants."""
    names = [p.name for p in prog.procedures]
    for n in names:
        if names.count(n) > 1:
            raise ParseError(f"duplicate procedure {n!r}", prog.proc(n).span)
    if prog.entry not in prog:
        raise ParseError(f"entry procedure {prog.entry!r} not defined")
    for p in prog.procedures:
        if len(set(p.params)) != len(p.params) or p.ret in p.params:
            raise ParseError(f"in {p.name}: parameter and return names must be distinct", p.span)
        for s in walk(p.body):
            if isinstance(s, Call):
                if s.proc not in prog:
                    raise ParseError(f"in {p.name}: unknown procedure {s.proc!r}", s.span)
                arity = len(prog.proc(s.proc).params)
                if arity != len(s.args):
                    raise ParseError(
                        f"in {p.name}: {s.proc} expects {arity} argument(s), got {len(s.args)}", s.span
                    )
        _definitely_assigned(p.body, set(p.params) | {p.ret}, p.name)


def default_entry(procs) -> str:
    names = [p.name for p in procs]
    if "main" in names:
        return "main"
    called = {c.proc for p in procs for c in p.calls()}
    roots = [n for n in names if n not in called]
    return roots[-1] if roots else names[-1]


def parse(text: str, file: str = "<input>", entry: str | None = None) -> Program:
    procs = _Parser(text, file).program()
    prog = Program(tuple(procs), entry or default_entry(procs))
    check_program(prog)
    return prog
