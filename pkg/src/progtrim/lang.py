"""Abstract syntax for the object language and for safety-condition formulas.

Expressions double as formula terms: a formula term is an expression that may
additionally contain ``Drf`` (an uninterpreted dereference).  Object-language
predicates are formulas without ``Drf``, ``Implies`` or quantifiers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Union


@dataclass(frozen=True, slots=True)
class SourceSpan:
    file: str
    line: int
    column: int
    end_line: int
    end_column: int

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


# -- terms -------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Var:
    name: str


@dataclass(frozen=True, slots=True)
class Const:
    value: int


@dataclass(frozen=True, slots=True)
class BinOp:
    op: str  # one of "+", "-", "*"
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True, slots=True)
class Drf:
    arg: "Expr"


Expr = Union[Var, Const, BinOp, Drf]
ARITH_OPS = ("+", "-", "*")


# -- formulas ----------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class BoolConst:
    value: bool


@dataclass(frozen=True, slots=True)
class Cmp:
    op: str  # one of "<", ">", "="
    left: Expr
    right: Expr


@dataclass(frozen=True, slots=True)
class Not:
    arg: "Formula"


@dataclass(frozen=True, slots=True)
class And:
    args: tuple


@dataclass(frozen=True, slots=True)
class Or:
    args: tuple


@dataclass(frozen=True, slots=True)
class Implies:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True, slots=True)
class Forall:
    var: str
    body: "Formula"


@dataclass(frozen=True, slots=True)
class Exists:
    var: str
    body: "Formula"


Formula = Union[BoolConst, Cmp, Not, And, Or, Implies, Forall, Exists]
Quantifier = (Forall, Exists)
CMP_OPS = ("<", ">", "=")

TRUE = BoolConst(True)
FALSE = BoolConst(False)


def make_and(parts) -> Formula:
    """Flatten nested conjunctions without any other simplification."""
    flat = []
    for p in parts:
        if isinstance(p, And):
            flat.extend(p.args)
        else:
            flat.append(p)
    if not flat:
        return TRUE
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat))


def make_or(parts) -> Formula:
    flat = []
    for p in parts:
        if isinstance(p, Or):
            flat.extend(p.args)
        else:
            flat.append(p)
    if not flat:
        return FALSE
    if len(flat) == 1:
        return flat[0]
    return Or(tuple(flat))


def ne(a: Expr, b: Expr) -> Formula:
    return Not(Cmp("=", a, b))


# -- statements --------------------------------------------------------------

_span = field(default=None, compare=False, repr=False)


@dataclass(frozen=True, slots=True)
class Seq:
    stmts: tuple
    span: SourceSpan | None = _span


@dataclass(frozen=True, slots=True)
class Assign:
    var: str
    expr: Expr
    span: SourceSpan | None = _span


@dataclass(frozen=True, slots=True)
class Load:
    """``var := *ptr``"""

    var: str
    ptr: str
    span: SourceSpan | None = _span


@dataclass(frozen=True, slots=True)
class Store:
    """``*ptr := expr``"""

    ptr: str
    expr: Expr
    span: SourceSpan | None = _span


@dataclass(frozen=True, slots=True)
class Malloc:
    var: str
    size: Expr
    span: SourceSpan | None = _span


@dataclass(frozen=True, slots=True)
class Call:
    var: str
    proc: str
    args: tuple
    span: SourceSpan | None = _span


@dataclass(frozen=True, slots=True)
class Assert:
    pred: Formula
    span: SourceSpan | None = _span


@dataclass(frozen=True, slots=True)
class Assume:
    pred: Formula
    span: SourceSpan | None = _span


@dataclass(frozen=True, slots=True)
class NondetIf:
    then: Seq
    orelse: Seq
    span: SourceSpan | None = _span


@dataclass(frozen=True, slots=True)
class Havoc:
    """``var := nondet()``"""

    var: str
    span: SourceSpan | None = _span


Stmt = Union[Seq, Assign, Load, Store, Malloc, Call, Assert, Assume, NondetIf, Havoc]


def seq(stmts) -> Seq:
    """Build a flat Seq, splicing nested sequences."""
    flat = []
    for s in stmts:
        if isinstance(s, Seq):
            flat.extend(s.stmts)
        else:
            flat.append(s)
    return Seq(tuple(flat))


def defined_var(s: Stmt) -> str | None:
    if isinstance(s, (Assign, Load, Malloc, Call, Havoc)):
        return s.var
    return None


def walk(s: Stmt) -> Iterator[Stmt]:
    """Pre-order traversal of a statement tree."""
    yield s
    if isinstance(s, Seq):
        for c in s.stmts:
            yield from walk(c)
    elif isinstance(s, NondetIf):
        yield from walk(s.then)
        yield from walk(s.orelse)


# -- procedures and programs -------------------------------------------------


@dataclass(frozen=True, slots=True)
class Procedure:
    name: str
    params: tuple
    ret: str
    body: Seq
    span: SourceSpan | None = _span

    def calls(self) -> Iterator[Call]:
        for s in walk(self.body):
            if isinstance(s, Call):
                yield s


@dataclass(frozen=True)
class Program:
    procedures: tuple
    entry: str

    @cached_property
    def by_name(self) -> dict:
        return {p.name: p for p in self.procedures}

    def proc(self, name: str) -> Procedure:
        return self.by_name[name]

    def __contains__(self, name: str) -> bool:
        return name in self.by_name

    @cached_property
    def call_graph(self) -> dict:
        return {p.name: sorted({c.proc for c in p.calls()}) for p in self.procedures}

    def reachable(self, start: str | None = None) -> set:
        start = self.entry if start is None else start
        seen, todo = {start}, [start]
        while todo:
            for callee in self.call_graph[todo.pop()]:
                if callee not in seen:
                    seen.add(callee)
                    todo.append(callee)
        return seen

    def replace(self, procedures) -> "Program":
        return Program(tuple(procedures), self.entry)
