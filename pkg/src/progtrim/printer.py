"""Pretty printer producing canonical concrete syntax (2-space indent)."""

from __future__ import annotations

from .lang import (
    And,
    Assert,
    Assign,
    Assume,
    BinOp,
    BoolConst,
    Call,
    Cmp,
    Const,
    Drf,
    Exists,
    Forall,
    Havoc,
    Implies,
    Load,
    Malloc,
    NondetIf,
    Not,
    Or,
    Procedure,
    Program,
    Seq,
    Store,
    Var,
)

_ARITH_PREC = {"+": 1, "-": 1, "*": 2}
_NEG_CMP = {"=": "!=", "<": ">=", ">": "<="}


def _term_prec(e) -> int:
    return _ARITH_PREC[e.op] if isinstance(e, BinOp) else 3


def term_str(e) -> str:
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Const):
        return str(e.value)
    if isinstance(e, Drf):
        return f"drf({term_str(e.arg)})"
    if isinstance(e, BinOp):
        p = _ARITH_PREC[e.op]
        left = term_str(e.left)
        if _term_prec(e.left) < p:
            left = f"({left})"
        right = term_str(e.right)
        if _term_prec(e.right) <= p:
            right = f"({right})"
        return f"{left} {e.op} {right}"
    raise TypeError(f"not a term: {e!r}")


def _formula_prec(f) -> int:
    if isinstance(f, Implies):
        return 0
    if isinstance(f, Or):
        return 1
    if isinstance(f, And):
        return 2
    if isinstance(f, Not) and not isinstance(f.arg, Cmp):
        return 3
    if isinstance(f, (Forall, Exists)):
        return -1
    return 4


def formula_str(f) -> str:
    """Render a formula; object-language predicates come out as valid source."""
    if isinstance(f, BoolConst):
        return "true" if f.value else "false"
    if isinstance(f, Cmp):
        return f"{term_str(f.left)} {f.op} {term_str(f.right)}"
    if isinstance(f, Not):
        if isinstance(f.arg, Cmp):
            a = f.arg
            return f"{term_str(a.left)} {_NEG_CMP[a.op]} {term_str(a.right)}"
        return f"!({formula_str(f.arg)})"
    if isinstance(f, (And, Or)):
        p = _formula_prec(f)
        sep = " && " if isinstance(f, And) else " || "
        parts = []
        for a in f.args:
            s = formula_str(a)
            parts.append(f"({s})" if _formula_prec(a) <= p else s)
        return sep.join(parts)
    if isinstance(f, Implies):
        left = formula_str(f.left)
        if _formula_prec(f.left) <= 0:
            left = f"({left})"
        right = formula_str(f.right)
        if _formula_prec(f.right) < 0:
            right = f"({right})"
        return f"{left} ==> {right}"
    if isinstance(f, (Forall, Exists)):
        q = "forall" if isinstance(f, Forall) else "exists"
        return f"{q} {f.var}. {formula_str(f.body)}"
    raise TypeError(f"not a formula: {f!r}")


def _stmt_lines(s, depth: int, out: list) -> None:
    pad = "  " * depth
    if isinstance(s, Seq):
        for c in s.stmts:
            _stmt_lines(c, depth, out)
    elif isinstance(s, Assign):
        out.append(f"{pad}{s.var} := {term_str(s.expr)};")
    elif isinstance(s, Load):
        out.append(f"{pad}{s.var} := *{s.ptr};")
    elif isinstance(s, Store):
        out.append(f"{pad}*{s.ptr} := {term_str(s.expr)};")
    elif isinstance(s, Malloc):
        out.append(f"{pad}{s.var} := malloc({term_str(s.size)});")
    elif isinstance(s, Call):
        out.append(f"{pad}{s.var} := call {s.proc}({', '.join(s.args)});")
    elif isinstance(s, Assert):
        out.append(f"{pad}assert {formula_str(s.pred)};")
    elif isinstance(s, Assume):
        out.append(f"{pad}assume {formula_str(s.pred)};")
    elif isinstance(s, Havoc):
        out.append(f"{pad}{s.var} := nondet();")
    elif isinstance(s, NondetIf):
        out.append(f"{pad}if (*) {{")
        _stmt_lines(s.then, depth + 1, out)
        out.append(f"{pad}}} else {{")
        _stmt_lines(s.orelse, depth + 1, out)
        out.append(f"{pad}}}")
    else:
        raise TypeError(f"not a statement: {s!r}")


def stmt_str(s, depth: int = 0) -> str:
    out: list = []
    _stmt_lines(s, depth, out)
    return "\n".join(out)


def proc_str(p: Procedure) -> str:
    lines = [f"proc {p.name}({', '.join(p.params)}) : {p.ret} {{"]
    _stmt_lines(p.body, 1, lines)
    lines.append("}")
    return "\n".join(lines)


def print_program(prog: Program) -> str:
    return "\n\n".join(proc_str(p) for p in prog.procedures) + "\n"
