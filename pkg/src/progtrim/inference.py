"""Backward inference of safety conditions and procedure summaries.

A safety condition at a program point is a formula that, when it holds there,
guarantees the rest of the procedure cannot violate an assertion.  Conditions
are computed right-to-left over each body, starting from ``true``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .alias import TOP, AliasOracle
from .formula import (
    all_vars,
    conj,
    derefs,
    forall,
    free_vars,
    fresh_name,
    implies,
    mk_cmp,
    neg,
    rename_bound,
    replace_term,
    simplify,
    subst_var,
    term_vars,
)
from .lang import (
    FALSE,
    TRUE,
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
    Program,
    Seq,
    Store,
    Var,
)

INT_MIN, INT_MAX = -(2**31), 2**31 - 1
MUL_LIMIT = 46340  # floor(sqrt(INT_MAX))


@dataclass
class Annotations:
    """Safety conditions keyed by (procedure, position path)."""

    program: Program
    conditions: dict = field(default_factory=dict)
    summaries: dict = field(default_factory=dict)

    def at(self, proc: str, path: tuple):
        return self.conditions[(proc, path)]


# -- heap operators ----------------------------------------------------------


def _ne(a, b):
    return neg(mk_cmp("=", a, b))


def _fresh_bound(f, avoid):
    """Rename bound variables of ``f`` that clash with ``avoid``."""
    clash = set(avoid) & (all_vars(f) - free_vars(f))
    return rename_bound(f, set(avoid) | free_vars(f)) if clash else f


def store(oracle: AliasOracle, proc: str, ptr: str, e, phi):
    """Backward transformer for ``*ptr := e``.

    Every drf(ptr) is replaced by ``e``; for every other dereferenced term that
    may alias ``ptr`` a disequality is added.  The disequality is stated over
    the pre-state value of the term, and terms mentioning a quantified variable
    get theirs inside that quantifier.
    """
    alpha = Var(ptr)
    target = Drf(alpha)
    phi = _fresh_bound(phi, term_vars(e) | {ptr})

    def repl(t):
        return replace_term(t, target, e)

    def diseqs(terms, bound):
        out = []
        for b in sorted(terms, key=repr):
            if b == alpha or not oracle.may_alias(proc, b, alpha, bound):
                continue
            out.append(_ne(repl(b), alpha))
        return out

    def go(f, bound):
        if isinstance(f, BoolConst):
            return f
        if isinstance(f, Cmp):
            return mk_cmp(f.op, repl(f.left), repl(f.right))
        if isinstance(f, Not):
            return neg(go(f.arg, bound))
        if isinstance(f, And):
            return And(tuple(go(a, bound) for a in f.args))
        if isinstance(f, Or):
            return Or(tuple(go(a, bound) for a in f.args))
        if isinstance(f, Implies):
            return Implies(go(f.left, bound), go(f.right, bound))
        if isinstance(f, (Forall, Exists)):
            inner = bound | {f.var}
            body = go(f.body, inner)
            local = {b for b in derefs(f.body) if f.var in term_vars(b) and not (term_vars(b) & _bound_in(f.body))}
            extra = diseqs(local, inner)
            if extra:
                body = conj(body, *extra)
            return type(f)(f.var, body)
        raise TypeError(f"not a formula: {f!r}")

    free = {b for b in derefs(phi) if not (term_vars(b) & _bound_in(phi))}
    return simplify(conj(go(phi, frozenset()), *diseqs(free, frozenset())))


def _bound_in(f) -> set:
    return all_vars(f) - free_vars(f)


def generalize(phi, var: str | None = None):
    """Universally quantify ``var`` and every heap read whose address depends on it.

    With ``var=None`` every heap read is generalized (unknown writes).  Heap reads
    are replaced outermost-first by fresh universally quantified variables.
    """
    avoid = all_vars(phi)
    fresh: dict = {}

    def pick(t):
        if t not in fresh:
            name = fresh_name(avoid)
            avoid.add(name)
            fresh[t] = name
        return Var(fresh[t])

    def term(t, bound):
        if isinstance(t, Drf):
            tv = term_vars(t.arg)
            if not (tv & bound) and (var is None or var in tv):
                return pick(t)
            return Drf(term(t.arg, bound))
        if isinstance(t, BinOp):
            return BinOp(t.op, term(t.left, bound), term(t.right, bound))
        return t

    def go(f, bound):
        if isinstance(f, BoolConst):
            return f
        if isinstance(f, Cmp):
            return Cmp(f.op, term(f.left, bound), term(f.right, bound))
        if isinstance(f, Not):
            return Not(go(f.arg, bound))
        if isinstance(f, And):
            return And(tuple(go(a, bound) for a in f.args))
        if isinstance(f, Or):
            return Or(tuple(go(a, bound) for a in f.args))
        if isinstance(f, Implies):
            return Implies(go(f.left, bound), go(f.right, bound))
        return type(f)(f.var, go(f.body, bound | {f.var}))

    if var is not None and var in (all_vars(phi) - free_vars(phi)):
        phi = rename_bound(phi, {var})
        avoid = all_vars(phi)
    body = go(phi, frozenset())
    for name in sorted(fresh.values(), reverse=True):
        body = forall(name, body)
    if var is not None:
        body = forall(var, body)
    return simplify(body)


def havoc(oracle: AliasOracle, proc: str, locs, phi):
    """Forget the contents of ``locs`` (drf terms or variables), head first."""
    for loc in reversed(list(locs)):
        if isinstance(loc, Var):
            phi = generalize(phi, loc.name)
            continue
        ptr = loc.arg.name
        vnew = fresh_name(all_vars(phi) | {ptr}, prefix="_h")
        phi = generalize(store(oracle, proc, ptr, Var(vnew), phi), vnew)
    return phi


def summary(summaries: dict, oracle: AliasOracle, callee: str, actuals, avoid=frozenset()):
    """Safety precondition of a call, in terms of the actual arguments."""
    if callee not in summaries:
        return FALSE if oracle.has_asrts(callee) else TRUE
    phi = summaries[callee]
    formals = oracle.program.proc(callee).params
    phi = rename_bound(phi, set(avoid) | set(actuals) | set(formals))
    # simultaneous substitution via placeholders
    temps = []
    taken = all_vars(phi) | set(actuals) | set(avoid)
    for f in formals:
        t = fresh_name(taken, prefix="_s")
        taken.add(t)
        temps.append(t)
        phi = subst_var(phi, f, Var(t))
    for t, a in zip(temps, actuals):
        phi = subst_var(phi, t, Var(a))
    return simplify(phi)


# -- fixed-width integers ----------------------------------------------------


def no_overflow(e):
    """Side condition ruling out 32-bit overflow at every arithmetic node of ``e``.

    Stated over operands so that evaluating the condition itself cannot wrap.
    """
    if isinstance(e, Drf):
        return no_overflow(e.arg)
    if not isinstance(e, BinOp):
        return TRUE
    a, b = e.left, e.right
    parts = [no_overflow(a), no_overflow(b)]
    zero = Const(0)
    if e.op == "+":
        parts.append(neg(conj(mk_cmp(">", b, zero), mk_cmp(">", a, BinOp("-", Const(INT_MAX), b)))))
        parts.append(neg(conj(mk_cmp("<", b, zero), mk_cmp("<", a, BinOp("-", Const(INT_MIN), b)))))
    elif e.op == "-":
        parts.append(neg(conj(mk_cmp("<", b, zero), mk_cmp(">", a, BinOp("+", Const(INT_MAX), b)))))
        parts.append(neg(conj(mk_cmp(">", b, zero), mk_cmp("<", a, BinOp("+", Const(INT_MIN), b)))))
    else:
        for x in (a, b):
            parts.append(neg(mk_cmp(">", x, Const(MUL_LIMIT))))
            parts.append(neg(mk_cmp("<", x, Const(-MUL_LIMIT))))
    return simplify(conj(*parts))


def _pred_overflow(p):
    out = []

    def go(f):
        if isinstance(f, Cmp):
            out.append(no_overflow(f.left))
            out.append(no_overflow(f.right))
        elif isinstance(f, Not):
            go(f.arg)
        elif isinstance(f, (And, Or)):
            for a in f.args:
                go(a)

    go(p)
    return conj(*out)


# -- rules -------------------------------------------------------------------


@dataclass
class _Ctx:
    oracle: AliasOracle
    summaries: dict
    proc: str
    wrap32: bool
    record: dict | None


def infer_statement(ctx: _Ctx, s, phi, path: tuple = ()):
    """Safety condition before ``s`` given condition ``phi`` after it."""
    if isinstance(s, Seq):
        return _infer_seq(ctx, s, phi, path)
    if isinstance(s, Assign):
        out = subst_var(phi, s.var, s.expr)
        if ctx.wrap32:
            out = conj(out, no_overflow(s.expr))
        return simplify(out)
    if isinstance(s, Load):
        return simplify(subst_var(phi, s.var, Drf(Var(s.ptr))))
    if isinstance(s, Store):
        out = store(ctx.oracle, ctx.proc, s.ptr, s.expr, phi)
        if ctx.wrap32:
            out = conj(out, no_overflow(s.expr))
        return out
    if isinstance(s, Malloc):
        out = generalize(phi, s.var)
        if ctx.wrap32:
            out = conj(out, no_overflow(s.size))
        return out
    if isinstance(s, Havoc):
        return generalize(phi, s.var)
    if isinstance(s, Call):
        locs = ctx.oracle.mod_locs(s.proc, s.args)
        after = generalize(phi, s.var)
        after = generalize(after) if locs is TOP else havoc(ctx.oracle, ctx.proc, sorted(locs, key=repr), after)
        pre = summary(ctx.summaries, ctx.oracle, s.proc, s.args, avoid=all_vars(after))
        return simplify(conj(after, pre))
    if isinstance(s, Assert):
        out = conj(simplify(s.pred), phi)
        if ctx.wrap32:
            out = conj(out, _pred_overflow(s.pred))
        return out
    if isinstance(s, Assume):
        out = implies(simplify(s.pred), phi)
        if ctx.wrap32:
            out = conj(out, _pred_overflow(s.pred))
        return out
    if isinstance(s, NondetIf):
        left = infer_statement(ctx, s.then, phi, path + (0,))
        right = infer_statement(ctx, s.orelse, phi, path + (1,))
        return conj(left, right)
    raise TypeError(f"not a statement: {s!r}")


def _infer_seq(ctx: _Ctx, s: Seq, phi, path: tuple):
    n = len(s.stmts)
    if ctx.record is not None:
        ctx.record[(ctx.proc, path + (n,))] = phi
    for i in range(n - 1, -1, -1):
        phi = infer_statement(ctx, s.stmts[i], phi, path + (i,))
        if ctx.record is not None:
            ctx.record[(ctx.proc, path + (i,))] = phi
    return phi


def infer_body(oracle, summaries, proc, post=TRUE, wrap32=False, record=None):
    p = oracle.program.proc(proc)
    ctx = _Ctx(oracle, summaries, proc, wrap32, record)
    return infer_statement(ctx, p.body, post, ())


# -- whole programs ----------------------------------------------------------


def sccs(prog: Program) -> list:
    """Strongly connected components of the call graph, callees first (Tarjan)."""
    index: dict = {}
    low: dict = {}
    stack: list = []
    on: set = set()
    out: list = []
    order = {p.name: i for i, p in enumerate(prog.procedures)}

    def visit(v):
        index[v] = low[v] = len(index)
        stack.append(v)
        on.add(v)
        for w in prog.call_graph[v]:
            if w not in index:
                visit(w)
                low[v] = min(low[v], low[w])
            elif w in on:
                low[v] = min(low[v], index[w])
        if low[v] == index[v]:
            comp = []
            while True:
                w = stack.pop()
                on.discard(w)
                comp.append(w)
                if w == v:
                    break
            out.append(sorted(comp, key=order.get))

    for p in prog.procedures:
        if p.name not in index:
            visit(p.name)
    return out


def infer_program(prog: Program, oracle: AliasOracle, wrap32: bool = False) -> Annotations:
    ann = Annotations(prog)
    for comp in sccs(prog):
        for name in comp:
            phi = infer_body(oracle, ann.summaries, name, TRUE, wrap32, ann.conditions)
            ret = prog.proc(name).ret
            ann.summaries[name] = simplify(subst_var(phi, ret, Const(0)))
    return ann


def dump_conditions(ann: Annotations) -> str:
    """One ``proc:line: formula`` line per annotated statement."""
    from .printer import formula_str

    lines = []
    for p in ann.program.procedures:
        for (proc, path), phi in ann.conditions.items():
            if proc != p.name:
                continue
            s = statement_at(p.body, path)
            line = s.span.line if s is not None and s.span is not None else 0
            where = "end" if s is None else str(line)
            lines.append(f"{proc}:{where}: {formula_str(phi)}")
    return "\n".join(lines)


def statement_at(body: Seq, path: tuple):
    """Statement at a position path, or None for an end-of-sequence position."""
    s = body
    for depth, i in enumerate(path):
        if depth % 2 == 0:
            if i >= len(s.stmts):
                return None
            s = s.stmts[i]
        else:
            s = s.then if i == 0 else s.orelse
    return s

