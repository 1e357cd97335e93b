"""Random generators for statements, formulas and whole programs.

All generators take an explicit ``random.Random``; ``rng_from_env`` seeds one
from ``TRIM_SEED`` so runs are reproducible.
"""

from __future__ import annotations

import os
import random

from .lang import (
    And,
    Assert,
    Assign,
    Assume,
    BinOp,
    Call,
    Cmp,
    Const,
    Drf,
    Exists,
    Havoc,
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
    walk,
)

DEFAULT_SEED = 20170901


def rng_from_env(offset: int = 0) -> random.Random:
    seed = int(os.environ.get("TRIM_SEED", DEFAULT_SEED))
    return random.Random(seed + offset)


# -- expressions and predicates ----------------------------------------------


def gen_expr(rng: random.Random, ints, depth: int = 2, consts=(-2, 3), mul=True):
    if depth <= 0 or rng.random() < 0.45:
        if ints and rng.random() < 0.7:
            return Var(rng.choice(sorted(ints)))
        return Const(rng.randint(*consts))
    ops = "+-*" if mul else "+-"
    op = rng.choice(ops)
    if op == "*":
        # keep products linear-ish and small: constant times subterm
        return BinOp("*", Const(rng.randint(-2, 2)), gen_expr(rng, ints, depth - 1, consts, mul))
    return BinOp(op, gen_expr(rng, ints, depth - 1, consts, mul), gen_expr(rng, ints, depth - 1, consts, mul))


def gen_atom(rng: random.Random, ints, consts=(-2, 3), mul=True):
    op = rng.choice("<>=")
    return Cmp(op, gen_expr(rng, ints, 1, consts, mul), gen_expr(rng, ints, 1, consts, mul))


def gen_pred(rng: random.Random, ints, depth: int = 1, consts=(-2, 3), mul=True):
    if depth <= 0 or rng.random() < 0.5:
        a = gen_atom(rng, ints, consts, mul)
        return Not(a) if rng.random() < 0.3 else a
    k = rng.randint(2, 3)
    parts = tuple(gen_pred(rng, ints, depth - 1, consts, mul) for _ in range(k))
    return And(parts) if rng.random() < 0.5 else Or(parts)


# -- loop-free, call-free statements -----------------------------------------

SCALARS = ("x", "y")
POINTERS = ("p", "q")


def gen_simple_stmt(rng: random.Random, depth: int = 2, allow_malloc: bool = True):
    """A loop-free, call-free statement over scalars x, y and pointers p, q."""
    terms = set(SCALARS)
    if depth > 0 and rng.random() < 0.25:
        if rng.random() < 0.5:
            return NondetIf(_simple_seq(rng, depth - 1, allow_malloc), _simple_seq(rng, depth - 1, allow_malloc))
        g = gen_atom(rng, terms)
        then = _simple_seq(rng, depth - 1, allow_malloc)
        orelse = _simple_seq(rng, depth - 1, allow_malloc)
        return NondetIf(Seq((Assume(g),) + then.stmts), Seq((Assume(Not(g)),) + orelse.stmts))
    r = rng.random()
    if r < 0.2:
        return Assign(rng.choice(SCALARS), gen_expr(rng, terms))
    if r < 0.35:
        return Load(rng.choice(SCALARS), rng.choice(POINTERS))
    if r < 0.55:
        return Store(rng.choice(POINTERS), gen_expr(rng, terms, 1))
    if r < 0.62:
        return Havoc(rng.choice(SCALARS))
    if r < 0.67 and allow_malloc:
        return Malloc(rng.choice(POINTERS), Const(1))
    if r < 0.72:
        a, b = rng.sample(POINTERS, 2)
        return Assign(a, Var(b))
    if r < 0.9:
        return Assert(gen_pred(rng, terms))
    return Assume(gen_pred(rng, terms))


def _simple_seq(rng, depth, allow_malloc=True) -> Seq:
    n = rng.randint(1, 3)
    return Seq(tuple(gen_simple_stmt(rng, depth, allow_malloc) for _ in range(n)))


def gen_simple_body(rng: random.Random, max_len: int = 5) -> Seq:
    n = rng.randint(1, max_len)
    stmts = []
    mallocs = 0
    for _ in range(n):
        s = gen_simple_stmt(rng, 2, allow_malloc=mallocs < 2)
        mallocs += sum(isinstance(x, Malloc) for x in walk(s))
        stmts.append(s)
    return Seq(tuple(stmts))


def gen_post(rng: random.Random):
    """Random postcondition over scalars and the cells p and q point to."""
    terms = {Var("x"), Var("y"), Drf(Var("p")), Drf(Var("q"))}

    def term():
        t = rng.choice(sorted(terms, key=repr))
        if rng.random() < 0.3:
            return BinOp(rng.choice("+-"), t, Const(rng.randint(-2, 2)))
        return t

    def atom():
        if rng.random() < 0.15:
            return Cmp("=", Var("p"), Var("q"))
        return Cmp(rng.choice("<>="), term(), rng.choice([term(), Const(rng.randint(-2, 2))]))

    def go(d):
        if d == 0 or rng.random() < 0.5:
            a = atom()
            return Not(a) if rng.random() < 0.3 else a
        parts = tuple(go(d - 1) for _ in range(rng.randint(2, 3)))
        return And(parts) if rng.random() < 0.5 else Or(parts)

    return go(2)


# -- formulas for the engine -------------------------------------------------


def gen_qe_formula(rng: random.Random, exact: bool = True, names=("x", "y", "z")):
    """An NNF formula with existentials over linear literals.

    With ``exact`` every literal has unit coefficients on the quantified
    variables and no heap reads, which is the fragment eliminated exactly.
    """
    bound = list(names[: rng.randint(1, 2)])
    free = [n for n in ("a", "b") if rng.random() < 0.8] or ["a"]

    def lin(allowed):
        e = None
        for v in allowed:
            c = rng.choice([-1, 0, 1]) if exact or v not in bound else rng.choice([-2, -1, 0, 1, 2, 3])
            if c == 0:
                continue
            t = Var(v) if abs(c) == 1 else BinOp("*", Const(abs(c)), Var(v))
            if e is None:
                e = t if c > 0 else BinOp("-", Const(0), t)
            else:
                e = BinOp("+" if c > 0 else "-", e, t)
        if not exact and rng.random() < 0.15:
            d = Drf(Var(rng.choice(allowed)))
            e = d if e is None else BinOp("+", e, d)
        k = Const(rng.randint(-3, 3))
        return k if e is None else BinOp("+", e, k)

    def literal(scope):
        # at most one bound variable per literal keeps projections exact
        qv = [v for v in scope if v in bound]
        allowed = free + (rng.sample(qv, 1) if qv else [])
        a = Cmp(rng.choice("<>="), lin(allowed), Const(0))
        return Not(a) if rng.random() < 0.3 else a

    def go(depth, scope):
        r = rng.random()
        if depth <= 0 or r < 0.3:
            return literal(scope)
        unbound = [v for v in bound if v not in scope]
        if unbound and r < 0.55:
            v = unbound[0]
            return Exists(v, go(depth - 1, scope + [v]))
        parts = tuple(go(depth - 1, scope) for _ in range(rng.randint(2, 3)))
        return And(parts) if rng.random() < 0.5 else Or(parts)

    f = go(3, [])
    for v in reversed(bound):
        if rng.random() < 0.7:
            f = Exists(v, f)
    return f


def gen_conjunctive(rng: random.Random, names=("a", "b")):
    """Random NNF predicate for conjunct bounding."""

    def go(d):
        if d == 0 or rng.random() < 0.3:
            a = gen_atom(rng, set(names))
            return Not(a) if rng.random() < 0.3 else a
        parts = tuple(go(d - 1) for _ in range(rng.randint(2, 6)))
        return And(parts) if rng.random() < 0.6 else Or(parts)

    return go(3)


# -- whole programs ----------------------------------------------------------


class _ProcGen:
    def __init__(self, rng, name, params, ptr_params, callees, self_rec, max_stmts):
        self.rng = rng
        self.name = name
        self.params = params
        self.ptr_params = ptr_params
        self.callees = callees  # list of (name, n_int, n_ptr)
        self.self_rec = self_rec
        self.budget = max_stmts
        self.counter = 0
        # the recursion measure is never written, so recursion depth is bounded
        self.frozen = {params[0]} if self_rec else set()

    def fresh(self, prefix):
        self.counter += 1
        return f"{prefix}{self.counter}"

    def body(self) -> Seq:
        ints = set(p for p in self.params if p not in self.ptr_params) | {"r"}
        ptrs = set(self.ptr_params)
        stmts = self.block(ints, ptrs, depth=2)
        return Seq(tuple(stmts))

    def block(self, ints, ptrs, depth):
        out = []
        n = self.rng.randint(1, 4)
        for _ in range(n):
            if self.budget <= 0:
                break
            out.extend(self.stmt(ints, ptrs, depth))
        if not out:
            out.append(Assign("r", gen_expr(self.rng, ints, 1, mul=False)))
            self.budget -= 1
        return out

    def stmt(self, ints, ptrs, depth):
        rng = self.rng
        self.budget -= 1
        r = rng.random()
        if depth > 0 and r < 0.2 and self.budget > 2:
            g = gen_atom(rng, ints, mul=False)
            t_ints, t_ptrs = set(ints), set(ptrs)
            e_ints, e_ptrs = set(ints), set(ptrs)
            then = self.block(t_ints, t_ptrs, depth - 1)
            orelse = self.block(e_ints, e_ptrs, depth - 1)
            ints |= t_ints & e_ints
            ptrs |= t_ptrs & e_ptrs
            if rng.random() < 0.6:
                return [NondetIf(Seq((Assume(g),) + tuple(then)), Seq((Assume(Not(g)),) + tuple(orelse)))]
            return [NondetIf(Seq(tuple(then)), Seq(tuple(orelse)))]
        if r < 0.35:
            v = rng.choice(sorted(ints - self.frozen | {self.fresh("v")}))
            e = gen_expr(rng, ints, 2, mul=rng.random() < 0.3)
            ints.add(v)
            return [Assign(v, e)]
        if r < 0.45:
            v = rng.choice(sorted(ints - {"r"} - self.frozen | {self.fresh("h")}))
            ints.add(v)
            return [Havoc(v)]
        if r < 0.65:
            return [Assert(gen_pred(rng, ints, 1, mul=False))]
        if r < 0.7:
            return [Assume(gen_pred(rng, ints, 0, mul=False))]
        if r < 0.8 and ptrs:
            p = rng.choice(sorted(ptrs))
            if rng.random() < 0.5:
                return [Store(p, gen_expr(rng, ints, 1, mul=False))]
            v = rng.choice(sorted(ints - self.frozen | {self.fresh("v")}))
            ints.add(v)
            return [Load(v, p)]
        if r < 0.85:
            p = self.fresh("m")
            ptrs.add(p)
            return [Malloc(p, Const(1)), Store(p, gen_expr(rng, ints, 1, mul=False))]
        return self.call(ints, ptrs)

    def call(self, ints, ptrs):
        rng = self.rng
        options = list(self.callees)
        if self.self_rec:
            options.append((self.name, len(self.params) - len(self.ptr_params), len(self.ptr_params)))
        if not options:
            return [Assert(gen_pred(rng, ints, 0, mul=False))]
        name, n_int, n_ptr = rng.choice(options)
        if n_ptr and not ptrs:
            p = self.fresh("m")
            ptrs.add(p)
            pre = [Malloc(p, Const(1)), Store(p, Const(rng.randint(-1, 1)))]
        else:
            pre = []
        args = [rng.choice(sorted(ints)) for _ in range(n_int)] + [rng.choice(sorted(ptrs)) for _ in range(n_ptr)]
        v = rng.choice(sorted(ints - self.frozen | {self.fresh("c")}))
        if name == self.name:
            # recursion on a decreasing first argument
            n = self.params[0]
            m = self.fresh("d")
            call = Call(v, name, tuple([m] + args[1:]))
            inner = Seq((Assume(Cmp(">", Var(n), Const(0))), Assign(m, BinOp("-", Var(n), Const(1))), call))
            skip = Seq((Assume(Not(Cmp(">", Var(n), Const(0)))), Assign(v, Const(0))))
            ints.add(v)
            return [NondetIf(inner, skip)]
        ints.add(v)
        return pre + [Call(v, name, tuple(args))]


def gen_program(rng: random.Random, max_procs: int = 3, max_stmts: int = 12) -> Program:
    """Random well-formed program; ``main`` has only integer parameters."""
    n = rng.randint(1, max_procs)
    specs = []  # (name, params, ptr_params)
    for i in range(n - 1):
        n_int = rng.randint(1, 2)
        n_ptr = 1 if rng.random() < 0.4 else 0
        params = tuple(f"a{j}" for j in range(n_int)) + tuple(f"p{j}" for j in range(n_ptr))
        specs.append((f"f{i}", params, params[n_int:]))
    specs.append(("main", tuple(f"a{j}" for j in range(rng.randint(1, 2))), ()))
    procs = []
    for i, (name, params, ptrs) in enumerate(specs):
        callees = [(s[0], len(s[1]) - len(s[2]), len(s[2])) for s in specs[:i]]
        self_rec = name != "main" and rng.random() < 0.3
        g = _ProcGen(rng, name, params, ptrs, callees, self_rec, max_stmts)
        procs.append(Procedure(name, params, "r", g.body()))
    prog = Program(tuple(procs), "main")
    return _canonical(prog)


def _canonical(prog: Program) -> Program:
    """Round-trip through concrete syntax so spans and shapes match parsed programs."""
    from .parser import parse
    from .printer import print_program

    return parse(print_program(prog), "<generated>")


def negate_assert(prog: Program, index: int) -> Program:
    """Copy of ``prog`` with the ``index``-th assertion's predicate negated."""
    from dataclasses import replace

    count = [0]

    def go(s):
        if isinstance(s, Seq):
            return Seq(tuple(go(c) for c in s.stmts), s.span)
        if isinstance(s, NondetIf):
            return NondetIf(go(s.then), go(s.orelse), s.span)
        if isinstance(s, Assert):
            k = count[0]
            count[0] += 1
            if k == index:
                return Assert(Not(s.pred), s.span)
        return s

    procs = tuple(replace(p, body=go(p.body)) for p in prog.procedures)
    return Program(procs, prog.entry)

