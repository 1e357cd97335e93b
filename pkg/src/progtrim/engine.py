"""Turning safety conditions into trimming conditions.

The trimming condition is the negation of a safety condition, put in negation
normal form, with existential quantifiers either eliminated or replaced by
nondeterministic witnesses, and optionally bounded in size.  Every step either
preserves equivalence or weakens; nothing here ever strengthens.
"""

from __future__ import annotations

from dataclasses import dataclass

from .formula import all_vars, conj, derefs, disj, fresh_name, free_vars, neg, simplify, subst_var, term_vars
from .lang import (
    FALSE,
    TRUE,
    And,
    Assign,
    Assume,
    BinOp,
    BoolConst,
    Cmp,
    Const,
    Drf,
    Exists,
    Forall,
    Havoc,
    Implies,
    Load,
    Not,
    Or,
    Var,
)
from .linear import literal_form, to_expr

DEFAULT_DNF_CAP = 64


@dataclass(frozen=True)
class TrimmingCondition:
    """``witnesses`` are havocked before ``assume pred``; empty for pure predicates."""

    witnesses: tuple
    pred: object

    @property
    def trivial(self) -> bool:
        return self.pred == TRUE


# -- negation ----------------------------------------------------------------


def nnf(f, positive: bool = True):
    if isinstance(f, BoolConst):
        return f if positive else neg(f)
    if isinstance(f, Cmp):
        return f if positive else Not(f)
    if isinstance(f, Not):
        return nnf(f.arg, not positive)
    if isinstance(f, (And, Or)):
        parts = [nnf(a, positive) for a in f.args]
        if isinstance(f, And) == positive:
            return conj(*parts)
        return disj(*parts)
    if isinstance(f, Implies):
        if positive:
            return disj(nnf(f.left, False), nnf(f.right, True))
        return conj(nnf(f.left, True), nnf(f.right, False))
    if isinstance(f, (Forall, Exists)):
        universal = isinstance(f, Forall) == positive
        return (Forall if universal else Exists)(f.var, nnf(f.body, positive))
    raise TypeError(f"not a formula: {f!r}")


def negate_to_trim(phi):
    """Negation of a safety condition in negation normal form."""
    return nnf(phi, positive=False)


# -- quantifier elimination --------------------------------------------------


class _TooBig(Exception):
    pass


def _dnf(f, cap: int) -> list:
    """Cubes (lists of literals) of an NNF, quantifier-free-at-top formula."""
    if isinstance(f, Or):
        out = []
        for a in f.args:
            out.extend(_dnf(a, cap))
            if sum(len(c) for c in out) > cap:
                raise _TooBig
        return out
    if isinstance(f, And):
        cubes = [[]]
        for a in f.args:
            sub = _dnf(a, cap)
            cubes = [c + d for c in cubes for d in sub]
            if sum(len(c) for c in cubes) > cap:
                raise _TooBig
        return cubes
    if f == TRUE:
        return [[]]
    if f == FALSE:
        return []
    return [[f]]


def _elim_cube(var: str, lits: list):
    v = Var(var)
    keep, eqs, lower, upper, diseq = [], [], [], [], []
    for lit in lits:
        if var not in free_vars(lit):
            keep.append(lit)
            continue
        lf = literal_form(lit) if isinstance(lit, (Cmp, Not)) else None
        if lf is None:
            continue  # drop: weakening
        kind, coeffs, const = lf
        c = coeffs.get(v, 0)
        others = {t: k for t, k in coeffs.items() if t != v}
        if any(var in term_vars(t) for t in others) or abs(c) != 1:
            continue  # heap read or product over var, or non-unit: drop
        # c*v + rest < 0 | = 0 | != 0, rest = others + const
        # solve for v: v (op) -c*rest
        sol = to_expr({t: -c * k for t, k in others.items()}, -c * const)
        if kind == "=":
            eqs.append(sol)
        elif kind == "!=":
            diseq.append(lit)
        elif c == 1:
            # v + rest < 0  =>  v <= -rest - 1
            upper.append(to_expr({t: -k for t, k in others.items()}, -const - 1))
        else:
            # -v + rest < 0  =>  v >= rest + 1
            lower.append(to_expr(dict(others), const + 1))
    residual = [lit for lit in lits if lit not in keep]
    if eqs:
        t = eqs[0]
        return conj(*keep, *(simplify(subst_var(lit, var, t)) for lit in residual if _usable(lit, var)))
    usable = [lit for lit in residual if _usable(lit, var)]
    bounds = lower or upper
    if not bounds:
        return conj(*keep)
    step = 1 if lower else -1
    options = []
    for b in bounds:
        for j in range(len(diseq) + 1):
            point = BinOp("+", b, Const(step * j)) if j else b
            options.append(conj(*(simplify(subst_var(lit, var, point)) for lit in usable)))
    return conj(*keep, disj(*options))


def _usable(lit, var: str) -> bool:
    lf = literal_form(lit) if isinstance(lit, (Cmp, Not)) else None
    if lf is None:
        return False
    _, coeffs, _ = lf
    c = coeffs.get(Var(var), 0)
    if abs(c) != 1:
        return False
    return not any(var in term_vars(t) for t in coeffs if t != Var(var))


def eliminate_exists(var: str, body, cap: int = DEFAULT_DNF_CAP):
    """A quantifier-free formula implied by ``exists var. body`` (equal when exact).

    Falls back to leaving the quantifier in place when the DNF exceeds ``cap``.
    """
    if var not in free_vars(body):
        return body
    try:
        cubes = _dnf(body, cap)
    except _TooBig:
        return Exists(var, body)
    return simplify(disj(*(_elim_cube(var, c) for c in cubes)))


def eliminate_quantifiers(f, cap: int = DEFAULT_DNF_CAP):
    """Eliminate existentials bottom-up; stray universals are weakened to true."""
    if isinstance(f, (BoolConst, Cmp, Not)):
        return f
    if isinstance(f, And):
        return conj(*(eliminate_quantifiers(a, cap) for a in f.args))
    if isinstance(f, Or):
        return disj(*(eliminate_quantifiers(a, cap) for a in f.args))
    if isinstance(f, Exists):
        body = eliminate_quantifiers(f.body, cap)
        if isinstance(body, Or):
            return disj(*(eliminate_exists(f.var, a, cap) for a in body.args))
        return eliminate_exists(f.var, body, cap)
    if isinstance(f, Forall):
        return TRUE
    raise TypeError(f"expected NNF, got {f!r}")


def has_quantifier(f) -> bool:
    if isinstance(f, (Forall, Exists)):
        return True
    if isinstance(f, (And, Or)):
        return any(has_quantifier(a) for a in f.args)
    if isinstance(f, Not):
        return has_quantifier(f.arg)
    if isinstance(f, Implies):
        return has_quantifier(f.left) or has_quantifier(f.right)
    return False


# -- nondet encoding ---------------------------------------------------------


def nondet_encode(f, avoid=frozenset()) -> TrimmingCondition:
    """Replace each existential by a fresh witness variable."""
    taken = set(avoid) | all_vars(f)
    witnesses: list = []

    def go(g):
        if isinstance(g, (BoolConst, Cmp, Not)):
            return g
        if isinstance(g, (And, Or)):
            return type(g)(tuple(go(a) for a in g.args))
        if isinstance(g, Exists):
            name = fresh_name(taken)
            taken.add(name)
            witnesses.append(name)
            return go(subst_var(g.body, g.var, Var(name)))
        if isinstance(g, Forall):
            return TRUE
        raise TypeError(f"expected NNF, got {g!r}")

    pred = go(f)
    pred = simplify(_drop_witness_reads(pred, set(witnesses)))
    return _prune(TrimmingCondition(tuple(witnesses), pred))


def _drop_witness_reads(f, names: set):
    """Weaken away literals that read the heap at a witness-dependent address."""
    if isinstance(f, (Cmp, Not)):
        if any(term_vars(a) & names for a in derefs(f)):
            return TRUE
        return f
    if isinstance(f, (And, Or)):
        return type(f)(tuple(_drop_witness_reads(a, names) for a in f.args))
    return f


def _prune(tc: TrimmingCondition) -> TrimmingCondition:
    used = free_vars(tc.pred)
    return TrimmingCondition(tuple(w for w in tc.witnesses if w in used), tc.pred)


# -- bounding ----------------------------------------------------------------


def bound_conjuncts(f, k: int | None):
    """Keep at most ``k`` conjuncts in every conjunction (first ones kept)."""
    if k is None:
        return f
    if k < 1:
        raise ValueError("k must be positive")
    if isinstance(f, And):
        return conj(*(bound_conjuncts(a, k) for a in f.args[:k]))
    if isinstance(f, Or):
        return disj(*(bound_conjuncts(a, k) for a in f.args))
    if isinstance(f, (Exists, Forall)):
        return type(f)(f.var, bound_conjuncts(f.body, k))
    return f


# -- pipeline ----------------------------------------------------------------


def trimming_condition(phi, qe: str = "full", max_conjuncts=None, dnf_cap=DEFAULT_DNF_CAP, avoid=frozenset()):
    """Trimming condition for safety condition ``phi``."""
    f = negate_to_trim(simplify(phi))
    if qe == "full":
        f = eliminate_quantifiers(f, dnf_cap)
    elif qe != "nondet":
        raise ValueError(f"unknown qe mode {qe!r}")
    tc = nondet_encode(f, avoid) if has_quantifier(f) else TrimmingCondition((), simplify(f))
    pred = simplify(bound_conjuncts(tc.pred, max_conjuncts))
    return _prune(TrimmingCondition(tc.witnesses, pred))


def emit(tc: TrimmingCondition, avoid: set) -> list:
    """Statements realising ``tc``: witness havocs, heap loads, then the assume."""
    taken = set(avoid) | set(tc.witnesses)
    out: list = [Havoc(w) for w in tc.witnesses]
    cache: dict = {}

    def load(t):
        # t is Drf; returns a variable holding its value
        if t in cache:
            return cache[t]
        addr = lower(t.arg)
        if not isinstance(addr, Var):
            name = fresh_name(taken, prefix="_t")
            taken.add(name)
            out.append(Assign(name, addr))
            addr = Var(name)
        name = fresh_name(taken, prefix="_t")
        taken.add(name)
        out.append(Load(name, addr.name))
        cache[t] = Var(name)
        return cache[t]

    def lower(t):
        if isinstance(t, Drf):
            return load(t)
        if isinstance(t, BinOp):
            return BinOp(t.op, lower(t.left), lower(t.right))
        return t

    def go(f):
        if isinstance(f, Cmp):
            return Cmp(f.op, lower(f.left), lower(f.right))
        if isinstance(f, Not):
            return Not(go(f.arg))
        if isinstance(f, (And, Or)):
            return type(f)(tuple(go(a) for a in f.args))
        return f

    pred = go(tc.pred)
    out.append(Assume(pred))
    return out

