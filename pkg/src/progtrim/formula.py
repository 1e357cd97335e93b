"""Formula operations: free variables, derefs, substitution and simplification."""

from __future__ import annotations

from .lang import (
    FALSE,
    TRUE,
    And,
    BinOp,
    BoolConst,
    Cmp,
    Const,
    Drf,
    Exists,
    Forall,
    Implies,
    Not,
    Or,
    Var,
)
from .linear import linearize, literal_form, sub

# -- traversal ---------------------------------------------------------------


def term_vars(t) -> set:
    if isinstance(t, Var):
        return {t.name}
    if isinstance(t, Const):
        return set()
    if isinstance(t, Drf):
        return term_vars(t.arg)
    return term_vars(t.left) | term_vars(t.right)


def _term_derefs(t, acc: set) -> None:
    if isinstance(t, Drf):
        acc.add(t.arg)
        _term_derefs(t.arg, acc)
    elif isinstance(t, BinOp):
        _term_derefs(t.left, acc)
        _term_derefs(t.right, acc)


def atoms_terms(f):
    """Yield the top-level terms of every comparison in ``f``."""
    if isinstance(f, Cmp):
        yield f.left
        yield f.right
    elif isinstance(f, Not):
        yield from atoms_terms(f.arg)
    elif isinstance(f, (And, Or)):
        for a in f.args:
            yield from atoms_terms(a)
    elif isinstance(f, Implies):
        yield from atoms_terms(f.left)
        yield from atoms_terms(f.right)
    elif isinstance(f, (Forall, Exists)):
        yield from atoms_terms(f.body)


def free_vars(f) -> set:
    if isinstance(f, BoolConst):
        return set()
    if isinstance(f, Cmp):
        return term_vars(f.left) | term_vars(f.right)
    if isinstance(f, Not):
        return free_vars(f.arg)
    if isinstance(f, (And, Or)):
        out: set = set()
        for a in f.args:
            out |= free_vars(a)
        return out
    if isinstance(f, Implies):
        return free_vars(f.left) | free_vars(f.right)
    if isinstance(f, (Forall, Exists)):
        return free_vars(f.body) - {f.var}
    # terms are accepted too
    return term_vars(f)


def all_vars(f) -> set:
    """Free and bound variable names."""
    out = set()
    for t in atoms_terms(f):
        out |= term_vars(t)
    stack = [f]
    while stack:
        g = stack.pop()
        if isinstance(g, (Forall, Exists)):
            out.add(g.var)
            stack.append(g.body)
        elif isinstance(g, (And, Or)):
            stack.extend(g.args)
        elif isinstance(g, Not):
            stack.append(g.arg)
        elif isinstance(g, Implies):
            stack.extend((g.left, g.right))
    return out


def derefs(f) -> set:
    """All terms a such that drf(a) occurs in ``f`` (nested levels included)."""
    acc: set = set()
    for t in atoms_terms(f):
        _term_derefs(t, acc)
    return acc


def fresh_name(avoid, prefix: str = "_q") -> str:
    n = 1
    while f"{prefix}{n}" in avoid:
        n += 1
    return f"{prefix}{n}"


# -- substitution ------------------------------------------------------------


def replace_term(t, old, new):
    if t == old:
        return new
    if isinstance(t, Drf):
        a = replace_term(t.arg, old, new)
        return t if a is t.arg else Drf(a)
    if isinstance(t, BinOp):
        left = replace_term(t.left, old, new)
        right = replace_term(t.right, old, new)
        if left is t.left and right is t.right:
            return t
        return BinOp(t.op, left, right)
    return t


def substitute(f, old, new, *, avoid=frozenset()):
    """Capture-avoiding replacement of every occurrence of term ``old`` by ``new``.

    Bound variables that would capture a variable of ``new`` are renamed to fresh
    ``_q<N>`` names (also avoiding ``avoid``).
    """
    old_fv = term_vars(old)
    new_fv = term_vars(new)

    def go(g):
        if isinstance(g, BoolConst):
            return g
        if isinstance(g, Cmp):
            left = replace_term(g.left, old, new)
            right = replace_term(g.right, old, new)
            if left is g.left and right is g.right:
                return g
            return Cmp(g.op, left, right)
        if isinstance(g, Not):
            return Not(go(g.arg))
        if isinstance(g, And):
            return And(tuple(go(a) for a in g.args))
        if isinstance(g, Or):
            return Or(tuple(go(a) for a in g.args))
        if isinstance(g, Implies):
            return Implies(go(g.left), go(g.right))
        if isinstance(g, (Forall, Exists)):
            if g.var in old_fv:
                return g
            var, body = g.var, g.body
            if var in new_fv:
                fresh = fresh_name(all_vars(body) | new_fv | old_fv | set(avoid))
                body = substitute(body, Var(var), Var(fresh))
                var = fresh
            return type(g)(var, go(body))
        raise TypeError(f"not a formula: {g!r}")

    return go(f)


def subst_var(f, name: str, e):
    return substitute(f, Var(name), e)


def rename_bound(f, avoid: set):
    """Alpha-rename every bound variable of ``f`` to a fresh ``_q`` name."""
    taken = set(avoid) | all_vars(f)

    def go(g):
        if isinstance(g, (Forall, Exists)):
            fresh = fresh_name(taken)
            taken.add(fresh)
            return type(g)(fresh, go(subst_var(g.body, g.var, Var(fresh))))
        if isinstance(g, Not):
            return Not(go(g.arg))
        if isinstance(g, And):
            return And(tuple(go(a) for a in g.args))
        if isinstance(g, Or):
            return Or(tuple(go(a) for a in g.args))
        if isinstance(g, Implies):
            return Implies(go(g.left), go(g.right))
        return g

    return go(f)


# -- simplification ----------------------------------------------------------


def simplify_term(t):
    if isinstance(t, Drf):
        a = simplify_term(t.arg)
        return t if a is t.arg else Drf(a)
    if not isinstance(t, BinOp):
        return t
    left, right = simplify_term(t.left), simplify_term(t.right)
    if isinstance(left, Const) and isinstance(right, Const):
        a, b = left.value, right.value
        return Const(a + b if t.op == "+" else a - b if t.op == "-" else a * b)
    if t.op in "+-" and right == Const(0):
        return left
    if t.op == "+" and left == Const(0):
        return right
    if t.op == "*" and right == Const(1):
        return left
    if t.op == "*" and left == Const(1):
        return right
    if left is t.left and right is t.right:
        return t
    return BinOp(t.op, left, right)


def _eq_key(t):
    from .printer import term_str

    return (isinstance(t, Const), term_str(t))


def mk_cmp(op, left, right):
    left, right = simplify_term(left), simplify_term(right)
    if isinstance(left, Const) and isinstance(right, Const):
        a, b = left.value, right.value
        return BoolConst(a < b if op == "<" else a > b if op == ">" else a == b)
    if left == right:
        return BoolConst(op == "=")
    coeffs, const = sub(linearize(left), linearize(right))
    if not coeffs:
        return BoolConst(const < 0 if op == "<" else const > 0 if op == ">" else const == 0)
    if op == "=" and _eq_key(right) < _eq_key(left):
        left, right = right, left
    return Cmp(op, left, right)


def neg(f):
    if isinstance(f, BoolConst):
        return BoolConst(not f.value)
    if isinstance(f, Not):
        return f.arg
    return Not(f)


def conj(*parts):
    flat: list = []
    seen: set = set()
    for p in parts:
        for q in p.args if isinstance(p, And) else (p,):
            if q == TRUE or q in seen:
                continue
            if q == FALSE:
                return FALSE
            seen.add(q)
            flat.append(q)
    for q in flat:
        if neg(q) in seen:
            return FALSE
    if not flat:
        return TRUE
    return flat[0] if len(flat) == 1 else And(tuple(flat))


def disj(*parts):
    flat: list = []
    seen: set = set()
    for p in parts:
        for q in p.args if isinstance(p, Or) else (p,):
            if q == FALSE or q in seen:
                continue
            if q == TRUE:
                return TRUE
            seen.add(q)
            flat.append(q)
    for q in flat:
        if neg(q) in seen:
            return TRUE
    if not flat:
        return FALSE
    return flat[0] if len(flat) == 1 else Or(tuple(flat))


def implies(a, b):
    if a == TRUE:
        return b
    if a == FALSE or b == TRUE or a == b:
        return TRUE
    if b == FALSE:
        return neg(a)
    known = set(a.args) if isinstance(a, And) else {a}
    if isinstance(b, And):
        rest = [q for q in b.args if q not in known]
        if len(rest) < len(b.args):
            return implies(a, conj(*rest))
    elif b in known:
        return TRUE
    return Implies(a, b)


def _linear_in(lit, var: str):
    """Return (kind, coefficient of var) if lit is linear in var, else None."""
    lf = literal_form(lit)
    if lf is None:
        return None
    kind, coeffs, _ = lf
    c = coeffs.get(Var(var), 0)
    for atom in coeffs:
        if atom != Var(var) and var in term_vars(atom):
            return None
    return kind, c


def forall(var: str, body):
    """Simplifying universal quantifier (exact rewrites only)."""
    if var not in free_vars(body):
        return body
    if isinstance(body, And):
        return conj(*(forall(var, a) for a in body.args))
    if isinstance(body, Or):
        inner = [a for a in body.args if var in free_vars(a)]
        outer = [a for a in body.args if var not in free_vars(a)]
        if outer:
            return disj(*outer, forall(var, disj(*inner)))
        # one-point rule: forall v. (v != t) or phi  ==  phi[t/v]
        for i, a in enumerate(inner):
            t = _point(a, var, negated=True)
            if t is not None:
                rest = disj(*(inner[:i] + inner[i + 1 :]))
                return simplify(subst_var(rest, var, t))
    if isinstance(body, Implies):
        t = _point(body.left, var, negated=False)
        if t is not None:
            return simplify(subst_var(body.right, var, t))
        if var not in free_vars(body.left):
            return implies(body.left, forall(var, body.right))
    lin = _linear_in(body, var)
    if lin is not None:
        kind, c = lin
        if c != 0 and (kind != "!=" or abs(c) == 1):
            return FALSE
    return Forall(var, body)


def exists(var: str, body):
    if var not in free_vars(body):
        return body
    if isinstance(body, Or):
        return disj(*(exists(var, a) for a in body.args))
    if isinstance(body, And):
        inner = [a for a in body.args if var in free_vars(a)]
        outer = [a for a in body.args if var not in free_vars(a)]
        if outer:
            return conj(*outer, exists(var, conj(*inner)))
        for i, a in enumerate(inner):
            t = _point(a, var, negated=False)
            if t is not None:
                rest = conj(*(inner[:i] + inner[i + 1 :]))
                return simplify(subst_var(rest, var, t))
    lin = _linear_in(body, var)
    if lin is not None:
        kind, c = lin
        if c != 0 and (kind != "=" or abs(c) == 1):
            return TRUE
    return Exists(var, body)


def miniscope(f):
    """Push existentials inward through disjunctions and independent conjuncts.

    Unlike :func:`exists` this performs no arithmetic reasoning, so the result
    is equivalent over any non-empty domain, bounded ones included.
    """
    if isinstance(f, Exists):
        return _push_exists(f.var, miniscope(f.body))
    if isinstance(f, And):
        return And(tuple(miniscope(a) for a in f.args))
    if isinstance(f, Or):
        return Or(tuple(miniscope(a) for a in f.args))
    return f


def _push_exists(var: str, body):
    if var not in free_vars(body):
        return body
    if isinstance(body, Or):
        return Or(tuple(_push_exists(var, a) for a in body.args))
    if isinstance(body, And):
        inner = [a for a in body.args if var in free_vars(a)]
        outer = [a for a in body.args if var not in free_vars(a)]
        if len(inner) == 1:
            return And(tuple(outer) + (_push_exists(var, inner[0]),))
        if outer:
            return And(tuple(outer) + (Exists(var, And(tuple(inner))),))
    return Exists(var, body)


def _point(lit, var: str, negated: bool):
    """If lit is ``var = t`` (or ``var != t`` when negated) with var not in t, return t."""
    if negated:
        if not isinstance(lit, Not):
            return None
        lit = lit.arg
    if not isinstance(lit, Cmp) or lit.op != "=":
        return None
    for a, b in ((lit.left, lit.right), (lit.right, lit.left)):
        if a == Var(var) and var not in term_vars(b):
            return b
    return None


def simplify(f):
    """Bottom-up local simplification; idempotent."""
    if isinstance(f, BoolConst):
        return f
    if isinstance(f, Cmp):
        return mk_cmp(f.op, f.left, f.right)
    if isinstance(f, Not):
        return neg(simplify(f.arg))
    if isinstance(f, And):
        return conj(*(simplify(a) for a in f.args))
    if isinstance(f, Or):
        return disj(*(simplify(a) for a in f.args))
    if isinstance(f, Implies):
        return implies(simplify(f.left), simplify(f.right))
    if isinstance(f, Forall):
        return forall(f.var, simplify(f.body))
    if isinstance(f, Exists):
        return exists(f.var, simplify(f.body))
    raise TypeError(f"not a formula: {f!r}")


def size(f) -> int:
    """Number of nodes, used as a tie breaker and for reporting."""
    if isinstance(f, (Var, Const, BoolConst)):
        return 1
    if isinstance(f, Drf):
        return 1 + size(f.arg)
    if isinstance(f, (BinOp, Cmp)):
        return 1 + size(f.left) + size(f.right)
    if isinstance(f, Not):
        return 1 + size(f.arg)
    if isinstance(f, (And, Or)):
        return 1 + sum(size(a) for a in f.args)
    if isinstance(f, Implies):
        return 1 + size(f.left) + size(f.right)
    return 1 + size(f.body)
