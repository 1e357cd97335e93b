"""Linear normal forms for integer terms and comparison literals."""

from __future__ import annotations

from .lang import BinOp, Cmp, Const, Drf, Expr, Not, Var

# A linear form is (coeffs, const): sum(coeffs[atom] * atom) + const.
# Atoms are variables, drf terms, and products that are not linear.


def linearize(e: Expr) -> tuple[dict, int]:
    if isinstance(e, Const):
        return {}, e.value
    if isinstance(e, (Var, Drf)):
        return {e: 1}, 0
    if isinstance(e, BinOp):
        lc, lk = linearize(e.left)
        rc, rk = linearize(e.right)
        if e.op == "+":
            return _add(lc, rc, 1), lk + rk
        if e.op == "-":
            return _add(lc, rc, -1), lk - rk
        if not rc:
            return _scale(lc, rk), lk * rk
        if not lc:
            return _scale(rc, lk), lk * rk
        return {e: 1}, 0
    raise TypeError(f"not a term: {e!r}")


def _add(a: dict, b: dict, sign: int) -> dict:
    out = dict(a)
    for k, v in b.items():
        out[k] = out.get(k, 0) + sign * v
        if out[k] == 0:
            del out[k]
    return out


def _scale(a: dict, k: int) -> dict:
    if k == 0:
        return {}
    return {t: c * k for t, c in a.items()}


def sub(a: tuple[dict, int], b: tuple[dict, int]) -> tuple[dict, int]:
    return _add(a[0], b[0], -1), a[1] - b[1]


def literal_form(lit) -> tuple[str, dict, int] | None:
    """Normalise a literal to ``lin < 0``, ``lin = 0`` or ``lin != 0`` (integers).

    Returns (kind, coeffs, const) with kind in {"<", "=", "!="}, or None if
    ``lit`` is not a comparison literal.
    """
    negated = False
    if isinstance(lit, Not):
        negated, lit = True, lit.arg
    if not isinstance(lit, Cmp):
        return None
    left, right = linearize(lit.left), linearize(lit.right)
    if lit.op == "=":
        coeffs, const = sub(left, right)
        return ("!=" if negated else "="), coeffs, const
    if lit.op == ">":
        left, right = right, left
    # now: left < right, or its negation left >= right, i.e. right - left - 1 < 0
    if negated:
        coeffs, const = sub(right, left)
        return "<", coeffs, const - 1
    coeffs, const = sub(left, right)
    return "<", coeffs, const


def _atom_key(t) -> str:
    from .printer import term_str  # local import: printer depends on lang only

    return term_str(t)


def to_expr(coeffs: dict, const: int) -> Expr:
    """Build a readable term for a linear form: positive atoms, then subtracted ones."""
    items = sorted(((t, c) for t, c in coeffs.items() if c), key=lambda tc: (tc[1] < 0, _atom_key(tc[0])))
    e: Expr | None = None
    for atom, c in items:
        mag = atom if abs(c) == 1 else BinOp("*", Const(abs(c)), atom)
        if c > 0:
            e = mag if e is None else BinOp("+", e, mag)
        else:
            if e is None:
                e, const = Const(const), 0
            e = BinOp("-", e, mag)
    if e is None:
        return Const(const)
    if const > 0:
        return BinOp("+", e, Const(const))
    if const < 0:
        return BinOp("-", e, Const(-const))
    return e


def _split(coeffs: dict, const: int):
    pos = {t: c for t, c in coeffs.items() if c > 0}
    neg = {t: -c for t, c in coeffs.items() if c < 0}
    return pos, neg


def build_literal(kind: str, coeffs: dict, const: int):
    """Inverse of :func:`literal_form`, putting positive atoms on the left."""
    from .lang import FALSE, TRUE

    if not coeffs:
        holds = {"<": const < 0, "=": const == 0, "!=": const != 0}[kind]
        return TRUE if holds else FALSE
    pos, neg = _split(coeffs, const)
    if not pos:
        # -N + k ⋈ 0  ==>  flip so the atoms stay positive
        if kind == "<":
            # -N + k < 0  <=>  N > k  <=>  N >= k + 1
            return Cmp(">", to_expr(neg, 0), Const(const))
        return _eq(kind, to_expr(neg, 0), Const(const))
    lhs = to_expr(pos, 0)
    rhs = to_expr(neg, -const)
    if kind == "<":
        return Cmp("<", lhs, rhs)
    return _eq(kind, lhs, rhs)


def _eq(kind, a, b):
    c = Cmp("=", a, b)
    return c if kind == "=" else Not(c)
