import itertools
import random

from conftest import P, c, drf, eq, v
from hypothesis import given, settings
from hypothesis import strategies as st

from progtrim.engine import (
    TrimmingCondition,
    bound_conjuncts,
    eliminate_quantifiers,
    has_quantifier,
    negate_to_trim,
    nnf,
    nondet_encode,
    trimming_condition,
)
from progtrim.formula import free_vars, miniscope, simplify
from progtrim.gen import gen_conjunctive, gen_qe_formula
from progtrim.interp import ExecConfig, compile_formula, eval_formula, witness_test
from progtrim.lang import FALSE, TRUE, And, Cmp, Exists, Forall, Implies, Not, Or

WIDE = tuple(range(-12, 13))


def _compiled(f):
    # miniscoping keeps quantified evaluation cheap without changing its meaning
    return compile_formula(miniscope(f), WIDE)


def _points(names, lo=-3, hi=3):
    names = sorted(names)
    for vals in itertools.product(range(lo, hi + 1), repeat=len(names)):
        yield dict(zip(names, vals))


# -- negation ----------------------------------------------------------------


def test_negate_examples():
    assert negate_to_trim(Not(eq(v("m"), c(5)))) == eq(v("m"), c(5))
    assert negate_to_trim(TRUE) == FALSE
    assert negate_to_trim(eq(v("n"), c(0))) == Not(eq(v("n"), c(0)))


def test_nnf_pushes_through_connectives():
    f = Not(And((P("x > 0"), Forall("y", P("y < x")))))
    g = nnf(f)
    assert isinstance(g, Or)
    assert Not(P("x > 0")) in g.args
    assert any(isinstance(a, Exists) for a in g.args)


def test_nnf_implication():
    assert nnf(Implies(P("x > 0"), P("y > 0"))) == Or((Not(P("x > 0")), P("y > 0")))
    assert nnf(Not(Implies(P("x > 0"), P("y > 0")))) == And((P("x > 0"), Not(P("y > 0"))))


# -- quantifier elimination --------------------------------------------------


def test_qe_contradiction():
    f = Exists("x", And((eq(v("x"), c(1)), Not(eq(v("x"), c(1))))))
    assert eliminate_quantifiers(f) == FALSE


def test_qe_unbounded_side_is_true():
    assert eliminate_quantifiers(Exists("x", Cmp(">", v("y"), v("x")))) == TRUE


def test_qe_interval():
    f = Exists("x", And((P("x > 0"), P("x < 2"), eq(v("y"), v("x")))))
    g = eliminate_quantifiers(f)
    assert not has_quantifier(g)
    assert free_vars(g) == {"y"}
    for y in range(-4, 5):
        assert eval_formula(g, {"y": y}, {}) == (y == 1)


def test_qe_keeps_quantifier_over_heap_reads_as_weakening():
    f = Exists("x", And((eq(drf("x"), c(1)), P("y > 0"))))
    g = eliminate_quantifiers(f)
    assert g == P("y > 0")


def test_qe_falls_back_when_dnf_too_large():
    parts = tuple(Or((Cmp("<", v("x"), c(k)), Cmp(">", v("y"), c(k)))) for k in range(8))
    f = Exists("x", And(parts))
    assert has_quantifier(eliminate_quantifiers(f, cap=16))
    assert not has_quantifier(eliminate_quantifiers(f, cap=10_000))


def test_stray_universal_weakens_to_true():
    assert eliminate_quantifiers(Forall("x", P("x > y"))) == TRUE


# -- nondet encoding ---------------------------------------------------------


def test_nondet_encode_introduces_witness():
    f = Exists("k", And((eq(v("n"), v("k")), Cmp(">", v("k"), c(2)))))
    tc = nondet_encode(f)
    assert len(tc.witnesses) == 1
    w = tc.witnesses[0]
    assert w not in ("n", "k")
    assert free_vars(tc.pred) == {"n", w}


def test_nondet_encode_avoids_names():
    f = Exists("k", Cmp(">", v("k"), c(2)))
    tc = nondet_encode(f, avoid={"_q1", "_q2"})
    assert not set(tc.witnesses) & {"_q1", "_q2"}


def test_nondet_encode_without_quantifiers():
    tc = nondet_encode(P("n > 0"))
    assert tc == TrimmingCondition((), P("n > 0"))
    assert not tc.trivial
    assert TrimmingCondition((), TRUE).trivial


def test_nondet_encode_drops_witness_addressed_reads():
    f = Exists("k", And((eq(drf("k"), c(1)), P("n > 0"))))
    tc = nondet_encode(f)
    assert tc.pred == P("n > 0") and tc.witnesses == ()


# -- bounding ----------------------------------------------------------------


def test_bound_keeps_first_k():
    parts = tuple(Cmp(">", v("x"), c(k)) for k in range(5))
    assert bound_conjuncts(And(parts), 4) == And(parts[:4])
    assert bound_conjuncts(And(parts), None) == And(parts)


def test_bound_recurses_into_disjunctions():
    inner = And(tuple(eq(v("a"), c(k)) for k in range(3)))
    f = Or((inner, P("b > 0")))
    assert bound_conjuncts(f, 1) == Or((eq(v("a"), c(0)), P("b > 0")))


def test_bound_rejects_nonpositive():
    import pytest

    with pytest.raises(ValueError):
        bound_conjuncts(TRUE, 0)


# -- pipeline ----------------------------------------------------------------


def test_trimming_condition_examples():
    assert trimming_condition(Not(eq(v("m"), c(5)))).pred == eq(v("m"), c(5))
    assert trimming_condition(TRUE).pred == FALSE
    assert trimming_condition(FALSE).trivial


def test_trimming_condition_full_vs_nondet():
    # the one-point rule removes an equality witness in either mode
    point = Forall("k", Or((Not(eq(v("n"), v("k"))), Not(Cmp(">", v("k"), c(2))))))
    assert trimming_condition(point, "nondet") == TrimmingCondition((), P("n > 2"))
    phi = Forall("k", Or((Not(Cmp("<", v("n"), v("k"))), Not(Cmp("<", v("k"), c(5))))))
    full = trimming_condition(phi, "full")
    nd = trimming_condition(phi, "nondet")
    assert full.witnesses == ()
    assert [n for n in range(-3, 8) if eval_formula(full.pred, {"n": n}, {})] == list(range(-3, 4))
    (w,) = nd.witnesses
    assert nd.pred == And((Cmp("<", v("n"), v(w)), Cmp("<", v(w), c(5))))


# -- properties --------------------------------------------------------------


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32))
def test_qe_exact_on_unit_fragment(seed):
    f = gen_qe_formula(random.Random(seed), exact=True)
    g = eliminate_quantifiers(f, cap=10_000)
    assert not has_quantifier(g)
    cf, cg = _compiled(f), _compiled(g)
    for env in _points(free_vars(f) | free_vars(g)):
        assert cf(env, {}) == cg(env, {}), env


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32))
def test_qe_only_weakens(seed):
    f = gen_qe_formula(random.Random(seed), exact=False)
    g = eliminate_quantifiers(f)
    heap = {1: 2, 2: -1, 3: 0}
    cf, cg = _compiled(f), _compiled(g)
    for env in _points(free_vars(f) | free_vars(g), -2, 2):
        if cf(env, heap):
            assert cg(env, heap), env


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32))
def test_bounding_only_weakens(seed):
    f = gen_conjunctive(random.Random(seed))
    for k in (1, 2, 4):
        g = bound_conjuncts(f, k)
        for env in _points(free_vars(f), -2, 2):
            if eval_formula(f, env, {}):
                assert eval_formula(g, env, {})


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32))
def test_double_negation(seed):
    f = gen_conjunctive(random.Random(seed))
    twice = nnf(nnf(f, False), False)
    for env in _points(free_vars(f), -2, 2):
        assert eval_formula(twice, env, {}) == eval_formula(f, env, {})


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32))
def test_negation_complements(seed):
    f = gen_qe_formula(random.Random(seed), exact=False)
    g = negate_to_trim(f)
    heap = {1: 1, 2: 0, 3: -2}
    cf, cg = compile_formula(f, range(-6, 7)), compile_formula(g, range(-6, 7))
    for env in _points(free_vars(f), -2, 2):
        assert cg(env, heap) != cf(env, heap)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32))
def test_miniscope_preserves_meaning(seed):
    f = gen_qe_formula(random.Random(seed), exact=False)
    g = miniscope(f)
    heap = {1: 1, 2: 0, 3: -2}
    for env in _points(free_vars(f), -2, 2):
        assert eval_formula(g, env, heap, range(-4, 5)) == eval_formula(f, env, heap, range(-4, 5))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32))
def test_witness_test_matches_brute_force(seed):
    tc = nondet_encode(gen_qe_formula(random.Random(seed), exact=False))
    cfg = ExecConfig(nondet_domain=(-3, 3))
    probe = witness_test(tuple(tc.witnesses), tc.pred, cfg)
    free = sorted(free_vars(tc.pred) - set(tc.witnesses))
    heap = {1: 1, 2: 0}
    for env in _points(free, -2, 2):
        brute = any(
            eval_formula(tc.pred, {**env, **dict(zip(tc.witnesses, ws))}, heap)
            for ws in itertools.product(cfg.witness_values, repeat=len(tc.witnesses))
        )
        assert probe(env, heap) == brute


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from(["full", "nondet"]), st.sampled_from([None, 1, 4]))
def test_trimming_condition_implies_negation(seed, qe, k):
    bad = gen_qe_formula(random.Random(seed), exact=False)
    phi = nnf(bad, False)
    tc = trimming_condition(phi, qe, k)
    heap = {1: 1, 2: 0, 3: -2}
    violated = _compiled(bad)
    probe = _compiled(_exists(tc.witnesses, tc.pred))
    for env in _points(free_vars(bad), -2, 2):
        if violated(env, heap):
            assert probe(env, heap), env


def _exists(names, f):
    for w in reversed(names):
        f = Exists(w, f)
    return f
