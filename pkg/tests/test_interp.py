import random

import pytest
from conftest import P, c, drf, eq, load, v
from hypothesis import given, settings
from hypothesis import strategies as st

from progtrim.config import PRESETS, trim_program
from progtrim.gen import gen_program, gen_simple_body, negate_assert
from progtrim.interp import (
    ExecConfig,
    Tag,
    Valuation,
    compare_outcomes,
    compile_formula,
    compile_wp,
    distinct_paths,
    eval_formula,
    exact_wp,
    explore,
    grid,
    run,
    universe,
)
from progtrim.lang import TRUE, And, Assert, Not, Or, Seq, Store
from progtrim.outcomes import check_equi_safe, compare_sets, outcome_set
from progtrim.parser import parse

SMALL = ExecConfig(nondet_domain=(-1, 1))


# -- run ---------------------------------------------------------------------


def test_assume_false_is_pruned():
    prog = parse("proc main(x) : r { assume x != x; }")
    for x in (-1, 0, 7):
        assert run(prog, Valuation({"x": x})).outcome is Tag.PRUNED


def test_factorial_dse_outcomes():
    prog = load("factorial_dse.imp")
    assert run(prog, Valuation({"m": 5})).outcome is Tag.FAIL
    res = run(prog, Valuation({"m": 4}))
    assert res.outcome is Tag.OK and res.ret == 24


def test_snippet_else_branch_verified():
    prog = load("alias_snippet.imp")
    # complementary assumes make the branch a guarded one: no decision is consumed
    sigma = Valuation({"x": 1, "y": 2, "a": 0}, {1: 0, 2: 0})
    res = run(prog, sigma, ())
    assert res.outcome is Tag.OK and res.decisions == () and res.ret == 3


def test_snippet_aliased_branch():
    prog = load("alias_snippet.imp")
    res = run(prog, Valuation({"x": 1, "y": 1, "a": 0}, {1: 0}))
    assert res.outcome is Tag.OK and res.ret == 3


def test_null_dereference_fails():
    prog = parse("proc main(p) : r { r := *p; }")
    res = run(prog, Valuation({"p": 0}))
    assert res.outcome is Tag.FAIL and res.reason == "null dereference"


def test_exhausted_decisions_are_inconclusive():
    prog = parse("proc main() : r { if (*) { r := 1; } else { r := 2; } }")
    res = run(prog, Valuation({}), ())
    assert res.inconclusive and res.outcome is None
    assert run(prog, Valuation({}), (1,)).ret == 2


def test_bad_decision_raises():
    prog = parse("proc main() : r { if (*) { r := 1; } else { r := 2; } }")
    with pytest.raises(ValueError):
        run(prog, Valuation({}), (2,))


def test_missing_input_raises():
    with pytest.raises(ValueError, match="entry parameter"):
        run(load("factorial_dse.imp"), Valuation({}))


def test_step_bound_is_inconclusive():
    prog = parse("proc f(n) : r { k := n + 1; r := call f(k); } proc main(n) : r { r := call f(n); }")
    res = run(prog, Valuation({"n": 0}), (), ExecConfig(step_bound=500))
    assert res.inconclusive


def test_fork_bound_is_inconclusive():
    prog = parse("proc main() : r { a := nondet(); b := nondet(); c := nondet(); }")
    ex = explore(prog, Valuation({}), ExecConfig(nondet_domain=(0, 1), fork_bound=2))
    # each of the four two-decision prefixes hits the bound at the third choice
    assert ex.inconclusive == 4 and not ex.results


def test_malloc_uses_fresh_cells_with_nondet_contents():
    prog = parse("proc main() : r { p := malloc(2); r := *p; }")
    ex = explore(prog, Valuation({}, {1: 9}), ExecConfig(nondet_domain=(0, 1)))
    assert sorted(r.ret for r in ex.results) == [0, 0, 1, 1]


def test_wrap32_arithmetic():
    prog = parse("proc main(x) : r { r := x + 1; }")
    big = Valuation({"x": 2**31 - 1})
    assert run(prog, big).ret == 2**31
    assert run(prog, big, (), ExecConfig(int_mode="wrap32")).ret == -(2**31)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32), st.lists(st.integers(0, 1), max_size=10))
def test_run_is_deterministic_and_replayable(seed, decisions):
    prog = gen_program(random.Random(seed))
    sigma = Valuation({x: 1 for x in prog.proc(prog.entry).params})
    a = run(prog, sigma, decisions, SMALL)
    b = run(prog, sigma, decisions, SMALL)
    assert a == b
    if not a.inconclusive:
        assert run(prog, sigma, a.decisions, SMALL) == a


# -- explore -----------------------------------------------------------------


def test_explore_two_ok_arms():
    prog = parse("proc main() : r { if (*) { assert 1 > 0; } else { assert 1 > 0; } }")
    ex = explore(prog, Valuation({}))
    assert [r.outcome for r in ex.results] == [Tag.OK, Tag.OK]
    assert ex.paths == 2


def test_explore_trimmed_factorial():
    res = trim_program(load("factorial_dse.imp"), PRESETS["trim_L"])
    fails = []
    for m in range(0, 11):
        ex = explore(res.program, Valuation({"m": m}))
        assert ex.inconclusive == 0 and ex.paths <= 2
        if ex.has(Tag.FAIL):
            fails.append(m)
        else:
            assert ex.tags() == {Tag.PRUNED}
    assert fails == [5]


def test_distinct_paths_factorial():
    prog = load("factorial_dse.imp")
    inputs = _inputs(prog, 0, 10)
    assert distinct_paths(prog, inputs) == 11
    assert distinct_paths(trim_program(prog, PRESETS["trim_L"]).program, inputs) == 2


def test_trace_records_guarded_arms():
    prog = parse("proc main(x) : r { if (x > 0) { r := 1; } else { r := 2; } }")
    assert run(prog, Valuation({"x": 1})).trace == (("main", (0,), 0),)
    assert run(prog, Valuation({"x": 0})).trace == (("main", (0,), 1),)


def test_explore_results_are_distinct_decisions():
    prog = parse("proc main(x) : r { if (*) { r := 1; } else { r := 2; } k := nondet(); assume k != r; }")
    ex = explore(prog, Valuation({"x": 0}), ExecConfig(nondet_domain=(0, 2)))
    seqs = [r.decisions for r in ex.results]
    assert len(seqs) == len(set(seqs)) == 6
    assert sum(r.outcome is Tag.PRUNED for r in ex.results) == 2


# -- exact wp ----------------------------------------------------------------


def test_exact_wp_assert_is_truth_table():
    body = Seq((Assert(P("x > y")),))
    for sigma in grid(("x", "y"), -2, 2):
        assert exact_wp(body, TRUE, sigma) == (sigma.vars["x"] > sigma.vars["y"])


def test_exact_wp_store_example():
    body = Seq((Store("x", v("a")),))
    post = eq(drf("y"), c(3))
    expect = Or((And((Not(eq(v("x"), v("y"))), post)), And((eq(v("x"), v("y")), eq(v("a"), c(3))))))
    for x in (1, 2):
        for y in (1, 2):
            for a in range(-3, 4):
                for h in ((0, 3), (3, 0), (3, 3), (1, 1)):
                    sigma = Valuation({"x": x, "y": y, "a": a}, dict(enumerate(h, 1)))
                    assert exact_wp(body, post, sigma) == eval_formula(expect, sigma.vars, sigma.heap)


def test_exact_wp_inconclusive_under_bounds():
    body = parse("proc h() : r { a := nondet(); b := nondet(); }").proc("h").body
    assert exact_wp(body, TRUE, Valuation({}), ExecConfig(fork_bound=1)) is None


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32))
def test_compiled_wp_matches_exact_wp(seed):
    rng = random.Random(seed)
    body = gen_simple_body(rng, 4)
    post = P("x > 0 || y = p")
    cfg = ExecConfig(nondet_domain=(-1, 1))
    for sigma in list(grid(("x", "y", "p", "q"), 1, 2))[:8]:
        s = Valuation(sigma.vars, {1: 0, 2: 1})
        uni = universe(cfg, s)
        fast = compile_wp(body, post, cfg, uni)(dict(s.vars), dict(s.heap))
        slow = exact_wp(body, post, s, cfg, params=("x", "y", "p", "q"))
        if slow is not None:
            assert fast == slow, s


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32))
def test_wp_is_monotone_in_post(seed):
    body = gen_simple_body(random.Random(seed), 4)
    strong, weak = P("x > 1"), P("x > 1 || y > 0")
    cfg = ExecConfig(nondet_domain=(-1, 1))
    uni = universe(cfg, Valuation({}, {1: 0, 2: 0}))
    ws, ww = compile_wp(body, strong, cfg, uni), compile_wp(body, weak, cfg, uni)
    for sigma in grid(("x", "y", "p", "q"), 0, 2):
        env, heap = dict(sigma.vars), {1: 0, 2: 1}
        assert not ws(env, dict(heap)) or ww(env, dict(heap))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32))
def test_wp_is_antitone_in_prefixing(seed):
    rng = random.Random(seed)
    body = gen_simple_body(rng, 4)
    longer = Seq((Assert(P("x > 0")),) + body.stmts)
    cfg = ExecConfig(nondet_domain=(-1, 1))
    uni = universe(cfg, Valuation({}, {1: 0, 2: 0}))
    post = P("y = 1")
    wl, wb = compile_wp(longer, post, cfg, uni), compile_wp(body, post, cfg, uni)
    for sigma in grid(("x", "y", "p", "q"), 0, 2):
        heap = {1: 0, 2: 1}
        assert not wl(dict(sigma.vars), dict(heap)) or wb(dict(sigma.vars), dict(heap))


# -- outcome sets ------------------------------------------------------------


def _tags_and_returns(ex):
    rets = {r.ret for r in ex.results if r.outcome is Tag.OK}
    return ex.tags(), rets


@settings(max_examples=120, deadline=None)
@given(st.integers(0, 2**32))
def test_outcome_set_matches_path_explorer(seed):
    prog = gen_program(random.Random(seed))
    cfg = ExecConfig(nondet_domain=(-1, 1), fork_bound=24)
    for sigma in list(grid(prog.proc(prog.entry).params, -1, 1))[:4]:
        ex = explore(prog, sigma, cfg, max_paths=3000)
        if ex.inconclusive:
            continue
        out = outcome_set(prog, sigma, cfg)
        if out.inconclusive:
            continue
        assert (out.tags(), out.returns) == _tags_and_returns(ex), sigma


def test_compare_sets_examples():
    prog = load("factorial_dse.imp")
    a = outcome_set(prog, Valuation({"m": 4}))
    assert compare_sets(a, a) == ""
    trimmed = trim_program(prog, PRESETS["trim_L"]).program
    b = outcome_set(trimmed, Valuation({"m": 4}))
    assert b.tags() == {Tag.PRUNED}
    assert compare_sets(a, b) == ""
    assert compare_sets(b, a) != ""


def test_compare_outcomes_path_version():
    prog = load("factorial_dse.imp")
    a, b = explore(prog, Valuation({"m": 5})), explore(prog, Valuation({"m": 4}))
    assert compare_outcomes(a, a) == ""
    assert "failure" in compare_outcomes(a, b)


# -- equi-safety -------------------------------------------------------------


def _inputs(prog, lo, hi):
    return list(grid(prog.proc(prog.entry).params, lo, hi))


def test_check_self_is_equi_safe():
    prog = load("caller_assert.imp")
    v = check_equi_safe(prog, prog, _inputs(prog, -2, 12))
    assert v.ok and v.checked_inputs == 15 * 15


def test_check_factorial_trimmed():
    prog = load("factorial_dse.imp")
    for preset in PRESETS:
        v = check_equi_safe(prog, trim_program(prog, PRESETS[preset]).program, _inputs(prog, 0, 10))
        assert v.status == "equi-safe", preset


def test_check_negated_assert_gives_counterexample():
    prog = load("factorial_dse.imp")
    mutant = negate_assert(prog, 0)
    v = check_equi_safe(prog, mutant, _inputs(prog, 0, 10))
    assert v.status == "counterexample" and v.sigma is not None


def test_check_detects_removed_return_value():
    a = parse("proc main(x) : r { r := x; }")
    b = parse("proc main(x) : r { r := x + 1; }")
    v = check_equi_safe(a, b, _inputs(a, 0, 2))
    assert v.status == "counterexample"


def test_check_reports_inconclusive():
    prog = parse("proc f(n) : r { k := n + 1; r := call f(k); } proc main(n) : r { r := call f(n); }")
    v = check_equi_safe(prog, prog, _inputs(prog, 0, 1))
    assert v.status == "inconclusive" and v.inconclusive_inputs == 2
