import pytest
from conftest import P, load

from progtrim.alias import build
from progtrim.config import LP, LPC, PRESETS, TrimConfig, trim_program
from progtrim.inference import infer_program
from progtrim.instrument import (
    PlacementStrategy,
    instrument,
    is_split_site,
    may_fail,
    placement_points,
    safe_name,
    split_procedures,
)
from progtrim.interp import ExecConfig, Tag, Valuation, explore, grid
from progtrim.lang import FALSE, Assert, Assume, Call, NondetIf, walk
from progtrim.parser import parse
from progtrim.printer import formula_str, print_program

NESTED_CALLS_SPLIT = """\
proc foo__safe(x, y) : r {
  assume x > 0;
  u := call bar__safe(y);
}

proc foo(x, y) : r {
  assert x > 0;
  if (*) {
    u := call bar__safe(y);
  } else {
    u := call bar(y);
    assume false;
  }
}

proc bar__safe(z) : r {
  assume z > 0;
}

proc bar(z) : r {
  assert z > 0;
}

proc main(x, y) : r {
  if (*) {
    u := call foo__safe(x, y);
  } else {
    u := call foo(x, y);
    assume false;
  }
}
"""

CALLER_ASSERT_TRIMMED = """\
proc foo__safe(x) : r {
  assume x > 10;
}

proc foo(x) : r {
  assume x <= 10;
  assert x > 10;
}

proc bar(a, x) : r {
  assume a >= 100 || x <= 10;
  if (*) {
    u := call foo__safe(x);
  } else {
    u := call foo(x);
    assume false;
  }
  assert a < 100;
}
"""

CHAIN = """
proc c(n) : r { assert n > 0; }
proc b(n) : r { r := call c(n); }
proc a(n) : r { r := call b(n); }
proc main(n) : r { r := call a(n); }
"""


# -- splitting ---------------------------------------------------------------


def test_split_nested_calls():
    assert print_program(split_procedures(load("nested_calls.imp"))) == NESTED_CALLS_SPLIT


def test_split_leaves_call_free_entry_alone():
    prog = parse("proc main(x) : r { assert x > 0; r := x; }")
    assert split_procedures(prog) == prog


def test_split_chain_counts():
    split = split_procedures(parse(CHAIN))
    clones = [p.name for p in split.procedures if p.name.endswith("__safe")]
    assert sorted(clones) == ["a__safe", "b__safe", "c__safe"]
    sites = [s for p in split.procedures for s in walk(p.body) if is_split_site(s)]
    assert len(sites) == 3
    for s in sites:
        assert s.orelse.stmts[-1] == Assume(FALSE)


def test_split_site_has_two_paths_one_dead():
    split = split_procedures(parse(CHAIN))
    tags = sorted(r.outcome.name for r in explore(split, Valuation({"n": 1})).results)
    assert tags == ["OK", "PRUNED", "PRUNED", "PRUNED"]


def test_safe_clone_has_no_asserts_and_only_safe_calls():
    split = split_procedures(parse(CHAIN))
    for p in split.procedures:
        if p.name.endswith("__safe"):
            body = list(walk(p.body))
            assert not any(isinstance(s, Assert) for s in body)
            assert all(s.proc.endswith("__safe") for s in body if isinstance(s, Call))


def test_split_skips_unreachable():
    prog = parse("proc lone(x) : r { assert x > 0; } proc g(x) : r { assert x > 1; } proc main(x) : r { r := call g(x); }")
    names = [p.name for p in split_procedures(prog).procedures]
    assert names == ["lone", "g__safe", "g", "main"]


def test_split_leaves_calls_to_never_failing_procedures():
    prog = parse("proc g(x) : r { r := x + 1; } proc main(x) : r { r := call g(x); assert r > 0; }")
    assert split_procedures(prog) == prog


def test_split_rejects_reserved_names():
    prog = parse("proc g__safe(x) : r { } proc g(x) : r { assert x > 0; } proc main(x) : r { r := call g(x); }")
    with pytest.raises(ValueError, match="reserved"):
        split_procedures(prog)


@pytest.mark.parametrize("name", ["nested_calls.imp", "caller_assert.imp", "factorial_dse.imp", "factorial_ai.imp"])
def test_split_preserves_failures(name):
    prog = load(name)
    split = split_procedures(prog)
    cfg = ExecConfig(nondet_domain=(-1, 1))
    for sigma in grid(prog.proc(prog.entry).params, -1, 6):
        a = {r.outcome for r in explore(prog, sigma, cfg).results}
        b = {r.outcome for r in explore(split, sigma, cfg).results}
        assert (Tag.FAIL in a) == (Tag.FAIL in b)
        assert a - {Tag.PRUNED} <= b


def test_may_fail():
    assert may_fail(parse(CHAIN)) == {"a", "b", "c", "main"}
    assert may_fail(parse("proc g(x) : r { } proc main(x) : r { r := call g(x); }")) == set()


# -- placement ---------------------------------------------------------------


def test_placement_parse_and_str():
    assert PlacementStrategy.parse("L/P") == LP
    assert PlacementStrategy.parse("l/p+c") == LPC
    assert PlacementStrategy.parse("entry,conds") == PlacementStrategy(True, False, True)
    assert str(LP) == "L/P" and str(LPC) == "L/P+C"
    with pytest.raises(ValueError):
        PlacementStrategy.parse("sideways")


def test_placement_points():
    split = split_procedures(load("factorial_dse.imp"))
    fact = split.proc("fact")
    # entry assumes go after the procedure's own leading input assumptions
    assert placement_points(fact, PlacementStrategy(True, False, False)) == [(1,)]
    assert (2,) in placement_points(fact, PlacementStrategy(False, False, True))
    calls = placement_points(fact, PlacementStrategy(False, True, False))
    assert calls == [(2, 0, 2)]


# -- instrumentation ---------------------------------------------------------


def _trim(name, preset="trim"):
    return trim_program(load(name), PRESETS[preset])


def test_caller_assert_golden():
    res = _trim("caller_assert.imp")
    assert print_program(res.program) == CALLER_ASSERT_TRIMMED
    assert [(a.proc, formula_str(a.pred)) for a in res.report.assumes] == [
        ("foo", "x <= 10"),
        ("bar", "a >= 100 || x <= 10"),
    ]


def test_nested_calls_assumes():
    res = _trim("nested_calls.imp")
    got = [(a.proc, a.path, formula_str(a.pred)) for a in res.report.assumes]
    assert got == [
        ("foo", (0,), "x <= 0 || y <= 0"),
        ("foo", (1,), "y <= 0"),
        ("bar", (0,), "z <= 0"),
        ("main", (0,), "x <= 0 || y <= 0"),
    ]
    # safe clones are never instrumented
    for p in res.program.procedures:
        if p.name.endswith("__safe"):
            assert p == res.split.proc(p.name)


def test_factorial_dse_before_call():
    res = _trim("factorial_dse.imp", "trim_L")
    assert res.report.count == 1
    (a,) = res.report.assumes
    assert (a.proc, formula_str(a.pred)) == ("main", "m = 5")


def test_factorial_ai_recursive_entry():
    res = _trim("factorial_ai.imp", "trim_L")
    preds = {(a.proc, a.path): formula_str(a.pred) for a in res.report.assumes}
    assert preds[("fact", (1,))] == "n != 0"


def test_assertion_free_entry_gets_assume_false():
    prog = parse("proc main(x) : r { r := x + 1; }")
    res = trim_program(prog)
    assert res.program.proc("main").body.stmts[0] == Assume(FALSE)
    assert res.report.count == 1 and res.report.nontrivial == 0


def test_keep_trivial_false_suppresses_entry_false():
    prog = parse("proc main(x) : r { r := x + 1; }")
    res = trim_program(prog, TrimConfig(keep_trivial=False))
    assert res.program == prog
    assert res.report.count == 0


def test_trivial_assumes_are_omitted():
    # every run fails, so the condition is false and its negation is true
    prog = parse("proc main(x) : r { x := 1; assert x > 3; }")
    res = trim_program(prog)
    assert res.report.count == 0
    assert res.program == prog


def test_bounded_preset_limits_conjuncts():
    prog = parse("proc main(a, b, m, n, t) : r { assert a > 0 || b > 0 || m > 0 || n > 0 || t > 0; }")
    full = trim_program(prog, PRESETS["trim"]).report.assumes[0].pred
    bounded = trim_program(prog, PRESETS["trim_B"]).report.assumes[0].pred
    assert len(full.args) == 5 and len(bounded.args) == 4
    assert bounded.args == full.args[:4]


def test_nondet_preset_emits_witness_havoc():
    prog = parse(
        """
        proc main(n) : r {
          k := nondet();
          assume n < k;
          assert k >= 5;
        }
        """
    )
    nd = trim_program(prog, PRESETS["trim_ND"])
    full = trim_program(prog, PRESETS["trim"])
    assert nd.report.assumes[0].witnesses
    assert not full.report.assumes[0].witnesses
    assert "nondet()" in print_program(nd.program).split("assume")[0]


def test_report_text():
    res = _trim("caller_assert.imp")
    lines = res.report.text(1.5).splitlines()
    assert lines[:3] == ["assumes: 2", "nontrivial: 2", "time_ms: 1.50"]
    assert lines[3].endswith("foo: assume x <= 10")
    assert lines[3].startswith(f"{load('caller_assert.imp').procedures[0].span.file}:2:")


def test_presets_table():
    assert set(PRESETS) == {"trim_LB", "trim_B", "trim_NDB", "trim_L", "trim", "trim_ND"}
    assert PRESETS["trim_LB"] == TrimConfig(4, "full", LP)
    assert PRESETS["trim_NDB"] == TrimConfig(4, "nondet", LPC)
    assert PRESETS["trim_ND"].max_conjuncts is None
    with pytest.raises(ValueError):
        TrimConfig(qe="magic")
    with pytest.raises(ValueError):
        TrimConfig(max_conjuncts=0)


def test_instrument_is_deterministic():
    prog = load("nested_calls.imp")
    a, b = trim_program(prog), trim_program(prog)
    assert a.program == b.program and a.report == b.report


def test_instrument_direct_call():
    split = split_procedures(load("caller_assert.imp"))
    ann = infer_program(split, build(split))
    prog, report = instrument(split, ann, PlacementStrategy(True, False, False))
    assert [formula_str(a.pred) for a in report.assumes] == ["x <= 10", "a >= 100 || x <= 10"]
    assert prog.proc("bar").body.stmts[0] == Assume(P("a >= 100 || x <= 10"))
    assert isinstance(prog.proc("bar").body.stmts[1], NondetIf)
    assert safe_name("bar") == "bar__safe"
