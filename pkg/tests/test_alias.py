import random

from conftest import drf, load, v
from hypothesis import given, settings
from hypothesis import strategies as st

from progtrim.alias import EXT, TOP, build
from progtrim.gen import gen_program
from progtrim.interp import ExecConfig, Valuation, _Chooser, _Machine, _Stop, grid
from progtrim.lang import Load, Store, walk
from progtrim.parser import parse


def test_snippet_x_may_alias_y():
    oracle = build(load("alias_snippet.imp"))
    assert {v("x"), v("y")} <= oracle.aliases(v("x"), "snippet")
    assert v("y") in oracle.aliases(v("y"), "snippet")


def test_no_pointers_means_singletons():
    prog = parse("proc main(a, b) : r { c := a + b; r := c * 2; }")
    oracle = build(prog)
    for name in ("a", "b", "c", "r"):
        assert oracle.aliases(v(name), "main") == {v(name)}


def test_malloc_copy():
    prog = parse("proc main() : r { x := malloc(1); y := x; *y := 1; r := *x; }")
    oracle = build(prog)
    ax, ay = oracle.aliases(v("x"), "main"), oracle.aliases(v("y"), "main")
    assert ax == ay
    assert {v("x"), v("y")} <= ax


def test_unshared_site_deref_aliases_only_itself():
    prog = parse("proc main() : r { p := malloc(1); *p := 1; r := *p; }")
    oracle = build(prog)
    assert oracle.aliases(drf("p"), "main") == {drf("p")}


def test_reflexive():
    prog = load("caller_assert.imp")
    oracle = build(prog)
    for p in prog.procedures:
        for name in oracle.proc_vars[p.name]:
            assert v(name) in oracle.aliases(v(name), p.name)


def test_mod_locs_examples():
    prog = parse(
        """
        proc foo(x) : r { *x := 2; }
        proc pure(a) : r { r := a + 1; }
        proc rec(p, n) : r {
          *p := n;
          if (n > 0) { k := n - 1; r := call rec(p, k); }
        }
        proc bar(x) : r {
          u := call foo(x);
          w := call pure(u);
          z := call rec(x, w);
        }
        """,
        entry="bar",
    )
    oracle = build(prog)
    assert oracle.mod_locs("foo") == {drf("x")}
    assert oracle.mod_locs("foo", ["y"]) == {drf("y")}
    assert oracle.mod_locs("pure") == frozenset()
    assert oracle.mod_locs("rec") == {drf("p")}
    assert oracle.mod_locs("bar") == {drf("x")}


def test_mod_locs_top_when_pointer_is_reassigned():
    prog = parse("proc f(p) : r { q := *p; *q := 1; } proc main(p) : r { r := call f(p); }")
    assert build(prog).mod_locs("f") is TOP


def test_writes_to_local_allocations_are_invisible():
    prog = parse("proc f(a) : r { m := malloc(1); *m := a; r := *m; }")
    assert build(prog).mod_locs("f") == frozenset()


def test_has_asrts():
    prog = parse(
        """
        proc foo(x) : r { *x := 2; }
        proc c(a) : r { assert a > 0; }
        proc b(a) : r { r := call c(a); }
        proc a(a) : r { r := call b(a); }
        proc main(x) : r { r := call foo(x); s := call a(1); }
        """
    )
    oracle = build(prog)
    assert not oracle.has_asrts("foo")
    assert oracle.has_asrts("c")
    assert oracle.has_asrts("a")
    assert oracle.has_asrts("main")


def test_entry_pointer_parameters_share_external_memory():
    oracle = build(load("alias_snippet.imp"))
    assert oracle.points_to("snippet", v("x")) == {EXT}
    assert oracle.points_to("snippet", drf("x")) == {EXT}


def test_unknown_variable_is_top():
    oracle = build(load("alias_snippet.imp"))
    assert oracle.points_to("snippet", v("nope")) is TOP
    assert oracle.may_alias("snippet", v("nope"), v("a"))


def test_dump_format():
    text = build(load("alias_snippet.imp")).dump()
    assert "snippet.x -> {EXT}" in text.splitlines()
    assert all(" -> {" in line for line in text.splitlines())


# -- dynamic soundness -------------------------------------------------------


class _Tracer(_Machine):
    """Records addresses held by pointer variables and heap writes per frame."""

    def __init__(self, *a, **kw):
        super().__init__(*a, **kw)
        self.equal_pairs = []  # (proc, u, w) holding the same address
        self.writes = []  # (proc, entry env, heap keys at entry, addr) per active frame
        self.entry = []

    def call(self, name, args):
        p = self.prog.proc(name)
        self.entry.append((name, dict(zip(p.params, args)), frozenset(self.heap)))
        try:
            return super().call(name, args)
        finally:
            self.entry.pop()

    def stmt(self, s, frame, path):
        if isinstance(s, (Load, Store)) and frame.env.get(s.ptr, 0) != 0:
            addr = frame.env[s.ptr]
            for u, val in frame.env.items():
                if u != s.ptr and val == addr:
                    self.equal_pairs.append((frame.proc, s.ptr, u))
            if isinstance(s, Store):
                for name, env, keys in self.entry:
                    if addr in keys:
                        self.writes.append((name, env, addr))
        super().stmt(s, frame, path)


def _trace(prog, sigma, decisions, cfg):
    m = _Tracer(prog, cfg, _Chooser(decisions, cfg.fork_bound, extend=True), dict(sigma.heap))
    try:
        m.call(prog.entry, [sigma.vars[x] for x in prog.proc(prog.entry).params])
    except _Stop:
        pass
    return m


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32), st.lists(st.integers(0, 2), max_size=12))
def test_observed_aliases_are_reported(seed, decisions):
    prog = gen_program(random.Random(seed))
    oracle = build(prog)
    cfg = ExecConfig(nondet_domain=(-1, 1))
    derefd = {(p.name, s.ptr) for p in prog.procedures for s in walk(p.body) if isinstance(s, (Load, Store))}
    for sigma in list(grid(prog.proc(prog.entry).params, -1, 1))[:3]:
        m = _trace(prog, sigma, [d % 2 for d in decisions], cfg)
        for proc, u, w in m.equal_pairs:
            # integers may coincide with addresses; pointers are never forged from them
            if (proc, w) in derefd:
                assert oracle.may_alias(proc, v(u), v(w)), (proc, u, w)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32), st.lists(st.integers(0, 1), max_size=12))
def test_observed_writes_are_in_mod_locs(seed, decisions):
    prog = gen_program(random.Random(seed))
    oracle = build(prog)
    cfg = ExecConfig(nondet_domain=(-1, 1))
    for sigma in list(grid(prog.proc(prog.entry).params, -1, 1))[:3]:
        m = _trace(prog, sigma, decisions, cfg)
        for proc, env, addr in m.writes:
            locs = oracle.mod_locs(proc)
            if locs is TOP:
                continue
            covered = {env[t.arg.name] for t in locs}
            assert addr in covered, (proc, addr, locs)


def test_tracer_sees_writes_through_parameters():
    prog = parse("proc foo(x) : r { *x := 2; } proc main() : r { p := malloc(1); u := call foo(p); }")
    m = _trace(prog, Valuation({}), (), ExecConfig(nondet_domain=(0, 0)))
    assert [(name, addr) for name, _, addr in m.writes] == [("foo", 1)]
