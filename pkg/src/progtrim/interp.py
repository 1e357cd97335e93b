"""Reference interpreter, bounded-exhaustive explorer and checking oracles.

Memory is a map from positive addresses to integers.  Reading an address that
was never written yields 0; dereferencing address 0 (null) is a failing
execution.  Fresh cells are allocated just above the largest address in the
current heap, so allocation depends only on the state.
"""

from __future__ import annotations

import enum
import functools
import itertools
import sys
from dataclasses import dataclass, field

from .formula import derefs, miniscope
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
    Program,
    Seq,
    Store,
    Var,
)

WITNESS_PREFIX = "_q"
MAX_CALL_DEPTH = 400


class Tag(enum.Enum):
    OK = "✓"
    FAIL = "⚡"
    PRUNED = "◇"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Valuation:
    """Entry-parameter values plus the initial heap."""

    vars: dict = field(default_factory=dict)
    heap: dict = field(default_factory=dict)

    def key(self) -> tuple:
        return tuple(sorted(self.vars.items())), tuple(sorted(self.heap.items()))

    def __str__(self) -> str:
        parts = [f"{k}={v}" for k, v in sorted(self.vars.items())]
        parts += [f"[{a}]={v}" for a, v in sorted(self.heap.items())]
        return ", ".join(parts)


@dataclass(frozen=True)
class ExecConfig:
    nondet_domain: tuple = (-3, 3)
    witness_domain: tuple = (-16, 16)
    fork_bound: int = 64
    step_bound: int = 100_000
    int_mode: str = "math"
    max_cells: int = 4
    collapse_witnesses: bool = True

    def __post_init__(self):
        lo, hi = self.nondet_domain
        if lo > hi or self.fork_bound < 1 or self.step_bound < 1:
            raise ValueError("bounds must be positive and domains non-empty")

    @property
    def values(self) -> range:
        return range(self.nondet_domain[0], self.nondet_domain[1] + 1)

    @property
    def witness_values(self) -> range:
        return range(self.witness_domain[0], self.witness_domain[1] + 1)


@dataclass(frozen=True)
class ExecutionResult:
    """``outcome`` is None when the run was inconclusive (see ``reason``)."""

    outcome: Tag | None
    steps: int
    decisions: tuple
    sigma: Valuation
    ret: int | None = None
    reason: str = ""
    # (procedure, position, arm) for every conditional entered, guarded ones included
    trace: tuple = field(default=(), compare=False)

    @property
    def inconclusive(self) -> bool:
        return self.outcome is None


# -- arithmetic and formulas -------------------------------------------------


def _wrap(v: int) -> int:
    return (v + 2**31) % 2**32 - 2**31


def _arith(op: str, a: int, b: int, wrap: bool) -> int:
    r = a + b if op == "+" else a - b if op == "-" else a * b
    return _wrap(r) if wrap else r


def eval_term(t, env: dict, heap: dict, wrap: bool = False) -> int:
    if isinstance(t, Const):
        return t.value
    if isinstance(t, Var):
        return env[t.name]
    if isinstance(t, BinOp):
        return _arith(t.op, eval_term(t.left, env, heap, wrap), eval_term(t.right, env, heap, wrap), wrap)
    if isinstance(t, Drf):
        return heap.get(eval_term(t.arg, env, heap, wrap), 0)
    raise TypeError(f"not a term: {t!r}")


def _cmp(op: str, a: int, b: int) -> bool:
    return a < b if op == "<" else a > b if op == ">" else a == b


def eval_formula(f, env: dict, heap: dict, universe=(), wrap: bool = False) -> bool:
    """Truth value of ``f``; quantifiers range over ``universe``."""
    if isinstance(f, BoolConst):
        return f.value
    if isinstance(f, Cmp):
        return _cmp(f.op, eval_term(f.left, env, heap, wrap), eval_term(f.right, env, heap, wrap))
    if isinstance(f, Not):
        return not eval_formula(f.arg, env, heap, universe, wrap)
    if isinstance(f, And):
        return all(eval_formula(a, env, heap, universe, wrap) for a in f.args)
    if isinstance(f, Or):
        return any(eval_formula(a, env, heap, universe, wrap) for a in f.args)
    if isinstance(f, Implies):
        return not eval_formula(f.left, env, heap, universe, wrap) or eval_formula(f.right, env, heap, universe, wrap)
    if isinstance(f, (Forall, Exists)):
        want = isinstance(f, Forall)
        saved = env.get(f.var, _MISSING)
        try:
            for v in universe:
                env[f.var] = v
                if eval_formula(f.body, env, heap, universe, wrap) != want:
                    return not want
            return want
        finally:
            if saved is _MISSING:
                env.pop(f.var, None)
            else:
                env[f.var] = saved
    raise TypeError(f"not a formula: {f!r}")


_MISSING = object()


# -- execution ---------------------------------------------------------------


class _Stop(Exception):
    def __init__(self, tag: Tag | None, reason: str = ""):
        self.tag = tag
        self.reason = reason


class _Chooser:
    def __init__(self, prefix, fork_bound: int, extend: bool):
        self.prefix = tuple(prefix)
        self.taken: list = []
        self.arities: list = []
        self.fork_bound = fork_bound
        self.extend = extend

    def choose(self, n: int) -> int:
        i = len(self.taken)
        if i >= self.fork_bound:
            raise _Stop(None, "fork bound")
        if i < len(self.prefix):
            c = self.prefix[i]
            if not 0 <= c < n:
                raise ValueError(f"decision {c} out of range for {n}-way choice")
        elif self.extend:
            c = 0
        else:
            raise _Stop(None, "decisions exhausted")
        self.taken.append(c)
        self.arities.append(n)
        return c


def _is_guarded(s: NondetIf):
    t, e = s.then.stmts, s.orelse.stmts
    if t and e and isinstance(t[0], Assume) and isinstance(e[0], Assume):
        p, q = t[0].pred, e[0].pred
        if q == Not(p) or p == Not(q):
            return p
    return None


@dataclass
class _Frame:
    proc: str
    env: dict
    visits: list = field(default_factory=list)


class _Machine:
    def __init__(self, prog: Program, cfg: ExecConfig, chooser: _Chooser, heap: dict, probes=None):
        self.prog = prog
        self.cfg = cfg
        self.chooser = chooser
        self.heap = heap
        self.steps = 0
        self.wrap = cfg.int_mode == "wrap32"
        self.probes = probes or {}
        self.frames: list = []
        self.depth = 0
        self.entry_env: dict = {}
        self.branches: list = []

    def tick(self):
        self.steps += 1
        if self.steps > self.cfg.step_bound:
            raise _Stop(None, "step bound")

    def expr(self, e, env):
        return eval_term(e, env, self.heap, self.wrap)

    def pred(self, p, env) -> bool:
        return eval_formula(p, env, self.heap, (), self.wrap)

    def call(self, name: str, args: list) -> int:
        p = self.prog.proc(name)
        self.depth += 1
        if self.depth > MAX_CALL_DEPTH:
            raise _Stop(None, "call depth")
        env = dict(zip(p.params, args))
        env[p.ret] = 0
        frame = _Frame(name, env)
        if self.depth == 1:
            self.entry_env = env
        self.frames.append(frame)
        self.seq(p.body, frame, ())
        self.frames.pop()
        self.depth -= 1
        return env[p.ret]

    def probe(self, frame: _Frame, path: tuple):
        check = self.probes.get((frame.proc, path))
        if check is not None:
            frame.visits.append((path, check(frame.env, self.heap)))

    def seq(self, s: Seq, frame: _Frame, prefix: tuple):
        stmts = s.stmts
        i = 0
        n = len(stmts)
        while i < n:
            if self.probes:
                self.probe(frame, prefix + (i,))
            c = stmts[i]
            if self.cfg.collapse_witnesses and isinstance(c, Havoc) and c.var.startswith(WITNESS_PREFIX):
                i = self.witness_block(stmts, i, frame)
                continue
            self.stmt(c, frame, prefix + (i,))
            i += 1
        if self.probes:
            self.probe(frame, prefix + (n,))

    def witness_block(self, stmts, i, frame) -> int:
        """Resolve consecutive witness havocs against the assume that follows them.

        Witnesses are dead after that assume, so any satisfying choice yields
        the same continuation; this keeps the explorer from enumerating them.
        """
        env = frame.env
        names = []
        while i < len(stmts) and isinstance(stmts[i], Havoc) and stmts[i].var.startswith(WITNESS_PREFIX):
            names.append(stmts[i].var)
            self.tick()
            i += 1
        while i < len(stmts) and isinstance(stmts[i], (Load, Assign)):
            self.stmt(stmts[i], frame, ())
            i += 1
        if i >= len(stmts) or not isinstance(stmts[i], Assume):
            for n in names:
                env[n] = self.chooser_value(self.cfg.witness_values)
            return i
        self.tick()
        if witness_test(tuple(names), stmts[i].pred, self.cfg)(env, self.heap):
            # the witnesses are dead past the assume and stay unbound
            return i + 1
        raise _Stop(Tag.PRUNED)

    def chooser_value(self, values) -> int:
        return values[self.chooser.choose(len(values))]

    def stmt(self, s, frame: _Frame, path: tuple):
        self.tick()
        env = frame.env
        if isinstance(s, Assign):
            env[s.var] = self.expr(s.expr, env)
        elif isinstance(s, Load):
            addr = env[s.ptr]
            if addr == 0:
                raise _Stop(Tag.FAIL, "null dereference")
            env[s.var] = self.heap.get(addr, 0)
        elif isinstance(s, Store):
            addr = env[s.ptr]
            if addr == 0:
                raise _Stop(Tag.FAIL, "null dereference")
            self.heap[addr] = self.expr(s.expr, env)
        elif isinstance(s, Malloc):
            size = self.expr(s.size, env)
            cells = max(1, min(size, self.cfg.max_cells))
            base = max(self.heap, default=0) + 1
            for k in range(cells):
                self.heap[base + k] = self.chooser_value(self.cfg.values)
            env[s.var] = base
        elif isinstance(s, Havoc):
            values = self.cfg.witness_values if s.var.startswith(WITNESS_PREFIX) else self.cfg.values
            env[s.var] = self.chooser_value(values)
        elif isinstance(s, Call):
            args = [env[a] for a in s.args]
            env[s.var] = self.call(s.proc, args)
        elif isinstance(s, Assert):
            if not self.pred(s.pred, env):
                raise _Stop(Tag.FAIL, "assertion")
        elif isinstance(s, Assume):
            if not self.pred(s.pred, env):
                raise _Stop(Tag.PRUNED)
        elif isinstance(s, NondetIf):
            guard = _is_guarded(s)
            if guard is not None:
                branch = 0 if self.pred(guard, env) else 1
            else:
                branch = self.chooser.choose(2)
            self.branches.append((frame.proc, path, branch))
            self.seq(s.then if branch == 0 else s.orelse, frame, path + (branch,))
        elif isinstance(s, Seq):
            self.seq(s, frame, path)
        else:
            raise TypeError(f"not a statement: {s!r}")


def _execute(prog: Program, sigma: Valuation, chooser: _Chooser, cfg: ExecConfig, probes=None, entry=None):
    heap = dict(sigma.heap)
    m = _Machine(prog, cfg, chooser, heap, probes)
    name = entry or prog.entry
    p = prog.proc(name)
    missing = [x for x in p.params if x not in sigma.vars]
    if missing:
        raise ValueError(f"no value for entry parameter(s) {', '.join(missing)}")
    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 20000))
    try:
        ret = m.call(name, [sigma.vars[x] for x in p.params])
        res = ExecutionResult(Tag.OK, m.steps, tuple(chooser.taken), sigma, ret, trace=tuple(m.branches))
    except _Stop as stop:
        res = ExecutionResult(stop.tag, m.steps, tuple(chooser.taken), sigma, None, stop.reason, tuple(m.branches))
    finally:
        sys.setrecursionlimit(old)
    return res, m


def run(prog: Program, sigma: Valuation, decisions=(), cfg: ExecConfig = ExecConfig()) -> ExecutionResult:
    """Execute with an explicit decision sequence; running out of it is inconclusive."""
    res, _ = _execute(prog, sigma, _Chooser(decisions, cfg.fork_bound, extend=False), cfg)
    return res


@dataclass
class Exploration:
    results: list
    inconclusive: int

    def tags(self) -> set:
        return {r.outcome for r in self.results}

    def has(self, tag: Tag) -> bool:
        return any(r.outcome is tag for r in self.results)

    @property
    def paths(self) -> int:
        return len(self.results) + self.inconclusive


def explore(prog: Program, sigma: Valuation, cfg: ExecConfig = ExecConfig(), probes=None, on_result=None, max_paths=100_000) -> Exploration:
    """Enumerate every decision sequence within the bounds (depth-first replay)."""
    results, inconclusive = [], 0
    stack = [()]
    while stack:
        prefix = stack.pop()
        chooser = _Chooser(prefix, cfg.fork_bound, extend=True)
        res, machine = _execute(prog, sigma, chooser, cfg, probes)
        for i in range(len(prefix), len(chooser.taken)):
            for alt in range(chooser.arities[i] - 1, 0, -1):
                stack.append(tuple(chooser.taken[:i]) + (alt,))
        if res.inconclusive:
            inconclusive += 1
        else:
            results.append(res)
        if on_result is not None:
            on_result(res, machine)
        if len(results) + inconclusive >= max_paths and stack:
            inconclusive += len(stack)
            break
    return Exploration(results, inconclusive)


def distinct_paths(prog: Program, inputs, cfg: ExecConfig = ExecConfig()) -> int:
    """Number of distinct control-flow paths over all ``inputs``.

    Two runs share a path when they take the same arms of the same conditionals
    (nondet values and guard outcomes alike) and end the same way, so inputs
    that only differ in data are not counted twice.
    """
    seen = set()
    for sigma in inputs:
        ex = explore(prog, sigma, cfg)
        if ex.inconclusive:
            raise ValueError(f"exploration hit a bound on {sigma}")
        seen.update((r.trace, r.decisions, r.outcome) for r in ex.results)
    return len(seen)


# -- oracles -----------------------------------------------------------------


def universe(cfg: ExecConfig, sigma: Valuation, extra_cells: int = 8) -> tuple:
    """Values quantifiers range over: the nondet domain plus reachable addresses."""
    base = max(sigma.heap, default=0)
    vals = set(cfg.values) | set(sigma.heap) | set(range(base + 1, base + 1 + extra_cells))
    return tuple(sorted(vals))


def exact_wp(body: Seq, post, sigma: Valuation, cfg: ExecConfig = ExecConfig(), params=None) -> bool | None:
    """Whether every run of the call-free ``body`` from ``sigma`` avoids failure and ends in ``post``.

    Returns None if exploration was cut short by a bound.
    """
    from .lang import Procedure

    names = tuple(sorted(sigma.vars)) if params is None else tuple(params)
    proc = Procedure("__wp", names, "__ret", body)
    prog = Program((proc,), "__wp")
    final_ok = [True]
    uni = universe(cfg, sigma)

    def check(res, machine):
        if res.outcome is Tag.FAIL:
            final_ok[0] = False
        elif res.outcome is Tag.OK:
            if not eval_formula(post, dict(machine.entry_env), machine.heap, uni, machine.wrap):
                final_ok[0] = False

    ex = explore(prog, sigma, cfg, on_result=check)
    if ex.inconclusive:
        return None
    return final_ok[0]


@dataclass(frozen=True)
class Verdict:
    """``status`` is "equi-safe", "counterexample" or "inconclusive"."""

    status: str
    sigma: Valuation | None = None
    detail: str = ""
    inconclusive_inputs: int = 0
    checked_inputs: int = 0

    @property
    def ok(self) -> bool:
        return self.status == "equi-safe"


def compare_outcomes(a: Exploration, b: Exploration) -> str:
    """Empty string when ``b`` is a valid trimmed counterpart of ``a`` for one input."""
    fail_a, fail_b = a.has(Tag.FAIL), b.has(Tag.FAIL)
    if fail_a != fail_b:
        return f"failure in original: {fail_a}, in trimmed: {fail_b}"
    pruned_b = b.has(Tag.PRUNED)
    if a.has(Tag.PRUNED) and not pruned_b:
        return "original has a pruned run, trimmed has none"
    ok_b = {r.ret for r in b.results if r.outcome is Tag.OK}
    for r in a.results:
        if r.outcome is Tag.OK and r.ret not in ok_b and not pruned_b:
            return f"original returns {r.ret}, trimmed cannot"
    return ""


def grid(params, lo: int, hi: int):
    """Every valuation of ``params`` over [lo, hi]."""
    for combo in itertools.product(range(lo, hi + 1), repeat=len(params)):
        yield Valuation(dict(zip(params, combo)))


# -- compiled evaluation -----------------------------------------------------


def compile_term(t, wrap: bool = False):
    """Closure ``(env, heap) -> int`` equivalent to :func:`eval_term`."""
    if isinstance(t, Const):
        v = t.value
        return lambda env, heap: v
    if isinstance(t, Var):
        name = t.name
        return lambda env, heap: env[name]
    if isinstance(t, Drf):
        a = compile_term(t.arg, wrap)
        return lambda env, heap: heap.get(a(env, heap), 0)
    if isinstance(t, BinOp):
        left, right = compile_term(t.left, wrap), compile_term(t.right, wrap)
        if t.op == "+":
            f = lambda env, heap: left(env, heap) + right(env, heap)  # noqa: E731
        elif t.op == "-":
            f = lambda env, heap: left(env, heap) - right(env, heap)  # noqa: E731
        else:
            f = lambda env, heap: left(env, heap) * right(env, heap)  # noqa: E731
        if wrap:
            return lambda env, heap: _wrap(f(env, heap))
        return f
    raise TypeError(f"not a term: {t!r}")


@functools.lru_cache(maxsize=4096)
def witness_test(names: tuple, pred, cfg: ExecConfig):
    """Closure deciding whether some witness tuple satisfies ``pred``."""
    f = pred
    for w in reversed(names):
        f = Exists(w, f)
    return compile_formula(miniscope(f), tuple(cfg.witness_values), cfg.int_mode == "wrap32")


def compile_formula(f, universe=(), wrap: bool = False):
    """Closure ``(env, heap) -> bool`` equivalent to :func:`eval_formula`."""
    if isinstance(f, BoolConst):
        v = f.value
        return lambda env, heap: v
    if isinstance(f, Cmp):
        a, b = compile_term(f.left, wrap), compile_term(f.right, wrap)
        if f.op == "<":
            return lambda env, heap: a(env, heap) < b(env, heap)
        if f.op == ">":
            return lambda env, heap: a(env, heap) > b(env, heap)
        return lambda env, heap: a(env, heap) == b(env, heap)
    if isinstance(f, Not):
        g = compile_formula(f.arg, universe, wrap)
        return lambda env, heap: not g(env, heap)
    if isinstance(f, (And, Or)):
        return _junction([compile_formula(a, universe, wrap) for a in f.args], isinstance(f, And))
    if isinstance(f, Implies):
        a, b = compile_formula(f.left, universe, wrap), compile_formula(f.right, universe, wrap)
        return lambda env, heap: not a(env, heap) or b(env, heap)
    if isinstance(f, (Forall, Exists)):
        return _over_values(compile_formula(f.body, universe, wrap), f.var, tuple(universe), isinstance(f, Forall))
    raise TypeError(f"not a formula: {f!r}")


def _junction(parts: list, conjunctive: bool):
    # plain loops; generator expressions dominate the cost of brute-force checks
    if len(parts) == 1:
        return parts[0]
    if len(parts) == 2:
        a, b = parts
        if conjunctive:
            return lambda env, heap: a(env, heap) and b(env, heap)
        return lambda env, heap: a(env, heap) or b(env, heap)

    def run(env, heap):
        for p in parts:
            if p(env, heap) != conjunctive:
                return not conjunctive
        return conjunctive

    return run


def _over_values(body, var: str, vals: tuple, universal: bool):
    def run(env, heap):
        env = dict(env)
        for v in vals:
            env[var] = v
            if body(env, heap) != universal:
                return not universal
        return universal

    return run


_FRESH = object()


def _has_drf(t) -> bool:
    if isinstance(t, Drf):
        return True
    if isinstance(t, BinOp):
        return _has_drf(t.left) or _has_drf(t.right)
    return False


def compile_wp(body: Seq, post, cfg: ExecConfig, universe=()):
    """Brute-force weakest precondition of a call-free body as a closure over states.

    The closure enumerates every nondeterministic resolution directly (no
    replay) and returns True iff no run fails and every completed run ends in a
    state satisfying ``post``.  It follows the interpreter's semantics exactly
    and is cross-checked against :func:`exact_wp` in the tests.
    """
    values = tuple(cfg.values)
    wvalues = tuple(cfg.witness_values)
    wrap = cfg.int_mode == "wrap32"

    # Fresh cells hold _FRESH until something observes them; only then are
    # their contents enumerated.  Universal choice commutes with every step
    # that does not look at the cell, so this matches eager enumeration.
    def observing(f, k):
        reads = derefs(f)
        if not reads:
            return k
        if any(_has_drf(t) for t in reads):
            # nested reads: addresses depend on contents, so settle every fresh cell
            def cells(env, heap):
                return [a for a, x in heap.items() if x is _FRESH]
        else:
            addrs = [compile_term(t, wrap) for t in reads]

            def cells(env, heap):
                return sorted({a for a in (t(env, heap) for t in addrs) if heap.get(a, 0) is _FRESH})

        def run(env, heap):
            fresh = cells(env, heap)
            if not fresh:
                return k(env, heap)
            for combo in itertools.product(values, repeat=len(fresh)):
                h = dict(heap)
                h.update(zip(fresh, combo))
                if not k(env, h):
                    return False
            return True

        return run

    final = observing(post, compile_formula(post, universe, wrap))

    def seq(stmts, k):
        for s in reversed(stmts):
            k = stmt(s, k)
        return k

    def stmt(s, k):
        if isinstance(s, Seq):
            return seq(s.stmts, k)
        if isinstance(s, Assign):
            e, v = compile_term(s.expr, wrap), s.var
            return lambda env, heap: k({**env, v: e(env, heap)}, heap)
        if isinstance(s, Load):
            ptr, v = s.ptr, s.var

            def load(env, heap):
                a = env[ptr]
                if a == 0:
                    return False
                x = heap.get(a, 0)
                if x is not _FRESH:
                    return k({**env, v: x}, heap)
                for x in values:
                    if not k({**env, v: x}, {**heap, a: x}):
                        return False
                return True

            return load
        if isinstance(s, Store):
            ptr, e = s.ptr, compile_term(s.expr, wrap)

            def store(env, heap):
                a = env[ptr]
                return a != 0 and k(env, {**heap, a: e(env, heap)})

            return store
        if isinstance(s, Malloc):
            size, v, maxc = compile_term(s.size, wrap), s.var, cfg.max_cells

            def malloc(env, heap):
                cells = max(1, min(size(env, heap), maxc))
                base = max(heap, default=0) + 1
                h = dict(heap)
                h.update((a, _FRESH) for a in range(base, base + cells))
                return k({**env, v: base}, h)

            return malloc
        if isinstance(s, Havoc):
            v = s.var
            vals = wvalues if v.startswith(WITNESS_PREFIX) else values
            return _over_values(k, v, vals, True)
        if isinstance(s, Assert):
            p = compile_formula(s.pred, (), wrap)
            return observing(s.pred, lambda env, heap: p(env, heap) and k(env, heap))
        if isinstance(s, Assume):
            p = compile_formula(s.pred, (), wrap)
            return observing(s.pred, lambda env, heap: not p(env, heap) or k(env, heap))
        if isinstance(s, NondetIf):
            a, b = seq(s.then.stmts, k), seq(s.orelse.stmts, k)
            guard = _is_guarded(s)
            if guard is not None:
                g = compile_formula(guard, (), wrap)
                return observing(guard, lambda env, heap: a(env, heap) if g(env, heap) else b(env, heap))
            return lambda env, heap: a(env, heap) and b(env, heap)
        raise TypeError(f"unsupported statement in a call-free body: {s!r}")

    return seq(body.stmts, final)
