"""State-merging exploration that computes outcome sets rather than paths.

Equi-safety only looks at which outcomes an input can reach: some failing run,
some pruned run, and the values returned by completed runs.  This explorer
pushes sets of states through each statement, merges identical states and
memoises calls on (procedure, arguments, heap).  Its semantics follow the
reference interpreter, which the tests cross-check.  There is no per-run fork
bound; a global work budget and a call depth limit yield an inconclusive
result instead.
"""

from __future__ import annotations

import itertools
import sys
from dataclasses import dataclass, field

from .interp import WITNESS_PREFIX, ExecConfig, Tag, Valuation, Verdict, _is_guarded, compile_formula, compile_term, witness_test
from .lang import Assert, Assign, Assume, Call, Havoc, Load, Malloc, NondetIf, Program, Seq, Store

MAX_DEPTH = 60
DEFAULT_BUDGET = 200_000


class _OutOfBudget(Exception):
    pass


@dataclass
class OutcomeSet:
    fail: bool = False
    pruned: bool = False
    returns: set = field(default_factory=set)
    inconclusive: bool = False
    # probe points (proc, path) that were visited and false in a frame that later failed
    violations: set = field(default_factory=set)

    def tags(self) -> set:
        out = set()
        if self.fail:
            out.add(Tag.FAIL)
        if self.pruned:
            out.add(Tag.PRUNED)
        if self.returns:
            out.add(Tag.OK)
        return out


@dataclass
class _CallResult:
    fail: bool = False
    pruned: bool = False
    inconclusive: bool = False
    rets: set = field(default_factory=set)  # (ret, frozen heap)
    violations: set = field(default_factory=set)


class _Explorer:
    def __init__(self, prog: Program, cfg: ExecConfig, probes, budget: int):
        self.prog = prog
        self.cfg = cfg
        self.probes = probes or {}
        self.budget = budget
        self.work = 0
        self.memo: dict = {}
        self.active: set = set()
        self.depth = 0
        self.wrap = cfg.int_mode == "wrap32"
        self.values = tuple(cfg.values)
        self.wvalues = tuple(cfg.witness_values)
        self._terms: dict = {}
        self._preds: dict = {}

    def term(self, t):
        f = self._terms.get(t)
        if f is None:
            f = self._terms[t] = compile_term(t, self.wrap)
        return f

    def pred(self, p):
        f = self._preds.get(p)
        if f is None:
            f = self._preds[p] = compile_formula(p, (), self.wrap)
        return f

    def tick(self, n: int = 1):
        self.work += n
        if self.work > self.budget:
            raise _OutOfBudget

    def call(self, name: str, args: tuple, heap: frozenset) -> _CallResult:
        key = (name, args, heap)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        if key in self.active or self.depth >= MAX_DEPTH:
            # re-entering the same activation never terminates
            return _CallResult(inconclusive=True)
        self.active.add(key)
        self.depth += 1
        p = self.prog.proc(name)
        res = _CallResult()
        env = dict(zip(p.params, args))
        env[p.ret] = 0
        try:
            for env2, heap2, _ in self.seq(p.body.stmts, [(env, dict(heap), frozenset())], (), name, res):
                res.rets.add((env2[p.ret], frozenset(heap2.items())))
        finally:
            self.depth -= 1
            self.active.discard(key)
        if not res.inconclusive:
            self.memo[key] = res
        return res

    def probe(self, proc, path, states):
        check = self.probes.get((proc, path))
        if check is None:
            return states
        out = []
        for env, heap, bad in states:
            if not check(env, heap):
                bad = bad | {path}
            out.append((env, heap, bad))
        return out

    def failed(self, res, proc, bad):
        res.fail = True
        for path in bad:
            res.violations.add((proc, path))

    def seq(self, stmts, states, prefix, proc, res):
        i, n = 0, len(stmts)
        while i < n and states:
            if self.probes:
                states = self.probe(proc, prefix + (i,), states)
            s = stmts[i]
            if self.cfg.collapse_witnesses and isinstance(s, Havoc) and s.var.startswith(WITNESS_PREFIX):
                states, i = self.witness_block(stmts, i, states, proc, res)
            else:
                states = self.stmt(s, states, prefix + (i,), proc, res)
                i += 1
            states = _dedupe(states)
        if states and self.probes:
            states = self.probe(proc, prefix + (n,), states)
        return states

    def witness_block(self, stmts, i, states, proc, res):
        names = []
        while i < len(stmts) and isinstance(stmts[i], Havoc) and stmts[i].var.startswith(WITNESS_PREFIX):
            names.append(stmts[i].var)
            i += 1
        # loads/assigns between the havocs and the assume never read witnesses
        while i < len(stmts) and isinstance(stmts[i], (Load, Assign)):
            states = self.stmt(stmts[i], states, (), proc, res)
            i += 1
        if i >= len(stmts) or not isinstance(stmts[i], Assume):
            for name in names:
                states = self.stmt(Havoc(name), states, (), proc, res)
            return states, i
        test = witness_test(tuple(names), stmts[i].pred, self.cfg)
        out = []
        for env, heap, bad in states:
            self.tick()
            if test(env, heap):
                out.append((env, heap, bad))
            else:
                res.pruned = True
        return out, i + 1

    def stmt(self, s, states, path, proc, res):
        self.tick(len(states))
        out = []
        if isinstance(s, Assign):
            e, v = self.term(s.expr), s.var
            for env, heap, bad in states:
                env = dict(env)
                env[v] = e(env, heap)
                out.append((env, heap, bad))
        elif isinstance(s, Load):
            for env, heap, bad in states:
                addr = env[s.ptr]
                if addr == 0:
                    self.failed(res, proc, bad)
                    continue
                env = dict(env)
                env[s.var] = heap.get(addr, 0)
                out.append((env, heap, bad))
        elif isinstance(s, Store):
            e = self.term(s.expr)
            for env, heap, bad in states:
                addr = env[s.ptr]
                if addr == 0:
                    self.failed(res, proc, bad)
                    continue
                value = e(env, heap)
                heap = dict(heap)
                heap[addr] = value
                out.append((env, heap, bad))
        elif isinstance(s, Malloc):
            size = self.term(s.size)
            for env, heap, bad in states:
                cells = max(1, min(size(env, heap), self.cfg.max_cells))
                base = max(heap, default=0) + 1
                env2 = dict(env)
                env2[s.var] = base
                for combo in itertools.product(self.values, repeat=cells):
                    h = dict(heap)
                    h.update(zip(range(base, base + cells), combo))
                    out.append((env2, h, bad))
        elif isinstance(s, Havoc):
            vals = self.wvalues if s.var.startswith(WITNESS_PREFIX) else self.values
            for env, heap, bad in states:
                for x in vals:
                    env2 = dict(env)
                    env2[s.var] = x
                    out.append((env2, heap, bad))
        elif isinstance(s, Call):
            for env, heap, bad in states:
                r = self.call(s.proc, tuple(env[a] for a in s.args), frozenset(heap.items()))
                res.violations |= r.violations
                if r.fail:
                    self.failed(res, proc, bad)
                res.pruned |= r.pruned
                res.inconclusive |= r.inconclusive
                for ret, h in r.rets:
                    env2 = dict(env)
                    env2[s.var] = ret
                    out.append((env2, dict(h), bad))
        elif isinstance(s, Assert):
            p = self.pred(s.pred)
            for st in states:
                if p(st[0], st[1]):
                    out.append(st)
                else:
                    self.failed(res, proc, st[2])
        elif isinstance(s, Assume):
            p = self.pred(s.pred)
            for st in states:
                if p(st[0], st[1]):
                    out.append(st)
                else:
                    res.pruned = True
        elif isinstance(s, NondetIf):
            guard = _is_guarded(s)
            if guard is not None:
                g = self.pred(guard)
                yes, no = [], []
                for st in states:
                    (yes if g(st[0], st[1]) else no).append(st)
            else:
                yes = no = states
            if yes:
                out.extend(self.seq(s.then.stmts, yes, path + (0,), proc, res))
            if no:
                out.extend(self.seq(s.orelse.stmts, no, path + (1,), proc, res))
        elif isinstance(s, Seq):
            out = self.seq(s.stmts, states, path, proc, res)
        else:
            raise TypeError(f"not a statement: {s!r}")
        return out


def _dedupe(states):
    if len(states) < 2:
        return states
    seen, out = set(), []
    for env, heap, bad in states:
        key = (frozenset(env.items()), frozenset(heap.items()), bad)
        if key not in seen:
            seen.add(key)
            out.append((env, heap, bad))
    return out


def outcome_set(prog: Program, sigma: Valuation, cfg: ExecConfig = ExecConfig(), probes=None, budget: int = DEFAULT_BUDGET) -> OutcomeSet:
    """Every outcome ``prog`` can reach from ``sigma``.

    ``probes`` maps (proc, path) to ``fn(env, heap) -> bool``; a probe that is
    false somewhere in a frame which then fails is reported in ``violations``.
    """
    p = prog.proc(prog.entry)
    missing = [x for x in p.params if x not in sigma.vars]
    if missing:
        raise ValueError(f"no value for entry parameter(s) {', '.join(missing)}")
    ex = _Explorer(prog, cfg, probes, budget)
    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 20000))
    try:
        r = ex.call(prog.entry, tuple(sigma.vars[x] for x in p.params), frozenset(sigma.heap.items()))
    except _OutOfBudget:
        return OutcomeSet(inconclusive=True)
    finally:
        sys.setrecursionlimit(old)
    return OutcomeSet(r.fail, r.pruned, {ret for ret, _ in r.rets}, r.inconclusive, set(r.violations))


def compare_sets(a: OutcomeSet, b: OutcomeSet) -> str:
    """Empty string when ``b`` is a valid trimmed counterpart of ``a`` for one input."""
    if a.fail != b.fail:
        return f"failure in original: {a.fail}, in trimmed: {b.fail}"
    if a.pruned and not b.pruned:
        return "original has a pruned run, trimmed has none"
    if not b.pruned:
        missing = a.returns - b.returns
        if missing:
            return f"original returns {min(missing)}, trimmed cannot"
    return ""


def check_equi_safe(p: Program, q: Program, inputs, cfg: ExecConfig = ExecConfig(), budget: int = DEFAULT_BUDGET) -> Verdict:
    """Check ``q`` against ``p`` on every valuation in ``inputs``.

    Stops at the first counterexample.  Inputs where either side is
    inconclusive are skipped and counted.
    """
    skipped = checked = 0
    for sigma in inputs:
        a = outcome_set(p, sigma, cfg, budget=budget)
        if a.inconclusive:
            skipped += 1
            continue
        b = outcome_set(q, sigma, cfg, budget=budget)
        if b.inconclusive:
            skipped += 1
            continue
        checked += 1
        why = compare_sets(a, b)
        if why:
            return Verdict("counterexample", sigma, why, skipped, checked)
    if skipped:
        return Verdict("inconclusive", None, f"{skipped} input(s) hit a bound", skipped, checked)
    return Verdict("equi-safe", None, "", 0, checked)
