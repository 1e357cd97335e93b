"""Flow-insensitive alias oracle.

Inclusion-based (Andersen-style) points-to analysis, field- and
context-insensitive, with one abstract location per malloc site and one shared
location ``EXT`` for memory that exists before the program starts (reachable
from the parameters of entry-like procedures).  Integer constants are assumed
never to be forged into pointers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .formula import term_vars
from .lang import (
    Assert,
    Assign,
    BinOp,
    Call,
    Const,
    Drf,
    Load,
    Malloc,
    Program,
    Store,
    Var,
    defined_var,
    walk,
)

EXT = "EXT"
TOP = None  # "may point anywhere"


@dataclass(frozen=True)
class Site:
    proc: str
    index: int

    def __str__(self) -> str:
        return f"{self.proc}#malloc{self.index}"


def _node_str(node) -> str:
    if node[0] == "v":
        return f"{node[1]}.{node[2]}"
    return f"*{node[1]}"


@dataclass
class AliasOracle:
    program: Program
    pts: dict = field(default_factory=dict)  # node -> set of abstract locations
    proc_vars: dict = field(default_factory=dict)  # proc -> set of identifiers
    mod: dict = field(default_factory=dict)  # proc -> frozenset of Drf terms, or TOP
    asserts: dict = field(default_factory=dict)  # proc -> bool

    # -- queries -------------------------------------------------------------

    def points_to(self, proc: str, t, bound=frozenset()):
        """Abstract locations term ``t`` may evaluate to, or TOP."""
        if isinstance(t, Var):
            if t.name in bound or t.name not in self.proc_vars.get(proc, ()):
                return TOP
            return self.pts.get(("v", proc, t.name), frozenset())
        if isinstance(t, Const):
            return frozenset()
        if isinstance(t, BinOp):
            a = self.points_to(proc, t.left, bound)
            b = self.points_to(proc, t.right, bound)
            if a is TOP or b is TOP:
                return TOP
            return a | b
        if isinstance(t, Drf):
            a = self.points_to(proc, t.arg, bound)
            if a is TOP:
                return TOP
            out = set()
            for loc in a:
                out |= self.pts.get(("h", loc), set())
            return frozenset(out)
        raise TypeError(f"not a term: {t!r}")

    def may_alias(self, proc: str, a, b, bound=frozenset()) -> bool:
        """Whether terms ``a`` and ``b`` may hold the same address."""
        if a == b:
            return True
        pa = self.points_to(proc, a, bound)
        pb = self.points_to(proc, b, bound)
        if pa is TOP or pb is TOP:
            return True
        return bool(pa & pb)

    def location_terms(self, proc: str) -> set:
        """Memory-location terms of ``proc`` up to dereference depth 2."""
        out = set()
        for v in self.proc_vars.get(proc, ()):
            out.add(Var(v))
            if self.points_to(proc, Var(v)):
                out.add(Drf(Var(v)))
                if self.points_to(proc, Drf(Var(v))):
                    out.add(Drf(Drf(Var(v))))
        return out

    def aliases(self, alpha, proc: str, universe=None) -> set:
        """Terms of ``universe`` (default: the procedure's location terms) that may alias ``alpha``."""
        if universe is None:
            universe = self.location_terms(proc)
        return {b for b in universe if self.may_alias(proc, alpha, b)} | {alpha}

    def mod_locs(self, proc: str, actuals=None):
        """Heap locations written by ``proc`` (or callees), as drf terms over its formals.

        With ``actuals`` the formals are replaced by the call-site arguments.
        Returns TOP when some write cannot be expressed that way.
        """
        locs = self.mod[proc]
        if locs is TOP or actuals is None:
            return locs
        formals = self.program.proc(proc).params
        binding = dict(zip(formals, actuals))
        return frozenset(Drf(Var(binding[t.arg.name])) for t in locs)

    def has_asrts(self, proc: str) -> bool:
        return self.asserts[proc]

    def dump(self) -> str:
        lines = []
        for node in sorted(self.pts, key=_node_str):
            locs = ", ".join(sorted(str(l) for l in self.pts[node]))
            lines.append(f"{_node_str(node)} -> {{{locs}}}")
        return "".join(line + "\n" for line in lines)


# -- construction ------------------------------------------------------------


def _pointer_used(prog: Program) -> set:
    """(proc, var) pairs whose value may flow into a dereference."""
    flows: dict = {}  # target -> set of sources

    def edge(src, dst):
        flows.setdefault(dst, set()).add(src)

    used = set()
    for p in prog.procedures:
        for s in walk(p.body):
            if isinstance(s, Assign):
                for u in term_vars(s.expr):
                    edge((p.name, u), (p.name, s.var))
            elif isinstance(s, Load):
                used.add((p.name, s.ptr))
                edge("HEAP", (p.name, s.var))
            elif isinstance(s, Store):
                used.add((p.name, s.ptr))
                for u in term_vars(s.expr):
                    edge((p.name, u), "HEAP")
            elif isinstance(s, Call):
                callee = prog.proc(s.proc)
                for a, f in zip(s.args, callee.params):
                    edge((p.name, a), (callee.name, f))
                edge((callee.name, callee.ret), (p.name, s.var))
    # values reaching the heap might be loaded and dereferenced
    used.add("HEAP")
    todo = list(used)
    while todo:
        n = todo.pop()
        for src in flows.get(n, ()):
            if src not in used:
                used.add(src)
                todo.append(src)
    return used


def _procedure_vars(p) -> set:
    from .parser import _uses

    out = set(p.params) | {p.ret}
    for s in walk(p.body):
        out |= _uses(s)
        v = defined_var(s)
        if v is not None:
            out.add(v)
    return out


def build(prog: Program, pointer_params=()) -> AliasOracle:
    """Build the oracle; ``pointer_params`` lists (proc, param) pairs to treat as pointers
    even when the program never dereferences them (e.g. for external postconditions)."""
    oracle = AliasOracle(prog)
    pts: dict = {}

    def add(node, locs) -> bool:
        cur = pts.setdefault(node, set())
        before = len(cur)
        cur |= locs
        return len(cur) != before

    copies = []  # (dst, src) node pairs
    loads = []  # (dst var node, pointer node)
    stores = []  # (pointer node, src node)
    for p in prog.procedures:
        oracle.proc_vars[p.name] = _procedure_vars(p)
        index = 0
        for s in walk(p.body):
            if isinstance(s, Malloc):
                add(("v", p.name, s.var), {Site(p.name, index)})
                index += 1
            elif isinstance(s, Assign):
                for u in term_vars(s.expr):
                    copies.append((("v", p.name, s.var), ("v", p.name, u)))
            elif isinstance(s, Load):
                loads.append((("v", p.name, s.var), ("v", p.name, s.ptr)))
            elif isinstance(s, Store):
                for u in term_vars(s.expr):
                    stores.append((("v", p.name, s.ptr), ("v", p.name, u)))
            elif isinstance(s, Call):
                callee = prog.proc(s.proc)
                for a, f in zip(s.args, callee.params):
                    copies.append((("v", callee.name, f), ("v", p.name, a)))
                copies.append((("v", p.name, s.var), ("v", callee.name, callee.ret)))

    called = {c.proc for p in prog.procedures for c in p.calls()}
    used = _pointer_used(prog) | set(pointer_params)
    for p in prog.procedures:
        if p.name == prog.entry or p.name not in called:
            for f in p.params:
                if (p.name, f) in used:
                    add(("v", p.name, f), {EXT})
                    add(("h", EXT), {EXT})

    changed = True
    while changed:
        changed = False
        for dst, src in copies:
            changed |= add(dst, pts.get(src, set()))
        for dst, ptr in loads:
            for loc in list(pts.get(ptr, ())):
                changed |= add(dst, pts.get(("h", loc), set()))
        for ptr, src in stores:
            for loc in list(pts.get(ptr, ())):
                changed |= add(("h", loc), pts.get(src, set()))
    oracle.pts = {k: frozenset(v) for k, v in pts.items() if v}
    oracle.mod = _mod_sets(prog)
    oracle.asserts = {
        p.name: any(isinstance(s, Assert) for q in prog.reachable(p.name) for s in walk(prog.proc(q).body))
        for p in prog.procedures
    }
    return oracle


_INVISIBLE = object()  # write to memory the caller cannot name


def _mod_sets(prog: Program) -> dict:
    unmodified, fresh = {}, {}
    for p in prog.procedures:
        defs: dict = {}
        for s in walk(p.body):
            v = defined_var(s)
            if v is not None:
                defs.setdefault(v, []).append(s)
        unmodified[p.name] = {f for f in p.params if f not in defs}
        fresh[p.name] = {
            v for v, ss in defs.items() if v not in p.params and all(isinstance(s, Malloc) for s in ss)
        }

    mod: dict = {p.name: frozenset() for p in prog.procedures}

    def target(pname, ptr):
        if ptr in unmodified[pname]:
            return Drf(Var(ptr))
        if ptr in fresh[pname]:
            return _INVISIBLE
        return TOP

    changed = True
    while changed:
        changed = False
        for p in prog.procedures:
            if mod[p.name] is TOP:
                continue
            out, top = set(), False
            for s in walk(p.body):
                if isinstance(s, Store):
                    t = target(p.name, s.ptr)
                    top |= t is TOP
                    if t is not TOP and t is not _INVISIBLE:
                        out.add(t)
                elif isinstance(s, Call):
                    sub = mod[s.proc]
                    if sub is TOP:
                        top = True
                        continue
                    formals = prog.proc(s.proc).params
                    for loc in sub:
                        arg = s.args[formals.index(loc.arg.name)]
                        t = target(p.name, arg)
                        top |= t is TOP
                        if t is not TOP and t is not _INVISIBLE:
                            out.add(t)
            new = TOP if top else frozenset(out)
            if new != mod[p.name]:
                mod[p.name] = new
                changed = True
    return mod


__all__ = ["AliasOracle", "EXT", "Site", "TOP", "build"]
