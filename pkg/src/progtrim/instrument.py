"""Procedure splitting and insertion of trimming assumes."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .engine import emit, trimming_condition
from .formula import free_vars
from .lang import (
    FALSE,
    Assert,
    Assume,
    Call,
    NondetIf,
    Procedure,
    Program,
    Seq,
    SourceSpan,
    walk,
)

SAFE_SUFFIX = "__safe"


def safe_name(proc: str) -> str:
    return proc + SAFE_SUFFIX


@dataclass(frozen=True)
class PlacementStrategy:
    at_entry: bool = True
    before_calls: bool = True
    before_conditionals: bool = False

    @classmethod
    def parse(cls, text: str) -> "PlacementStrategy":
        """``L/P`` or ``L/P+C`` (also ``entry,calls,conds`` style flags)."""
        t = text.replace(" ", "").upper()
        if t in ("L/P", "LP"):
            return cls(True, True, False)
        if t in ("L/P+C", "LP+C", "LPC"):
            return cls(True, True, True)
        if t == "C":
            return cls(False, False, True)
        flags = {f.strip().lower() for f in text.split(",") if f.strip()}
        known = {"entry", "calls", "conds"}
        if not flags or flags - known:
            raise ValueError(f"unknown placement {text!r}")
        return cls("entry" in flags, "calls" in flags, "conds" in flags)

    def __str__(self) -> str:
        if self.at_entry and self.before_calls:
            return "L/P+C" if self.before_conditionals else "L/P"
        names = [n for n, on in (("entry", self.at_entry), ("calls", self.before_calls), ("conds", self.before_conditionals)) if on]
        return ",".join(names)


# -- splitting ---------------------------------------------------------------


def _safe_stmt(s, cloned: set):
    if isinstance(s, Seq):
        return Seq(tuple(_safe_stmt(c, cloned) for c in s.stmts), s.span)
    if isinstance(s, Assert):
        return Assume(s.pred, s.span)
    if isinstance(s, Call) and s.proc in cloned:
        return replace(s, proc=safe_name(s.proc))
    if isinstance(s, NondetIf):
        return NondetIf(_safe_stmt(s.then, cloned), _safe_stmt(s.orelse, cloned), s.span)
    return s


def _split_stmt(s, cloned: set):
    if isinstance(s, Seq):
        return Seq(tuple(_split_stmt(c, cloned) for c in s.stmts), s.span)
    if isinstance(s, Call) and s.proc in cloned:
        safe = Seq((replace(s, proc=safe_name(s.proc)),))
        failing = Seq((s, Assume(FALSE, s.span)))
        return NondetIf(safe, failing, s.span)
    if isinstance(s, NondetIf):
        return NondetIf(_split_stmt(s.then, cloned), _split_stmt(s.orelse, cloned), s.span)
    return s


def may_fail(prog: Program) -> set:
    """Procedures from which an assertion is reachable through calls."""
    own = {p.name for p in prog.procedures if any(isinstance(s, Assert) for s in walk(p.body))}
    return {p.name for p in prog.procedures if prog.reachable(p.name) & own}


def split_procedures(prog: Program) -> Program:
    """Clone every procedure called from reachable code into a never-failing twin.

    Call sites in reachable originals become a choice between the safe twin and
    the original followed by ``assume false``.  Callees that cannot reach an
    assertion are left alone: both arms would behave the same up to a dead
    ``assume false``, so splitting them only multiplies paths.
    """
    reach = prog.reachable()
    failing = may_fail(prog)
    cloned = {c for p in reach for c in prog.call_graph[p] if c in failing}
    for c in cloned:
        if safe_name(c) in prog:
            raise ValueError(f"procedure name {safe_name(c)!r} is reserved")
    out = []
    for p in prog.procedures:
        if p.name in cloned:
            out.append(Procedure(safe_name(p.name), p.params, p.ret, _safe_stmt(p.body, cloned), p.span))
        if p.name in reach:
            out.append(replace(p, body=_split_stmt(p.body, cloned)))
        else:
            out.append(p)
    return Program(tuple(out), prog.entry)


def is_split_site(s) -> bool:
    """Whether ``s`` is a conditional introduced by :func:`split_procedures`."""
    if not isinstance(s, NondetIf):
        return False
    t, e = s.then.stmts, s.orelse.stmts
    return (
        len(t) == 1
        and len(e) == 2
        and isinstance(t[0], Call)
        and isinstance(e[0], Call)
        and t[0].proc == safe_name(e[0].proc)
        and e[1] == Assume(FALSE)
    )


# -- placement ---------------------------------------------------------------


def placement_points(p: Procedure, strategy: PlacementStrategy) -> list:
    """Position paths (before a statement) selected by ``strategy``, in program order."""
    points: list = []

    def visit(s: Seq, prefix: tuple):
        for i, c in enumerate(s.stmts):
            here = prefix + (i,)
            if is_split_site(c) or isinstance(c, Call):
                if strategy.before_calls:
                    points.append(here)
            elif isinstance(c, NondetIf):
                if strategy.before_conditionals:
                    points.append(here)
            if isinstance(c, NondetIf) and not is_split_site(c):
                visit(c.then, here + (0,))
                visit(c.orelse, here + (1,))

    if strategy.at_entry:
        k = 0
        while k < len(p.body.stmts) and isinstance(p.body.stmts[k], Assume):
            k += 1
        points.append((k,))
    visit(p.body, ())
    seen, out = set(), []
    for pt in points:
        if pt not in seen:
            seen.add(pt)
            out.append(pt)
    return out


@dataclass(frozen=True)
class InsertedAssume:
    proc: str
    path: tuple
    span: SourceSpan | None
    witnesses: tuple
    pred: object
    statements: tuple

    @property
    def nontrivial(self) -> bool:
        return self.pred != FALSE


@dataclass(frozen=True)
class Report:
    assumes: tuple

    @property
    def count(self) -> int:
        return len(self.assumes)

    @property
    def nontrivial(self) -> int:
        return sum(a.nontrivial for a in self.assumes)

    def text(self, time_ms: float | None = None) -> str:
        from .printer import formula_str

        lines = [f"assumes: {self.count}", f"nontrivial: {self.nontrivial}"]
        if time_ms is not None:
            lines.append(f"time_ms: {time_ms:.2f}")
        for a in self.assumes:
            where = str(a.span) if a.span is not None else "?"
            w = f" witnesses={','.join(a.witnesses)}" if a.witnesses else ""
            lines.append(f"{where} {a.proc}{w}: assume {formula_str(a.pred)}")
        return "\n".join(lines) + "\n"


def _proc_vars(p: Procedure) -> set:
    from .alias import _procedure_vars

    return _procedure_vars(p)


def _insert(body: Seq, inserts: dict, prefix: tuple = ()) -> Seq:
    out = []
    for i, c in enumerate(body.stmts):
        here = prefix + (i,)
        out.extend(inserts.get(here, ()))
        if isinstance(c, NondetIf):
            c = NondetIf(_insert(c.then, inserts, here + (0,)), _insert(c.orelse, inserts, here + (1,)), c.span)
        out.append(c)
    out.extend(inserts.get(prefix + (len(body.stmts),), ()))
    return Seq(tuple(out), body.span)


def _span_at(p: Procedure, path: tuple):
    from .inference import statement_at

    s = statement_at(p.body, path)
    if s is not None and s.span is not None:
        return s.span
    return p.span


def instrument(split: Program, ann, strategy: PlacementStrategy, qe="full", max_conjuncts=None, dnf_cap=64, keep_trivial=True):
    """Insert trimming assumes into the entry and the unprimed procedures that may fail.

    Unprimed procedures only run on arms that end in ``assume false``.  If one
    cannot reach an assertion, every condition in it is ``false`` and adding
    it would not change any outcome, so it is left as is (as are unreachable
    procedures).
    """
    has_asserts = any(isinstance(s, Assert) for p in split.procedures for s in walk(p.body))
    failing = may_fail(split)
    procs, report = [], []
    for p in split.procedures:
        if p.name != split.entry and (safe_name(p.name) not in split or p.name not in failing):
            procs.append(p)
            continue
        taken = _proc_vars(p)
        inserts: dict = {}
        for path in placement_points(p, strategy):
            phi = ann.conditions.get((p.name, path))
            if phi is None:
                continue
            tc = trimming_condition(phi, qe, max_conjuncts, dnf_cap, avoid=taken)
            if tc.trivial:
                continue
            if not keep_trivial and not has_asserts and p.name == split.entry and path == (0,):
                continue
            stmts = emit(tc, taken)
            for s in stmts:
                v = getattr(s, "var", None)
                if v is not None:
                    taken.add(v)
            taken |= free_vars(tc.pred)
            inserts[path] = stmts
            report.append(InsertedAssume(p.name, path, _span_at(p, path), tc.witnesses, tc.pred, tuple(stmts)))
        procs.append(replace(p, body=_insert(p.body, inserts)) if inserts else p)
    return Program(tuple(procs), split.entry), Report(tuple(report))

