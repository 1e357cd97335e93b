"""Property checkers tying the analysis to the reference interpreter."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .alias import build
from .engine import trimming_condition
from .formula import derefs, free_vars
from .inference import _Ctx, infer_statement
from .interp import (
    ExecConfig,
    Valuation,
    compile_formula,
    compile_wp,
    witness_test,
    universe,
)
from .outcomes import outcome_set
from .lang import Load, Malloc, Procedure, Program, Seq, Store, walk

SIMPLE_PARAMS = ("x", "y", "p", "q")
SCALAR_RANGE = range(-3, 4)
POINTER_RANGE = (1, 2)
CELL_RANGE = range(-1, 2)


def _stmt_vars(s) -> set:
    from .parser import _uses

    out = set()
    for c in walk(s):
        out |= _uses(c)
        v = getattr(c, "var", None)
        if v is not None:
            out.add(v)
    return out


def infer_simple(body: Seq, post):
    """Safety condition of a call-free body w.r.t. ``post`` over the fixed parameters."""
    prog = Program((Procedure("__s", SIMPLE_PARAMS, "__ret", body),), "__s")
    oracle = build(prog, pointer_params=[("__s", "p"), ("__s", "q")])
    ctx = _Ctx(oracle, {}, "__s", False, None)
    return infer_statement(ctx, body, post)


def simple_valuations(body: Seq, *formulas):
    """All valuations of the variables that matter, other ones fixed."""
    names = _stmt_vars(body)
    uses_heap = any(isinstance(c, (Load, Store, Malloc)) for c in walk(body))
    for f in formulas:
        names |= free_vars(f)
        uses_heap |= bool(derefs(f))
    axes = []
    for v in SIMPLE_PARAMS:
        if v in ("p", "q"):
            axes.append(POINTER_RANGE if v in names else (1,))
        else:
            axes.append(SCALAR_RANGE if v in names else (0,))
    cells = itertools.product(CELL_RANGE, repeat=2) if uses_heap else [(0, 0)]
    cells = list(cells)
    for combo in itertools.product(*axes):
        for c in cells:
            yield Valuation(dict(zip(SIMPLE_PARAMS, combo)), {1: c[0], 2: c[1]})


@dataclass(frozen=True)
class WpViolation:
    sigma: Valuation
    condition: object


def check_wp_soundness(body: Seq, post, cfg: ExecConfig | None = None) -> list:
    """Valuations where the inferred condition holds but the exact wp does not."""
    cfg = cfg or ExecConfig(nondet_domain=(-3, 3))
    phi = infer_simple(body, post)
    # every valuation has cells {1, 2}, so quantifiers share one universe
    uni = universe(cfg, Valuation({}, {1: 0, 2: 0}), extra_cells=3)
    pre = compile_formula(phi, uni)
    wp = compile_wp(body, post, cfg, uni)
    bad = []
    for sigma in simple_valuations(body, post, phi):
        if pre(sigma.vars, sigma.heap) and not wp(sigma.vars, sigma.heap):
            bad.append(WpViolation(sigma, phi))
    return bad


# -- necessary-condition check ------------------------------------------------


def _probe_for(tc, cfg: ExecConfig):
    """Closure deciding whether an inserted assume can be passed in a state."""
    return witness_test(tuple(tc.witnesses), tc.pred, cfg)


@dataclass(frozen=True)
class NecessityViolation:
    sigma: Valuation
    proc: str
    path: tuple


def check_necessity(result, inputs, cfg: ExecConfig, presets_cfg) -> tuple:
    """Run the split program and verify every inserted condition holds on failing runs.

    Returns (violations, inconclusive_inputs, failing_inputs).  A violation is
    an input together with a probe point that was false in some frame that
    went on to fail.
    """
    probes = {}
    for a in result.report.assumes:
        tc = trimming_condition(
            result.annotations.conditions[(a.proc, a.path)],
            presets_cfg.qe,
            presets_cfg.max_conjuncts,
            presets_cfg.dnf_cap,
        )
        probes[(a.proc, a.path)] = _probe_for(tc, cfg)
    violations, inconclusive, failing = [], 0, 0
    if not probes:
        return violations, inconclusive, failing
    for sigma in inputs:
        out = outcome_set(result.split, sigma, cfg, probes=probes)
        if out.inconclusive:
            inconclusive += 1
        if out.fail:
            failing += 1
        for proc, path in sorted(out.violations):
            violations.append(NecessityViolation(sigma, proc, path))
    return violations, inconclusive, failing
