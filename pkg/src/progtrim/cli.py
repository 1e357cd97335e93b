"""Command-line entry point: ``trim {trim,run,explore,check,dump}``."""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path

from .config import PRESETS, TrimConfig, trim_program
from .inference import dump_conditions
from .instrument import PlacementStrategy
from .interp import ExecConfig, Valuation, explore, grid, run
from .outcomes import check_equi_safe
from .parser import ParseError, parse
from .printer import print_program

EX_USAGE = 64
EX_DATAERR = 65
EX_SOFTWARE = 70


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _range(text: str) -> tuple:
    lo, sep, hi = text.partition("..")
    try:
        lo, hi = int(lo), int(hi)
    except ValueError:
        raise UsageError(f"expected lo..hi, got {text!r}") from None
    if not sep or lo > hi:
        raise UsageError(f"expected lo..hi with lo <= hi, got {text!r}")
    return lo, hi


def _inputs(text: str | None) -> dict:
    out = {}
    for item in (text or "").split(","):
        item = item.strip()
        if not item:
            continue
        k, sep, v = item.partition("=")
        try:
            out[k.strip()] = int(v)
        except ValueError:
            raise UsageError(f"bad input binding {item!r}") from None
        if not sep:
            raise UsageError(f"bad input binding {item!r}")
    return out


def _bool(text: str) -> bool:
    t = text.lower()
    if t in ("true", "1", "yes"):
        return True
    if t in ("false", "0", "no"):
        return False
    raise UsageError(f"expected true or false, got {text!r}")


def _load(path: str):
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None
    return parse(text, path)


def _trim_config(args) -> TrimConfig:
    cfg = PRESETS[args.preset]
    try:
        if args.mc is not None:
            mc = args.mc.lower()
            cfg = replace(cfg, max_conjuncts=None if mc in ("inf", "none", "unbounded") else int(mc))
        if args.qe is not None:
            cfg = replace(cfg, qe=args.qe)
        if args.place is not None:
            cfg = replace(cfg, placement=PlacementStrategy.parse(args.place))
        if args.int is not None:
            cfg = replace(cfg, int_mode=args.int)
        if args.keep_trivial is not None:
            cfg = replace(cfg, keep_trivial=_bool(args.keep_trivial))
    except ValueError as e:
        raise UsageError(str(e)) from None
    return cfg


def _exec_config(args) -> ExecConfig:
    kw = {}
    if getattr(args, "nondet", None):
        kw["nondet_domain"] = _range(args.nondet)
    if getattr(args, "fork_bound", None):
        kw["fork_bound"] = args.fork_bound
    if getattr(args, "int", None):
        kw["int_mode"] = args.int
    try:
        return ExecConfig(**kw)
    except ValueError as e:
        raise UsageError(str(e)) from None


def _valuations(prog, fixed: dict, domain: tuple):
    params = prog.proc(prog.entry).params
    unknown = set(fixed) - set(params)
    if unknown:
        raise UsageError(f"{prog.entry} has no parameter(s) {', '.join(sorted(unknown))}")
    free = [x for x in params if x not in fixed]
    for v in grid(free, *domain):
        yield Valuation({**fixed, **v.vars})


# -- subcommands -------------------------------------------------------------


def _trim_one(path: str, cfg: TrimConfig, args, out=None, report_path=None):
    prog = _load(path)
    res = trim_program(prog, cfg)
    text = print_program(res.program)
    report = f"file: {path}\npreset: {args.preset}\n" + res.report.text(res.seconds * 1000)
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)
    if report_path is None:
        sys.stderr.write(report)
    else:
        Path(report_path).write_text(report)
    if args.dump_aliases:
        sys.stderr.write(res.oracle.dump())
    if args.dump_conditions:
        sys.stderr.write(dump_conditions(res.annotations))
    return res


def cmd_trim(args) -> int:
    cfg = _trim_config(args)
    if args.batch:
        src = Path(args.batch)
        if not src.is_dir():
            raise UsageError(f"{src} is not a directory")
        dest = Path(args.output) if args.output else src / "trimmed"
        dest.mkdir(parents=True, exist_ok=True)
        for f in sorted(src.glob("*.imp")):
            res = _trim_one(str(f), cfg, args, dest / f.name, dest / (f.stem + ".report"))
            print(f"{f}: {res.report.count} assumes, {res.seconds * 1000:.2f} ms")
        return 0
    if len(args.files) != 1:
        raise UsageError("trim takes exactly one input file (or --batch DIR)")
    _trim_one(args.files[0], cfg, args, args.output, args.report)
    return 0


def cmd_run(args) -> int:
    prog = _load(args.file)
    cfg = _exec_config(args)
    decisions = tuple(int(d) for d in args.decisions.split(",") if d.strip()) if args.decisions else ()
    sigma = Valuation(_inputs(args.inputs))
    try:
        res = run(prog, sigma, decisions, cfg) if args.decisions is not None else explore(prog, sigma, cfg, max_paths=1).results[0]
    except (ValueError, IndexError) as e:
        raise UsageError(str(e) or "no terminating run within bounds") from None
    outcome = "inconclusive" if res.outcome is None else res.outcome.name.lower()
    print(f"outcome: {outcome}")
    if res.ret is not None:
        print(f"return: {res.ret}")
    print(f"decisions: {','.join(map(str, res.decisions))}")
    print(f"steps: {res.steps}")
    if res.reason:
        print(f"reason: {res.reason}")
    return 0


def cmd_explore(args) -> int:
    prog = _load(args.file)
    cfg = _exec_config(args)
    total, shapes = 0, set()
    for sigma in _valuations(prog, _inputs(args.inputs), _range(args.domain)):
        ex = explore(prog, sigma, cfg)
        total += ex.paths
        shapes.update((r.trace, r.decisions, r.outcome) for r in ex.results)
        counts = {}
        for r in ex.results:
            counts[r.outcome.name.lower()] = counts.get(r.outcome.name.lower(), 0) + 1
        parts = [f"{k}={counts[k]}" for k in ("ok", "fail", "pruned") if k in counts]
        if ex.inconclusive:
            parts.append(f"inconclusive={ex.inconclusive}")
        print(f"{sigma}: paths={ex.paths} {' '.join(parts)}")
    print(f"total paths: {total}")
    print(f"distinct paths: {len(shapes)}")
    return 0


def cmd_check(args) -> int:
    a, b = _load(args.original), _load(args.trimmed)
    pa, pb = a.proc(a.entry).params, b.proc(b.entry).params
    if pa != pb:
        raise UsageError(f"entry signatures differ: ({', '.join(pa)}) vs ({', '.join(pb)})")
    cfg = _exec_config(args)
    verdict = check_equi_safe(a, b, _valuations(a, _inputs(args.inputs), _range(args.domain)), cfg)
    print(f"verdict: {verdict.status}")
    print(f"checked inputs: {verdict.checked_inputs}")
    if verdict.inconclusive_inputs:
        print(f"inconclusive inputs: {verdict.inconclusive_inputs}")
    if verdict.sigma is not None:
        print(f"counterexample: {verdict.sigma}")
    if verdict.detail:
        print(f"detail: {verdict.detail}")
    return {"equi-safe": 0, "counterexample": 1}.get(verdict.status, 2)


def cmd_dump(args) -> int:
    prog = _load(args.file)
    res = trim_program(prog, _trim_config(args))
    what = args.what
    if what == "program":
        sys.stdout.write(print_program(prog))
    elif what == "split":
        sys.stdout.write(print_program(res.split))
    elif what == "aliases":
        sys.stdout.write(res.oracle.dump())
    elif what == "conditions":
        sys.stdout.write(dump_conditions(res.annotations))
    else:
        sys.stdout.write(res.report.text(res.seconds * 1000))
    return 0


def _add_trim_options(p):
    p.add_argument("--preset", choices=sorted(PRESETS), default="trim")
    p.add_argument("--mc", help="maximum conjuncts per assume, or 'inf'")
    p.add_argument("--qe", choices=("full", "nondet"))
    p.add_argument("--place", help="L/P, L/P+C or a comma list of entry,calls,conds")
    p.add_argument("--int", choices=("math", "wrap32"))
    p.add_argument("--keep-trivial", metavar="BOOL")


def _add_exec_options(p):
    p.add_argument("--nondet", metavar="LO..HI", help="range of nondet() values (default -3..3)")
    p.add_argument("--fork-bound", type=int)
    p.add_argument("--int", choices=("math", "wrap32"))


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="trim", description="Safety-preserving program trimming.")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    t = sub.add_parser("trim", help="instrument a program with trimming assumes")
    t.add_argument("files", nargs="*")
    t.add_argument("-o", "--output", help="output file (directory with --batch)")
    t.add_argument("--report", help="write the report here instead of stderr")
    t.add_argument("--batch", metavar="DIR", help="trim every .imp file in DIR")
    t.add_argument("--dump-aliases", action="store_true")
    t.add_argument("--dump-conditions", action="store_true")
    _add_trim_options(t)
    t.set_defaults(func=cmd_trim)

    r = sub.add_parser("run", help="execute once")
    r.add_argument("file")
    r.add_argument("--inputs", metavar="K=V,...")
    r.add_argument("--decisions", metavar="D,...", help="explicit decision sequence (default: first path)")
    _add_exec_options(r)
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("explore", help="enumerate every bounded execution per input")
    e.add_argument("file")
    e.add_argument("--domain", default="-2..2", metavar="LO..HI", help="range of free entry parameters")
    e.add_argument("--inputs", metavar="K=V,...", help="fix some entry parameters")
    _add_exec_options(e)
    e.set_defaults(func=cmd_explore)

    c = sub.add_parser("check", help="check that TRIMMED is a trimmed counterpart of ORIGINAL")
    c.add_argument("original")
    c.add_argument("trimmed")
    c.add_argument("--domain", default="-2..2", metavar="LO..HI")
    c.add_argument("--inputs", metavar="K=V,...")
    _add_exec_options(c)
    c.set_defaults(func=cmd_check)

    d = sub.add_parser("dump", help="print an intermediate artifact")
    d.add_argument("what", choices=("program", "split", "aliases", "conditions", "report"))
    d.add_argument("file")
    _add_trim_options(d)
    d.set_defaults(func=cmd_dump)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        if args.command is None:
            raise UsageError("missing subcommand")
        return args.func(args)
    except UsageError as e:
        print(f"trim: {e}", file=sys.stderr)
        return EX_USAGE
    except ParseError as e:
        print(f"trim: {e}", file=sys.stderr)
        return EX_DATAERR
    except Exception as e:  # noqa: BLE001
        print(f"trim: internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EX_SOFTWARE


if __name__ == "__main__":
    sys.exit(main())
