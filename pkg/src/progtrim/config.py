"""Trimming configurations, named presets and the end-to-end pipeline."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .alias import build
from .engine import DEFAULT_DNF_CAP
from .inference import infer_program
from .instrument import PlacementStrategy, instrument, split_procedures
from .lang import Program

LP = PlacementStrategy(True, True, False)
LPC = PlacementStrategy(True, True, True)


@dataclass(frozen=True)
class TrimConfig:
    max_conjuncts: int | None = None  # None = unbounded
    qe: str = "full"  # "full" or "nondet"
    placement: PlacementStrategy = field(default=LPC)
    int_mode: str = "math"  # "math" or "wrap32"
    keep_trivial: bool = True
    dnf_cap: int = DEFAULT_DNF_CAP

    def __post_init__(self):
        if self.max_conjuncts is not None and self.max_conjuncts < 1:
            raise ValueError("max_conjuncts must be positive")
        if self.qe not in ("full", "nondet"):
            raise ValueError(f"unknown qe mode {self.qe!r}")
        if self.int_mode not in ("math", "wrap32"):
            raise ValueError(f"unknown int mode {self.int_mode!r}")


PRESETS = {
    "trim_LB": TrimConfig(4, "full", LP),
    "trim_B": TrimConfig(4, "full", LPC),
    "trim_NDB": TrimConfig(4, "nondet", LPC),
    "trim_L": TrimConfig(None, "full", LP),
    "trim": TrimConfig(None, "full", LPC),
    "trim_ND": TrimConfig(None, "nondet", LPC),
}


@dataclass(frozen=True)
class TrimResult:
    program: Program
    report: object
    split: Program
    annotations: object
    oracle: object
    seconds: float


def trim_program(prog: Program, cfg: TrimConfig = PRESETS["trim"]) -> TrimResult:
    start = time.perf_counter()
    split = split_procedures(prog)
    oracle = build(split)
    ann = infer_program(split, oracle, wrap32=cfg.int_mode == "wrap32")
    out, report = instrument(split, ann, cfg.placement, cfg.qe, cfg.max_conjuncts, cfg.dnf_cap, cfg.keep_trivial)
    return TrimResult(out, report, split, ann, oracle, time.perf_counter() - start)
