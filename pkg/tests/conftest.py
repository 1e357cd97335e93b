from pathlib import Path

import pytest

from progtrim.lang import Assume, BinOp, Cmp, Const, Drf, Var
from progtrim.parser import parse

DATA = Path(__file__).parent / "data"
NAMES = ("x", "y", "z", "a", "b", "m", "n", "t", "p", "q")


def load(name: str):
    path = DATA / name
    return parse(path.read_text(), str(path))


def P(text: str):
    """Quantifier-free predicate written in the object language."""
    prog = parse(f"proc h({', '.join(NAMES)}) : r {{ assume {text}; }}")
    (stmt,) = prog.proc("h").body.stmts
    assert isinstance(stmt, Assume)
    return stmt.pred


def v(name):
    return Var(name)


def c(k):
    return Const(k)


def drf(t):
    return Drf(Var(t) if isinstance(t, str) else t)


def eq(a, b):
    return Cmp("=", a, b)


def add(a, b):
    return BinOp("+", a, b)


@pytest.fixture
def data_dir():
    return DATA
