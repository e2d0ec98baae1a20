"""Closed-form right-hand sides.

A right-hand side (:class:`Rhs`) is a sum of :class:`Term` objects drawn from a
small family: constants, monomials in the state, Michaelis-Menten saturation
terms, polynomials in time and sinusoids in time. Restricting to this family
keeps the syntactic support of every equation exact and lets time-only
expressions be differentiated symbolically.

Text form (used by model files and the CLI)::

    rhs    := "0" | ["-"] term (("+" | "-") term)*
    term   := [number ["*"]] factor ("*" factor)*
            | [number ["*"]] var "/" "(" number "+" var ")"
    factor := var ["^" int] | "t" ["^" int]
            | "sin" "(" [["-"] number ["*"]] "t" [("+" | "-") number] ")"
    var    := "x_" int | species-name

``t`` always denotes time. A species literally named ``t`` can only be
referenced as ``x_<index>``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ParseError

CONSTANT = "constant"
MONOMIAL = "monomial"
MICHAELIS_MENTEN = "michaelis_menten"
TIME_POLY = "time_poly"
TIME_SIN = "time_sin"

KINDS = (CONSTANT, MONOMIAL, MICHAELIS_MENTEN, TIME_POLY, TIME_SIN)
TIME_KINDS = (CONSTANT, TIME_POLY, TIME_SIN)


@dataclass(frozen=True)
class Term:
    """One summand of a right-hand side.

    Values by kind:

    * ``constant``: ``coefficient``
    * ``monomial``: ``coefficient * prod(x[i] ** a for i, a in exponents)``
    * ``michaelis_menten``: ``coefficient * x[index] / (c2 + x[index])``;
      the coefficient plays the role of the maximal rate c1
    * ``time_poly``: ``coefficient * t ** power``
    * ``time_sin``: ``coefficient * sin(omega * t + phase)``

    Use the classmethod constructors rather than the raw initializer.
    """

    kind: str
    coefficient: float
    exponents: tuple[tuple[int, int], ...] = ()
    index: int = -1
    c2: float = 0.0
    power: int = 0
    omega: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown term kind {self.kind!r}")
        if not math.isfinite(self.coefficient):
            raise ValueError("term coefficient must be finite")
        if self.kind == MONOMIAL:
            if not self.exponents:
                raise ValueError("monomial needs at least one variable; use a constant")
            seen = set()
            for i, a in self.exponents:
                if i < 0 or a < 1 or i in seen:
                    raise ValueError(f"invalid monomial exponents {self.exponents}")
                seen.add(i)
            if list(self.exponents) != sorted(self.exponents):
                raise ValueError("monomial exponents must be sorted by variable index")
        if self.kind == MICHAELIS_MENTEN:
            if self.index < 0:
                raise ValueError("Michaelis-Menten term needs a variable index")
            if not (math.isfinite(self.c2) and self.c2 > 0):
                raise ValueError("Michaelis-Menten constant c2 must be positive")
        if self.kind == TIME_POLY and self.power < 0:
            raise ValueError("time polynomial power must be >= 0")
        if self.kind == TIME_SIN and not (math.isfinite(self.omega) and math.isfinite(self.phase)):
            raise ValueError("sinusoid parameters must be finite")

    @classmethod
    def constant(cls, coefficient):
        return cls(CONSTANT, float(coefficient))

    @classmethod
    def monomial(cls, coefficient, exponents: Mapping[int, int]):
        """Monomial term; an empty exponent map yields a constant."""
        exps = tuple(sorted((int(i), int(a)) for i, a in exponents.items() if a != 0))
        if not exps:
            return cls.constant(coefficient)
        return cls(MONOMIAL, float(coefficient), exponents=exps)

    @classmethod
    def michaelis_menten(cls, c1, index, c2):
        return cls(MICHAELIS_MENTEN, float(c1), index=int(index), c2=float(c2))

    @classmethod
    def time_poly(cls, coefficient, power):
        return cls(TIME_POLY, float(coefficient), power=int(power))

    @classmethod
    def time_sin(cls, coefficient, omega=1.0, phase=0.0):
        return cls(TIME_SIN, float(coefficient), omega=float(omega), phase=float(phase))

    @property
    def support(self) -> frozenset[int]:
        if self.kind == MONOMIAL:
            return frozenset(i for i, _ in self.exponents)
        if self.kind == MICHAELIS_MENTEN:
            return frozenset((self.index,))
        return frozenset()

    @property
    def time_only(self) -> bool:
        return self.kind in TIME_KINDS

    def with_coefficient(self, coefficient) -> Term:
        return Term(self.kind, float(coefficient), self.exponents, self.index,
                    self.c2, self.power, self.omega, self.phase)

    def value(self, x, t):
        """Evaluate at state ``x`` (last axis indexes components) and time ``t``.

        Constant and time terms return a scalar that broadcasts against the
        batch shape of ``x``.
        """
        kind = self.kind
        if kind == CONSTANT:
            return self.coefficient
        if kind == MONOMIAL:
            v = self.coefficient
            for i, a in self.exponents:
                xi = x[..., i]
                for _ in range(a):
                    v = v * xi
            return v
        if kind == MICHAELIS_MENTEN:
            xi = x[..., self.index]
            denom = self.c2 + xi
            if np.any(denom <= 0):
                raise FloatingPointError(
                    f"Michaelis-Menten denominator c2 + x_{self.index} <= 0 "
                    f"(negative state {np.min(xi)!r})"
                )
            return self.coefficient * xi / denom
        if kind == TIME_POLY:
            v = self.coefficient
            for _ in range(self.power):
                v = v * t
            return v
        return self.coefficient * np.sin(self.omega * t + self.phase)

    def time_derivative(self) -> Term | None:
        """d/dt of a time-only term, or ``None`` when it vanishes."""
        if self.kind == CONSTANT:
            return None
        if self.kind == TIME_POLY:
            if self.power == 0:
                return None
            return Term.time_poly(self.coefficient * self.power, self.power - 1)
        if self.kind == TIME_SIN:
            # d/dt c sin(wt + phi) = c w sin(wt + phi + pi/2)
            if self.coefficient * self.omega == 0:
                return None
            return Term.time_sin(self.coefficient * self.omega, self.omega,
                                 self.phase + math.pi / 2)
        raise ValueError(f"{self.kind} term depends on the state; no time derivative")

    def remap(self, mapping: Mapping[int, int]) -> Term:
        """Rename variable indices."""
        if self.kind == MONOMIAL:
            return Term.monomial(self.coefficient,
                                 {mapping[i]: a for i, a in self.exponents})
        if self.kind == MICHAELIS_MENTEN:
            return Term.michaelis_menten(self.coefficient, mapping[self.index], self.c2)
        return self


@dataclass(frozen=True)
class Rhs:
    """A sum of terms. The empty sum is the zero function."""

    terms: tuple[Term, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        for term in self.terms:
            if not isinstance(term, Term):
                raise TypeError(f"expected Term, got {type(term).__name__}")

    @classmethod
    def zero(cls) -> Rhs:
        return cls(())

    @classmethod
    def const(cls, value) -> Rhs:
        return cls((Term.constant(value),))

    @property
    def support(self) -> frozenset[int]:
        out: set[int] = set()
        for term in self.terms:
            out |= term.support
        return frozenset(out)

    @property
    def time_only(self) -> bool:
        return all(term.time_only for term in self.terms)

    @property
    def depends_on_time(self) -> bool:
        return any(term.kind in (TIME_POLY, TIME_SIN) for term in self.terms)

    def __add__(self, other: Rhs) -> Rhs:
        return Rhs(self.terms + other.terms)

    def evaluate(self, x, t=0.0):
        """Sum of term values; returns an array of shape ``x.shape[:-1]``."""
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape[:-1])
        out[...] = self.accumulate(x, t)
        return out

    def accumulate(self, x: np.ndarray, t=0.0):
        """Unbroadcast sum of term values (a scalar when nothing depends on ``x``)."""
        acc = 0.0
        for n, term in enumerate(self.terms):
            v = term.value(x, t)
            acc = v if n == 0 else acc + v
        return acc

    def time_derivative(self) -> Rhs:
        if not self.time_only:
            raise ValueError("only time-only expressions can be differentiated in time")
        out = [d for d in (term.time_derivative() for term in self.terms) if d is not None]
        return Rhs(tuple(out))

    def remap(self, mapping: Mapping[int, int]) -> Rhs:
        return Rhs(tuple(term.remap(mapping) for term in self.terms))

    def to_text(self, names: Sequence[str] | None = None) -> str:
        return format_rhs(self, names)


# ---------------------------------------------------------------------------
# Text form

def _num(value: float) -> str:
    return repr(float(value))


def _var(i: int, names: Sequence[str] | None) -> str:
    return names[i] if names is not None else f"x_{i}"


def _format_term_abs(term: Term, names) -> str:
    c = _num(abs(term.coefficient))
    if term.kind == CONSTANT:
        return c
    if term.kind == MONOMIAL:
        factors = " * ".join(f"{_var(i, names)}^{a}" for i, a in term.exponents)
        return f"{c} * {factors}"
    if term.kind == MICHAELIS_MENTEN:
        v = _var(term.index, names)
        return f"{c} * {v} / ({_num(term.c2)} + {v})"
    if term.kind == TIME_POLY:
        return f"{c} * t^{term.power}"
    sign = "-" if math.copysign(1.0, term.phase) < 0 else "+"
    return f"{c} * sin({_num(term.omega)} * t {sign} {_num(abs(term.phase))})"


def _negative(value: float) -> bool:
    return math.copysign(1.0, value) < 0


def format_rhs(rhs: Rhs, names: Sequence[str] | None = None) -> str:
    """Canonical text of ``rhs``; exact inverse of :func:`parse_rhs`.

    With ``names`` given, variables are written by name instead of ``x_i``.
    """
    if not rhs.terms:
        return "0"
    parts = []
    for k, term in enumerate(rhs.terms):
        body = _format_term_abs(term, names)
        neg = _negative(term.coefficient)
        if k == 0:
            parts.append(f"-{body}" if neg else body)
        else:
            parts.append(f" - {body}" if neg else f" + {body}")
    return "".join(parts)


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()]))"
)
_XVAR_RE = re.compile(r"x_(\d+)\Z")


class _Tokens:
    def __init__(self, text: str, line=None):
        self.items: list[tuple[str, str, int]] = []
        self.line = line
        pos = 0
        text = text.rstrip()
        while pos < len(text):
            m = _TOKEN_RE.match(text, pos)
            if not m or m.end() == pos:
                col = pos + 1 + (len(text[pos:]) - len(text[pos:].lstrip()))
                raise ParseError(f"unexpected character {text[col - 1]!r}", line, col)
            kind = m.lastgroup
            self.items.append((kind, m.group(kind), m.start(kind) + 1))
            pos = m.end()
        self.pos = 0

    def peek(self, offset=0):
        i = self.pos + offset
        return self.items[i] if i < len(self.items) else (None, None, None)

    def next(self):
        tok = self.peek()
        if tok[0] is None:
            raise ParseError("unexpected end of expression", self.line)
        self.pos += 1
        return tok

    def expect(self, value):
        kind, text, col = self.next()
        if text != value:
            raise ParseError(f"expected {value!r}, found {text!r}", self.line, col)

    def accept(self, value) -> bool:
        if self.peek()[1] == value:
            self.pos += 1
            return True
        return False

    def number(self) -> float:
        kind, text, col = self.next()
        if kind != "num":
            raise ParseError(f"expected a number, found {text!r}", self.line, col)
        return float(text)

    def signed_number(self) -> float:
        if self.accept("-"):
            return -self.number()
        self.accept("+")
        return self.number()

    def integer(self) -> int:
        kind, text, col = self.next()
        if kind != "num" or not text.isdigit():
            raise ParseError(f"expected an integer, found {text!r}", self.line, col)
        return int(text)


def _resolve_var(name: str, col: int, names_index, d, line) -> int:
    if names_index is not None and name in names_index:
        return names_index[name]
    m = _XVAR_RE.match(name)
    if m:
        i = int(m.group(1))
        if d is not None and i >= d:
            raise ParseError(f"variable {name} out of range (d={d})", line, col)
        return i
    known = f"; known: {', '.join(names_index)}" if names_index else ""
    raise ParseError(f"unknown variable {name!r}{known}", line, col)


def _parse_term(tok: _Tokens, sign: float, names_index, d, line) -> Term:
    coefficient = sign
    kind, text, col = tok.peek()
    if kind == "num":
        coefficient = sign * tok.number()
        if not tok.accept("*"):
            nxt = tok.peek()
            if nxt[0] is None or nxt[1] in ("+", "-", ")"):
                return Term.constant(coefficient)
    exps: dict[int, int] = {}
    time_power = None
    sinus = None
    mm = None
    while True:
        kind, text, col = tok.next()
        if kind != "ident":
            raise ParseError(f"expected a variable, 't' or 'sin', found {text!r}", line, col)
        if text == "sin" and tok.peek()[1] == "(":
            tok.expect("(")
            omega = 1.0
            if tok.peek()[0] == "num" or tok.peek()[1] == "-":
                omega = tok.signed_number()
                tok.accept("*")
            kind2, text2, col2 = tok.next()
            if text2 != "t":
                raise ParseError("sin() argument must be linear in t", line, col2)
            phase = 0.0
            if tok.peek()[1] in ("+", "-"):
                phase = -tok.number() if tok.next()[1] == "-" else tok.number()
            tok.expect(")")
            if sinus is not None:
                raise ParseError("at most one sin() factor per term", line, col)
            sinus = (omega, phase)
        elif text == "t":
            p = 1
            if tok.accept("^"):
                p = tok.integer()
            time_power = (time_power or 0) + p
        else:
            i = _resolve_var(text, col, names_index, d, line)
            a = 1
            if tok.accept("^"):
                a = tok.integer()
                if a < 1:
                    raise ParseError("exponents must be >= 1", line, col)
            if tok.peek()[1] == "/":
                tok.next()
                tok.expect("(")
                c2 = tok.number()
                tok.expect("+")
                _, text3, col3 = tok.next()
                j = _resolve_var(text3, col3, names_index, d, line)
                tok.expect(")")
                if j != i or a != 1:
                    raise ParseError("Michaelis-Menten form is c * x / (c2 + x)", line, col3)
                if c2 <= 0:
                    raise ParseError("Michaelis-Menten constant must be positive", line, col)
                mm = (i, c2)
            else:
                exps[i] = exps.get(i, 0) + a
        if not tok.accept("*"):
            break
    families = sum(bool(f) for f in (exps, time_power is not None, sinus, mm))
    if families > 1 or (mm and exps):
        raise ParseError("a term may not mix state, time and saturation factors", line, col)
    if mm:
        return Term.michaelis_menten(coefficient, mm[0], mm[1])
    if sinus:
        return Term.time_sin(coefficient, *sinus)
    if time_power is not None:
        return Term.time_poly(coefficient, time_power)
    return Term.monomial(coefficient, exps)


def parse_rhs(text: str, names: Sequence[str] | None = None, d: int | None = None,
              line: int | None = None) -> Rhs:
    """Parse the text form of a right-hand side.

    ``names`` enables species-name variables; ``d`` bounds ``x_i`` indices.
    """
    if d is None and names is not None:
        d = len(names)
    names_index = {n: i for i, n in enumerate(names)} if names is not None else None
    if text.strip() == "0":
        return Rhs.zero()
    tok = _Tokens(text, line)
    if not tok.items:
        raise ParseError("empty expression", line, 1)
    terms = []
    sign = 1.0
    if tok.accept("-"):
        sign = -1.0
    while True:
        terms.append(_parse_term(tok, sign, names_index, d, line))
        kind, text_, col = tok.peek()
        if kind is None:
            break
        if text_ == "+":
            sign = 1.0
        elif text_ == "-":
            sign = -1.0
        else:
            raise ParseError(f"unexpected {text_!r}", line, col)
        tok.next()
    return Rhs(tuple(terms))


def pretty_rhs(rhs: Rhs, names: Sequence[str]) -> str:
    """Compact human-readable form, e.g. ``0.1*[A] - 0.05*[A]*[B]``."""
    if not rhs.terms:
        return "0"
    out = []
    for k, term in enumerate(rhs.terms):
        c = abs(term.coefficient)
        cs = f"{c:g}"
        if term.kind == CONSTANT:
            body = cs
        elif term.kind == MONOMIAL:
            fs = "*".join(f"[{names[i]}]" + (f"^{a}" if a > 1 else "")
                          for i, a in term.exponents)
            body = fs if c == 1 else f"{cs}*{fs}"
        elif term.kind == MICHAELIS_MENTEN:
            v = f"[{names[term.index]}]"
            body = f"{cs}*{v}/({term.c2:g} + {v})"
        elif term.kind == TIME_POLY:
            tp = "t" if term.power == 1 else f"t^{term.power}"
            body = (tp if c == 1 else f"{cs}*{tp}") if term.power else cs
        else:
            body = f"{cs}*sin({term.omega:g}*t + {term.phase:g})"
        neg = _negative(term.coefficient)
        if k == 0:
            out.append(f"-{body}" if neg else body)
        else:
            out.append(f" - {body}" if neg else f" + {body}")
    return "".join(out)
