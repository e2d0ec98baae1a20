"""Reaction networks: a plain-text DSL and mass-action compilation.

DSL, one reaction per line, ``#`` starts a comment::

    line := side "->" side "@" ident "=" positive-real
    side := "0" | term ("+" term)*
    term := [integer] ident

plus an optional declaration line ``species: A, B, C`` that fixes species
order and introduces species that take part in no reaction. Without it,
species are indexed by first appearance.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from typing import Mapping

from .errors import ModelError, ParseError
from .terms import Rhs, Term

IDENT_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*\Z")


@dataclass(frozen=True)
class Species:
    name: str
    index: int


@dataclass(frozen=True)
class Reaction:
    """A single reaction ``sum m_i R_i -> sum n_j P_j`` with a named rate.

    ``reactants`` and ``products`` are tuples of ``(species index,
    stoichiometry)`` sorted by index.
    """

    reactants: tuple[tuple[int, int], ...]
    products: tuple[tuple[int, int], ...]
    rate_name: str
    rate_value: float

    def __post_init__(self):
        object.__setattr__(self, "reactants", _normalize_side(self.reactants))
        object.__setattr__(self, "products", _normalize_side(self.products))
        if not self.reactants and not self.products:
            raise ModelError("reaction has neither reactants nor products")
        if not IDENT_RE.match(self.rate_name):
            raise ModelError(f"invalid rate name {self.rate_name!r}")
        if not (math.isfinite(self.rate_value) and self.rate_value > 0):
            raise ModelError(f"rate {self.rate_name} must be positive and finite, "
                             f"got {self.rate_value!r}")

    def net(self, index: int) -> int:
        """Net stoichiometry (products minus reactants) of one species."""
        return dict(self.products).get(index, 0) - dict(self.reactants).get(index, 0)

    @property
    def species(self) -> frozenset[int]:
        return frozenset(i for i, _ in self.reactants) | frozenset(i for i, _ in self.products)


def _normalize_side(side) -> tuple[tuple[int, int], ...]:
    if isinstance(side, Mapping):
        side = side.items()
    pairs = tuple(sorted((int(i), int(m)) for i, m in side))
    seen = set()
    for i, m in pairs:
        if m < 1:
            raise ModelError(f"stoichiometry must be a positive integer, got {m}")
        if i in seen:
            raise ModelError(f"species index {i} listed twice on one side")
        seen.add(i)
    return pairs


@dataclass(frozen=True)
class ReactionNetwork:
    species: tuple[Species, ...]
    reactions: tuple[Reaction, ...]

    def __post_init__(self):
        object.__setattr__(self, "species", tuple(self.species))
        object.__setattr__(self, "reactions", tuple(self.reactions))
        if not self.species:
            raise ModelError("a network needs at least one species")
        names = set()
        for k, sp in enumerate(self.species):
            if sp.index != k:
                raise ModelError(f"species {sp.name} has index {sp.index}, expected {k}")
            if not IDENT_RE.match(sp.name):
                raise ModelError(f"invalid species name {sp.name!r}")
            if sp.name in names:
                raise ModelError(f"duplicate species {sp.name}")
            names.add(sp.name)
        rates: dict[str, float] = {}
        for r in self.reactions:
            for i in r.species:
                if i >= len(self.species):
                    raise ModelError(f"reaction references unknown species index {i}")
            if rates.setdefault(r.rate_name, r.rate_value) != r.rate_value:
                raise ModelError(f"rate {r.rate_name} bound to conflicting values")

    @classmethod
    def from_names(cls, names, reactions) -> ReactionNetwork:
        return cls(tuple(Species(n, i) for i, n in enumerate(names)), tuple(reactions))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(sp.name for sp in self.species)

    @property
    def rates(self) -> dict[str, float]:
        return {r.rate_name: r.rate_value for r in self.reactions}

    def index(self, name: str) -> int:
        for sp in self.species:
            if sp.name == name:
                return sp.index
        raise KeyError(name)

    def with_rate(self, rate_name: str, value: float) -> ReactionNetwork:
        if rate_name not in self.rates:
            raise ModelError(f"unknown rate {rate_name!r}; known: {', '.join(self.rates)}")
        reactions = tuple(replace(r, rate_value=float(value)) if r.rate_name == rate_name else r
                          for r in self.reactions)
        return ReactionNetwork(self.species, reactions)


# ---------------------------------------------------------------------------
# DSL

_REAL_RE = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?\Z")
_TERM_RE = re.compile(r"(?:(\d+)\s*)?([A-Za-z][A-Za-z0-9_]*)\Z")


def _parse_side(text: str, offset: int, lineno: int, order: dict[str, int],
                declared: bool) -> dict[int, int]:
    stripped = text.strip()
    lead = offset + len(text) - len(text.lstrip())
    if stripped == "0":
        return {}
    if not stripped:
        raise ParseError("empty reaction side (write 0 for nothing)", lineno, lead + 1)
    out: dict[int, int] = {}
    pos = offset
    for chunk in text.split("+"):
        col = pos + len(chunk) - len(chunk.lstrip()) + 1
        m = _TERM_RE.match(chunk.strip())
        if not m:
            raise ParseError(f"malformed species term {chunk.strip()!r}", lineno, col)
        count = int(m.group(1)) if m.group(1) is not None else 1
        if count == 0:
            raise ParseError("stoichiometry must be positive", lineno, col)
        name = m.group(2)
        if name not in order:
            if declared:
                raise ParseError(f"species {name} not declared", lineno, col)
            order[name] = len(order)
        i = order[name]
        out[i] = out.get(i, 0) + count
        pos += len(chunk) + 1
    return out


def parse_network(text: str) -> ReactionNetwork:
    """Parse the reaction DSL. Raises :class:`ParseError` with line/column."""
    order: dict[str, int] = {}
    declared = False
    rates: dict[str, float] = {}
    reactions = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        if line.lstrip().startswith("species:"):
            if declared or order:
                raise ParseError("species declaration must come first and only once", lineno, 1)
            body = line.split(":", 1)[1]
            for name in (n.strip() for n in body.split(",")):
                if not IDENT_RE.match(name) or name in order:
                    raise ParseError(f"bad species name {name!r} in declaration", lineno, 1)
                order[name] = len(order)
            declared = True
            continue
        arrow = line.find("->")
        if arrow < 0:
            raise ParseError("expected '->'", lineno, len(line) + 1)
        at = line.find("@", arrow)
        if at < 0:
            raise ParseError("expected '@ rate = value'", lineno, len(line) + 1)
        lhs = _parse_side(line[:arrow], 0, lineno, order, declared)
        rhs = _parse_side(line[arrow + 2:at], arrow + 2, lineno, order, declared)
        rate_part = line[at + 1:]
        if "=" not in rate_part:
            raise ParseError("expected '=' after rate name", lineno, len(line) + 1)
        name, value_text = (s.strip() for s in rate_part.split("=", 1))
        eq = at + 1 + rate_part.index("=")
        ncol = at + 2 + (len(rate_part) - len(rate_part.lstrip()))
        vcol = eq + 2 + (len(line[eq + 1:]) - len(line[eq + 1:].lstrip()))
        if not IDENT_RE.match(name):
            raise ParseError(f"invalid rate name {name!r}", lineno, ncol)
        if not _REAL_RE.match(value_text):
            raise ParseError(f"invalid rate value {value_text!r}", lineno, vcol)
        value = float(value_text)
        if not (math.isfinite(value) and value > 0):
            raise ParseError(f"rate {name} must be positive, got {value_text}", lineno, vcol)
        if name in rates and rates[name] != value:
            raise ParseError(f"rate {name} redeclared with a different value "
                             f"({rates[name]!r} vs {value!r})", lineno, ncol)
        rates[name] = value
        if not lhs and not rhs:
            raise ParseError("reaction with nothing on either side", lineno, 1)
        reactions.append(Reaction(tuple(lhs.items()), tuple(rhs.items()), name, value))
    if not order:
        raise ParseError("no species found (empty network)", 1, 1)
    return ReactionNetwork.from_names(list(order), reactions)


def _format_side(side, names) -> str:
    if not side:
        return "0"
    return " + ".join(f"{m} {names[i]}" if m != 1 else names[i] for i, m in side)


def _first_appearance(net: ReactionNetwork) -> list[int]:
    seen: list[int] = []
    for r in net.reactions:
        for i, _ in r.reactants + r.products:
            if i not in seen:
                seen.append(i)
    return seen


def format_network(net: ReactionNetwork) -> str:
    """Canonical DSL text; ``parse_network(format_network(net)) == net``."""
    names = net.names
    lines = []
    if _first_appearance(net) != list(range(len(names))):
        lines.append("species: " + ", ".join(names))
    for r in net.reactions:
        lines.append(f"{_format_side(r.reactants, names)} -> {_format_side(r.products, names)}"
                     f" @ {r.rate_name} = {r.rate_value!r}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Mass action

def reaction_terms(net: ReactionNetwork) -> list[list[tuple[Reaction, int, Term]]]:
    """Per species, the (reaction, net stoichiometry, term) contributions.

    A species gains ``net * k * prod x_i^m_i`` from each reaction with nonzero
    net stoichiometry; reactions are kept as separate terms in file order.
    """
    out: list[list[tuple[Reaction, int, Term]]] = [[] for _ in net.species]
    for r in net.reactions:
        for s in range(len(net.species)):
            n = r.net(s)
            if n == 0:
                continue
            term = Term.monomial(n * r.rate_value, dict(r.reactants))
            out[s].append((r, n, term))
    return out


def mass_action_drifts(net: ReactionNetwork) -> list[Rhs]:
    return [Rhs(tuple(t for _, _, t in contrib)) for contrib in reaction_terms(net)]


def compile_mass_action(net: ReactionNetwork):
    """Compile ``net`` to a :class:`~causalkinetics.model.KineticModel`.

    Initial values are left unset. The network is kept on the model so that
    rate interventions can be applied later.
    """
    from .model import KineticModel

    drifts = mass_action_drifts(net)
    return KineticModel(
        names=net.names,
        drift=tuple(drifts),
        parents=tuple(rhs.support for rhs in drifts),
        network=net,
    )


def set_rate_effect(net: ReactionNetwork, rate_name: str) -> list[int]:
    """Species whose ODE changes when ``rate_name`` is changed."""
    hit = [r for r in net.reactions if r.rate_name == rate_name]
    if not hit:
        raise ModelError(f"unknown rate {rate_name!r}; known: {', '.join(net.rates)}")
    return sorted({s for r in hit for s in r.species if r.net(s) != 0})
