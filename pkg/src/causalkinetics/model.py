"""Causal kinetic models and their graphs."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import ModelError
from .reactions import IDENT_RE, ReactionNetwork, reaction_terms
from .terms import Rhs, pretty_rhs


class ParentSetWarning(UserWarning):
    """Declared parents did not cover the syntactic support and were widened."""


@dataclass(frozen=True)
class Graph:
    """Directed graph with an edge ``(j, k)`` for every ``j`` in ``PA(k)``."""

    d: int
    edges: frozenset[tuple[int, int]]
    names: tuple[str, ...] = ()

    def sorted_edges(self) -> list[tuple[int, int]]:
        # order: by child, then by parent
        return sorted(self.edges, key=lambda e: (e[1], e[0]))

    def parents(self, k: int) -> frozenset[int]:
        return frozenset(j for j, c in self.edges if c == k)

    def children(self, j: int) -> frozenset[int]:
        return frozenset(c for p, c in self.edges if p == j)

    def descendants(self, j: int) -> frozenset[int]:
        """Nodes reachable from ``j`` by a directed path of length >= 1."""
        out: set[int] = set()
        stack = list(self.children(j))
        while stack:
            k = stack.pop()
            if k not in out:
                out.add(k)
                stack.extend(self.children(k))
        return frozenset(out)

    def edge_lines(self) -> list[str]:
        names = self.names or tuple(f"x_{i}" for i in range(self.d))
        return [f"{names[j]} -> {names[k]}" for j, k in self.sorted_edges()]


@dataclass(frozen=True)
class KineticModel:
    """A deterministic (``diffusion is None``) or stochastic causal kinetic model.

    ``initial`` holds one value per component, ``None`` marking an unset
    value; the whole field may be ``None`` when nothing is set. ``network``
    is the reaction network the model was compiled from, if any; it is what
    rate interventions edit.
    """

    names: tuple[str, ...]
    drift: tuple[Rhs, ...]
    parents: tuple[frozenset[int], ...]
    initial: tuple[float | None, ...] | None = None
    diffusion: tuple[Rhs, ...] | None = None
    network: ReactionNetwork | None = field(default=None, compare=True)

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "drift", tuple(self.drift))
        object.__setattr__(self, "parents", tuple(frozenset(p) for p in self.parents))
        d = len(self.names)
        if d == 0:
            raise ModelError("model needs at least one component")
        if len(set(self.names)) != d or not all(IDENT_RE.match(n) for n in self.names):
            raise ModelError(f"component names must be unique identifiers: {self.names}")
        if len(self.drift) != d or len(self.parents) != d:
            raise ModelError("drift and parents must have one entry per component")
        if self.initial is not None:
            init = tuple(None if v is None else float(v) for v in self.initial)
            if len(init) != d:
                raise ModelError("initial values must have one entry per component")
            for name, v in zip(self.names, init):
                if v is not None and not math.isfinite(v):
                    raise ModelError(f"initial value of {name} is not finite")
            if all(v is None for v in init):
                init = None
            object.__setattr__(self, "initial", init)
        if self.diffusion is not None:
            object.__setattr__(self, "diffusion", tuple(self.diffusion))
            if len(self.diffusion) != d:
                raise ModelError("diffusion must be given for all components or none")
        for k in range(d):
            if any(j < 0 or j >= d for j in self.parents[k]):
                raise ModelError(f"parent index out of range for {self.names[k]}")
            for rhs in self._rhs_of(k):
                if any(j >= d for j in rhs.support):
                    raise ModelError(f"equation of {self.names[k]} references x_j with j >= d")
                if not self.parents[k] >= rhs.support:
                    raise ModelError(f"parents of {self.names[k]} do not cover the "
                                     f"variables its equation uses")

    def _rhs_of(self, k):
        if self.diffusion is None:
            return (self.drift[k],)
        return (self.drift[k], self.diffusion[k])

    @property
    def d(self) -> int:
        return len(self.names)

    @property
    def stochastic(self) -> bool:
        return self.diffusion is not None

    def index(self, name_or_index) -> int:
        if isinstance(name_or_index, (int, np.integer)):
            k = int(name_or_index)
            if not 0 <= k < self.d:
                raise ModelError(f"component index {k} out of range (d={self.d})")
            return k
        try:
            return self.names.index(name_or_index)
        except ValueError:
            raise ModelError(f"unknown component {name_or_index!r}; "
                             f"known: {', '.join(self.names)}") from None

    def initial_array(self) -> np.ndarray:
        if self.initial is None or any(v is None for v in self.initial):
            missing = [n for n, v in zip(self.names, self.initial or [None] * self.d) if v is None]
            raise ModelError(f"initial values not set for: {', '.join(missing)}")
        return np.array(self.initial, dtype=float)

    def with_initial(self, values) -> KineticModel:
        """Copy with initial values; ``values`` is a sequence or a name->value mapping."""
        if isinstance(values, dict):
            init = list(self.initial or [None] * self.d)
            for key, v in values.items():
                init[self.index(key)] = v
            values = init
        return replace(self, initial=tuple(values))

    def drift_eval(self, x: np.ndarray, t: float) -> np.ndarray:
        """Drift at a batch of states ``x`` of shape ``(..., d)``."""
        out = np.empty(np.shape(x), dtype=float)
        for k, rhs in enumerate(self.drift):
            out[..., k] = rhs.accumulate(x, t)
        return out

    def diffusion_eval(self, x: np.ndarray, t: float) -> np.ndarray:
        if self.diffusion is None:
            raise ModelError("model has no diffusion terms")
        out = np.empty(np.shape(x), dtype=float)
        for k, rhs in enumerate(self.diffusion):
            out[..., k] = rhs.accumulate(x, t)
        return out

    def equations(self) -> list[str]:
        """Human-readable equations, one line per component plus initial values.

        Components whose drift is still the mass-action drift of ``network``
        are written symbolically in the rate names.
        """
        symbolic = _symbolic_drifts(self)
        lines = []
        for k, name in enumerate(self.names):
            rhs = symbolic[k] if symbolic[k] is not None else pretty_rhs(self.drift[k], self.names)
            lines.append(f"d[{name}]/dt = {rhs}")
            if self.diffusion is not None:
                lines.append(f"  diffusion[{name}] = {pretty_rhs(self.diffusion[k], self.names)}")
        if self.initial is not None:
            init = ", ".join(f"[{n}]_0 = {v!r}" for n, v in zip(self.names, self.initial)
                             if v is not None)
            lines.append("initial: " + init)
        return lines


def _symbolic_drifts(model: KineticModel) -> list[str | None]:
    out: list[str | None] = [None] * model.d
    net = model.network
    if net is None or net.names != model.names:
        return out
    contributions = reaction_terms(net)
    for k in range(model.d):
        if Rhs(tuple(t for _, _, t in contributions[k])) != model.drift[k]:
            continue
        parts = []
        for r, n, _ in contributions[k]:
            factors = "".join(f"[{net.names[i]}]" + (f"^{m}" if m > 1 else "")
                              for i, m in r.reactants)
            mag = abs(n)
            body = (f"{mag}*" if mag != 1 else "") + r.rate_name + factors
            if not parts:
                parts.append(f"-{body}" if n < 0 else body)
            else:
                parts.append(f" - {body}" if n < 0 else f" + {body}")
        out[k] = "".join(parts) if parts else "0"
    return out


def build_kinetic_model(drifts: Sequence[Rhs], parents: Sequence, initial=None,
                        diffusions: Sequence[Rhs] | None = None, names=None,
                        strict: bool = False, network: ReactionNetwork | None = None
                        ) -> KineticModel:
    """Validate and assemble a kinetic model.

    Declared parent sets that miss variables used by an equation are widened
    with a :class:`ParentSetWarning`, or rejected when ``strict`` is set.
    ``parents`` entries may hold indices or component names.
    """
    d = len(drifts)
    if names is None:
        names = tuple(f"x{k}" for k in range(d))
    names = tuple(names)
    if len(parents) != d or len(names) != d:
        raise ModelError(f"dimension mismatch: {d} drifts, {len(parents)} parent sets, "
                         f"{len(names)} names")
    if diffusions is not None and len(diffusions) != d:
        raise ModelError("diffusion must be given for all components or none")
    lookup = {n: i for i, n in enumerate(names)}
    widened = []
    for k in range(d):
        declared = frozenset(lookup[p] if isinstance(p, str) else int(p) for p in parents[k])
        support = drifts[k].support
        if diffusions is not None:
            support = support | diffusions[k].support
        missing = support - declared
        if missing:
            miss = ", ".join(names[j] for j in sorted(missing))
            if strict:
                raise ModelError(f"equation of {names[k]} uses {miss}, which are not "
                                 f"declared parents")
            warnings.warn(f"parents of {names[k]} widened to include {miss}",
                          ParentSetWarning, stacklevel=2)
        widened.append(declared | support)
    return KineticModel(names=names, drift=tuple(drifts), parents=tuple(widened),
                        initial=None if initial is None else tuple(initial),
                        diffusion=None if diffusions is None else tuple(diffusions),
                        network=network)


def causal_graph(model: KineticModel) -> Graph:
    edges = frozenset((j, k) for k in range(model.d) for j in model.parents[k])
    return Graph(model.d, edges, model.names)


def rhs_eval(model: KineticModel, state, t: float = 0.0) -> np.ndarray:
    """Drift vector at a single state.

    Raises ``FloatingPointError`` if a Michaelis-Menten denominator is not
    positive at this state.
    """
    x = np.asarray(state, dtype=float)
    if x.shape != (model.d,):
        raise ModelError(f"state must have shape ({model.d},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ModelError("state must be finite")
    return model.drift_eval(x[None, :], t)[0]
