"""Point-in-time structural causal models.

Two forms share one data structure:

``deterministic``
    ``x^k := f^k(x^PA(k))``, possibly cyclic, solved to a single state; the
    per-variable ``noise_sd`` is then the standard deviation of additive
    measurement noise used by :func:`observe`.
``stochastic``
    ``X^k := f^k(X^PA(k)) + eps^k`` with independent ``eps^k ~ N(0, sd_k^2)``;
    must be acyclic and is sampled ancestrally.

Cyclic deterministic systems are solved by damped fixed-point iteration
``x <- (1 - a) x + a f(x)`` with ``a = 0.5``, starting from zero, stopping
when the largest update falls below ``1e-10``. This is one way of giving
cyclic assignments a solution; non-convergence is reported as a
:class:`SolvabilityError` rather than accepted.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from graphlib import CycleError, TopologicalSorter
from typing import Sequence

import numpy as np

from .errors import DatasetFormatError, ModelError, SolvabilityError
from .model import Graph
from .simulate import STREAM_NOISE, STREAM_SCM, rng_stream
from .terms import Rhs, Term

DAMPING = 0.5
TOL = 1e-10
MAX_ITER = 10_000

FORMS = ("deterministic", "stochastic")


@dataclass(frozen=True)
class StaticAssignment:
    target: int
    parents: frozenset[int]
    function: Rhs
    noise_sd: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "parents", frozenset(self.parents))
        if self.function.depends_on_time:
            raise ModelError("static assignments cannot depend on time")
        if not self.parents >= self.function.support:
            raise ModelError(f"assignment of x_{self.target} uses variables outside its parents")
        if not (math.isfinite(self.noise_sd) and self.noise_sd >= 0):
            raise ModelError("noise standard deviation must be finite and >= 0")


@dataclass(frozen=True)
class StaticScm:
    names: tuple[str, ...]
    assignments: tuple[StaticAssignment, ...]
    form: str = "stochastic"

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "assignments", tuple(self.assignments))
        if self.form not in FORMS:
            raise ModelError(f"form must be one of {FORMS}")
        d = len(self.names)
        if len(self.assignments) != d:
            raise ModelError("one assignment per variable required")
        for k, a in enumerate(self.assignments):
            if a.target != k:
                raise ModelError(f"assignment {k} targets x_{a.target}")
            if any(j < 0 or j >= d for j in a.parents):
                raise ModelError(f"parent index out of range for {self.names[k]}")
            if self.form == "deterministic" and k in a.parents:
                raise ModelError(f"{self.names[k]} cannot be its own parent")
        if self.form == "stochastic" and not self.is_acyclic():
            raise ModelError("stochastic SCMs must be acyclic")

    @property
    def d(self) -> int:
        return len(self.names)

    def index(self, key) -> int:
        if isinstance(key, (int, np.integer)):
            return int(key)
        try:
            return self.names.index(key)
        except ValueError:
            raise ModelError(f"unknown variable {key!r}") from None

    @property
    def graph(self) -> Graph:
        edges = frozenset((j, k) for k, a in enumerate(self.assignments) for j in a.parents)
        return Graph(self.d, edges, self.names)

    def topological_order(self) -> list[int]:
        ts = TopologicalSorter({k: a.parents for k, a in enumerate(self.assignments)})
        try:
            return list(ts.static_order())
        except CycleError as exc:
            raise SolvabilityError(f"cycle detected: {exc.args[1]}") from None

    def is_acyclic(self) -> bool:
        try:
            self.topological_order()
        except SolvabilityError:
            return False
        return True

    @property
    def sigmas(self) -> np.ndarray:
        return np.array([a.noise_sd for a in self.assignments])


def linear_scm(names: Sequence[str], weights: dict, intercepts=None, noise_sd=1.0,
               form: str = "stochastic") -> StaticScm:
    """Build a linear SCM from ``{(parent, child): weight}`` (names or indices)."""
    names = tuple(names)
    d = len(names)

    def idx(v):
        return names.index(v) if isinstance(v, str) else int(v)

    intercepts = np.broadcast_to(0.0 if intercepts is None else intercepts, (d,))
    sds = np.broadcast_to(noise_sd, (d,))
    terms: list[list] = [[] for _ in range(d)]
    for (p, c), w in weights.items():
        terms[idx(c)].append((idx(p), float(w)))
    assignments = []
    for k in range(d):
        ts = []
        if intercepts[k] != 0:
            ts.append(Term.constant(intercepts[k]))
        ts += [Term.monomial(w, {j: 1}) for j, w in sorted(terms[k])]
        rhs = Rhs(tuple(ts))
        assignments.append(StaticAssignment(k, rhs.support, rhs, float(sds[k])))
    return StaticScm(names, tuple(assignments), form)


def _evaluate_all(scm: StaticScm, x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    for k, a in enumerate(scm.assignments):
        out[..., k] = a.function.evaluate(x)
    return out


def solve_deterministic(scm: StaticScm, method: str = "auto") -> np.ndarray:
    """The state induced by the assignments (noise ignored).

    ``method`` is ``"topological"`` (acyclic only, exact), ``"fixed_point"``
    or ``"auto"`` (topological when acyclic).
    """
    if method not in ("auto", "topological", "fixed_point"):
        raise ValueError(f"unknown method {method!r}")
    if method == "auto":
        method = "topological" if scm.is_acyclic() else "fixed_point"
    x = np.zeros(scm.d)
    if method == "topological":
        for k in scm.topological_order():
            x[k] = scm.assignments[k].function.evaluate(x)
        return x
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(MAX_ITER):
            new = (1 - DAMPING) * x + DAMPING * _evaluate_all(scm, x)
            if not np.all(np.isfinite(new)):
                break
            step = np.max(np.abs(new - x))
            x = new
            if step < TOL:
                return x
    raise SolvabilityError("fixed-point iteration did not converge: "
                           "solvability assumption violated")


def observe(state, noise_sd, n: int, seed: int) -> np.ndarray:
    """``n`` noisy copies ``X^k = x^k + eps^k``; ``noise_sd`` scalar or per variable."""
    state = np.asarray(state, dtype=float)
    sd = np.broadcast_to(np.asarray(noise_sd, dtype=float), state.shape)
    if np.any(~np.isfinite(sd)) or np.any(sd < 0):
        raise ValueError("noise standard deviations must be finite and >= 0")
    z = rng_stream(seed, STREAM_NOISE).standard_normal((n, state.size))
    return state + z * sd


def sample_stochastic(scm: StaticScm, n: int, seed: int) -> np.ndarray:
    """Ancestral sampling of ``n`` i.i.d. rows; an ``(n, d)`` matrix."""
    if scm.form != "stochastic":
        raise ModelError("sample_stochastic needs a stochastic SCM")
    order = scm.topological_order()
    eps = rng_stream(seed, STREAM_SCM).standard_normal((n, scm.d)) * scm.sigmas
    x = np.zeros((n, scm.d))
    for k in order:
        x[:, k] = scm.assignments[k].function.evaluate(x) + eps[:, k]
    return x


def intervene_static(scm: StaticScm, target, value: float | None = None,
                     function: Rhs | None = None, parents=None,
                     noise_sd: float | None = None) -> StaticScm:
    """Replace the assignment of ``target``.

    ``value`` gives the hard intervention ``do(X := value)`` (constant, no
    noise). Otherwise ``function`` (plus optional extra ``parents`` and a new
    ``noise_sd``, default: keep) defines the new assignment.
    """
    k = scm.index(target)
    if (value is None) == (function is None):
        raise ValueError("give exactly one of value or function")
    if value is not None:
        new = StaticAssignment(k, frozenset(), Rhs.const(value), 0.0)
    else:
        extra = frozenset(scm.index(p) for p in (parents or ()))
        sd = scm.assignments[k].noise_sd if noise_sd is None else float(noise_sd)
        new = StaticAssignment(k, function.support | extra, function, sd)
    assignments = list(scm.assignments)
    assignments[k] = new
    out = replace(scm, assignments=tuple(assignments))
    if out.form == "deterministic" and not out.is_acyclic():
        solve_deterministic(out)
    return out


def samples_to_csv(names: Sequence[str], samples: np.ndarray, seed: int | None = None) -> str:
    """Sample matrix as CSV: optional ``# seed:`` line, a header of names, one row per draw."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[1] != len(names):
        raise ValueError(f"samples must be n x {len(names)}")
    buf = io.StringIO()
    if seed is not None:
        buf.write(f"# seed: {seed}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(names)
    for row in samples.tolist():
        writer.writerow([repr(v) for v in row])
    return buf.getvalue()


def samples_from_csv(text: str) -> tuple[tuple[str, ...], np.ndarray]:
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    if not rows:
        raise DatasetFormatError("missing header row")
    names = tuple(rows[0])
    out = []
    for lineno, cells in enumerate(rows[1:], start=2):
        if len(cells) != len(names):
            raise DatasetFormatError(f"row {lineno}: {len(cells)} cells, expected {len(names)}")
        try:
            out.append([float(c) for c in cells])
        except ValueError:
            raise DatasetFormatError(f"row {lineno}: non-numeric cell") from None
    return names, np.array(out, dtype=float).reshape(len(out), len(names))
