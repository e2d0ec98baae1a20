"""Interventions on kinetic models.

Every intervention replaces part of one component's specification: its
initial value, its differential equation, or both. Rate interventions edit
the reaction network a model was compiled from and rewrite the equations
of every species whose net stoichiometry in the edited reactions is
nonzero.

Interventions also have a one-line directive form, shared by the CLI and
the dataset files::

    set-initial B 2
    set-rate k1 0.05
    clamp C 0.3
    force C 0.3 gain 5
    traj C "sin(1*t+0)"
    replace-ode C "0.5 * A^1" [diffusion "0.1"]
"""

from __future__ import annotations

import math
import shlex
from dataclasses import dataclass, replace
from typing import Iterable, Union

from .errors import ModelError, ParseError
from .model import KineticModel
from .reactions import mass_action_drifts, set_rate_effect
from .terms import Rhs, Term, format_rhs, parse_rhs

Target = Union[int, str]


@dataclass(frozen=True)
class SetInitial:
    target: Target
    value: float


@dataclass(frozen=True)
class ReplaceOde:
    """``do(dx^k := g(x^PA))``; ``parents`` may add declared parents beyond the support.

    For stochastic models ``diffusion=None`` keeps the current diffusion term.
    """

    target: Target
    rhs: Rhs
    diffusion: Rhs | None = None
    parents: tuple[Target, ...] = ()


@dataclass(frozen=True)
class SetRate:
    rate_name: str
    value: float


@dataclass(frozen=True)
class Clamp:
    """Hold a component at ``value``: zero dynamics plus a fixed initial value."""

    target: Target
    value: float


@dataclass(frozen=True)
class Forcing:
    """``dx^k := gain * (value - x^k)``, pulling the component toward ``value``."""

    target: Target
    value: float
    gain: float

    def __post_init__(self):
        if not (math.isfinite(self.gain) and self.gain > 0):
            raise ModelError(f"forcing gain must be positive, got {self.gain!r}")


@dataclass(frozen=True)
class SetTrajectory:
    """Prescribe ``x^k_t := zeta(t)`` for a time-only closed-form ``zeta``.

    Realized as ``dx^k := dzeta/dt`` with ``x^k_0 := zeta(t0)``; ``t0`` is the
    time at which simulations start.
    """

    target: Target
    zeta: Rhs
    t0: float = 0.0

    def __post_init__(self):
        if not self.zeta.time_only:
            raise ModelError("trajectory interventions need a time-only expression "
                             "(constants, t^p, sin(w t + phi))")


Intervention = Union[SetInitial, ReplaceOde, SetRate, Clamp, Forcing, SetTrajectory]

_INITIAL = "initial"
_DYNAMICS = "dynamics"


def _touches(iv: Intervention, model: KineticModel) -> list[tuple]:
    if isinstance(iv, SetRate):
        return [("rate", iv.rate_name)]
    k = model.index(iv.target)
    if isinstance(iv, SetInitial):
        return [(k, _INITIAL)]
    if isinstance(iv, (ReplaceOde, Forcing)):
        return [(k, _DYNAMICS)]
    return [(k, _INITIAL), (k, _DYNAMICS)]


def _replace_component(model: KineticModel, k: int, drift: Rhs | None = None,
                       diffusion: Rhs | None = None, initial=None,
                       extra_parents: Iterable[int] = ()) -> KineticModel:
    drifts = list(model.drift)
    diffs = None if model.diffusion is None else list(model.diffusion)
    parents = list(model.parents)
    if drift is not None:
        drifts[k] = drift
        if diffs is not None and diffusion is not None:
            diffs[k] = diffusion
        support = drifts[k].support | (diffs[k].support if diffs is not None else frozenset())
        parents[k] = support | frozenset(extra_parents)
    inits = model.initial
    if initial is not None:
        inits = list(model.initial or [None] * model.d)
        inits[k] = float(initial)
        inits = tuple(inits)
    return replace(model, drift=tuple(drifts), parents=tuple(parents), initial=inits,
                   diffusion=None if diffs is None else tuple(diffs))


def _apply_set_rate(model: KineticModel, iv: SetRate) -> KineticModel:
    net = model.network
    if net is None:
        raise ModelError("set-rate needs a model compiled from a reaction network")
    if not (math.isfinite(iv.value) and iv.value > 0):
        raise ModelError(f"rate must be positive and finite, got {iv.value!r}")
    affected = set_rate_effect(net, iv.rate_name)
    new_net = net.with_rate(iv.rate_name, iv.value)
    old = mass_action_drifts(net)
    new = mass_action_drifts(new_net)
    drifts = list(model.drift)
    parents = list(model.parents)
    for k in affected:
        # a component whose equation was replaced no longer follows the reactions
        if drifts[k] == old[k]:
            drifts[k] = new[k]
            parents[k] = model.parents[k] - old[k].support | new[k].support
    return replace(model, drift=tuple(drifts), parents=tuple(parents), network=new_net)


def apply_intervention(model: KineticModel, iv: Intervention) -> KineticModel:
    """Return a new model with ``iv`` applied; ``model`` is left untouched."""
    if isinstance(iv, SetRate):
        return _apply_set_rate(model, iv)
    k = model.index(iv.target)
    zero_noise = Rhs.zero() if model.stochastic else None
    if isinstance(iv, SetInitial):
        if not math.isfinite(iv.value):
            raise ModelError("initial value must be finite")
        return _replace_component(model, k, initial=iv.value)
    if isinstance(iv, ReplaceOde):
        if iv.diffusion is not None and not model.stochastic:
            raise ModelError("diffusion given for a deterministic model")
        extra = [model.index(p) for p in iv.parents]
        return _replace_component(model, k, drift=iv.rhs, diffusion=iv.diffusion,
                                  extra_parents=extra)
    if isinstance(iv, Clamp):
        return _replace_component(model, k, drift=Rhs.zero(), diffusion=zero_noise,
                                  initial=iv.value)
    if isinstance(iv, Forcing):
        rhs = Rhs((Term.constant(iv.gain * iv.value), Term.monomial(-iv.gain, {k: 1})))
        return _replace_component(model, k, drift=rhs)
    if isinstance(iv, SetTrajectory):
        start = float(iv.zeta.evaluate([0.0], iv.t0))
        return _replace_component(model, k, drift=iv.zeta.time_derivative(),
                                  diffusion=zero_noise, initial=start)
    raise TypeError(f"not an intervention: {iv!r}")


def apply_interventions(model: KineticModel, ivs: Iterable[Intervention]) -> KineticModel:
    """Apply several interventions in order.

    Two interventions may not touch the same part (initial value or dynamics)
    of the same component, and a rate may be set only once.
    """
    seen: set = set()
    ivs = list(ivs)
    for iv in ivs:
        for key in _touches(iv, model):
            if key in seen:
                what = key[1] if key[0] == "rate" else f"{key[1]} of {model.names[key[0]]}"
                raise ModelError(f"conflicting interventions on {what}")
            seen.add(key)
    for iv in ivs:
        model = apply_intervention(model, iv)
    return model


# ---------------------------------------------------------------------------
# Directive text

def _float(text: str, what: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"{what} must be a number, got {text!r}") from None
    if not math.isfinite(value):
        raise ParseError(f"{what} must be finite")
    return value


def _component(name: str, names) -> str:
    if name not in names:
        raise ParseError(f"unknown species {name!r}; species: {', '.join(names)}")
    return name


def parse_directive(text: str, names) -> Intervention:
    """Parse one directive (see module docstring) against species ``names``."""
    try:
        words = shlex.split(text)
    except ValueError as exc:
        raise ParseError(f"bad quoting in directive {text!r}: {exc}") from None
    if not words:
        raise ParseError("empty directive")
    verb, args = words[0], words[1:]
    names = tuple(names)

    def need(n):
        if len(args) != n:
            raise ParseError(f"{verb} takes {n} arguments, got {len(args)}: {text!r}")

    if verb == "set-initial":
        need(2)
        return SetInitial(_component(args[0], names), _float(args[1], "initial value"))
    if verb == "set-rate":
        need(2)
        return SetRate(args[0], _float(args[1], "rate"))
    if verb == "clamp":
        need(2)
        return Clamp(_component(args[0], names), _float(args[1], "clamp value"))
    if verb == "force":
        need(4)
        if args[2] != "gain":
            raise ParseError(f"expected 'force <species> <value> gain <gain>', got {text!r}")
        gain = _float(args[3], "gain")
        if gain <= 0:
            raise ParseError("gain must be positive")
        return Forcing(_component(args[0], names), _float(args[1], "target value"), gain)
    if verb == "traj":
        need(2)
        zeta = parse_rhs(args[1], names)
        if not zeta.time_only:
            raise ParseError(f"trajectory must depend on t only: {args[1]!r}")
        return SetTrajectory(_component(args[0], names), zeta)
    if verb == "replace-ode":
        if len(args) not in (2, 4):
            raise ParseError(f"replace-ode takes <species> <expr> [diffusion <expr>]: {text!r}")
        diffusion = None
        if len(args) == 4:
            if args[2] != "diffusion":
                raise ParseError(f"expected 'diffusion', got {args[2]!r}")
            diffusion = parse_rhs(args[3], names)
        return ReplaceOde(_component(args[0], names), parse_rhs(args[1], names), diffusion)
    raise ParseError(f"unknown directive {verb!r}; expected one of set-initial, set-rate, "
                     f"clamp, force, traj, replace-ode")


def format_directive(iv: Intervention, names) -> str:
    """Directive text for ``iv``; :func:`parse_directive` reads it back."""
    names = tuple(names)

    def who(target):
        return names[target] if isinstance(target, int) else target

    if isinstance(iv, SetInitial):
        return f"set-initial {who(iv.target)} {iv.value!r}"
    if isinstance(iv, SetRate):
        return f"set-rate {iv.rate_name} {iv.value!r}"
    if isinstance(iv, Clamp):
        return f"clamp {who(iv.target)} {iv.value!r}"
    if isinstance(iv, Forcing):
        return f"force {who(iv.target)} {iv.value!r} gain {iv.gain!r}"
    if isinstance(iv, SetTrajectory):
        if iv.t0 != 0.0:
            raise ValueError("trajectory directives assume t0 = 0")
        return f'traj {who(iv.target)} "{format_rhs(iv.zeta, names)}"'
    if isinstance(iv, ReplaceOde):
        if iv.parents:
            raise ValueError("replace-ode directives cannot carry extra parents")
        out = f'replace-ode {who(iv.target)} "{format_rhs(iv.rhs, names)}"'
        if iv.diffusion is not None:
            out += f' diffusion "{format_rhs(iv.diffusion, names)}"'
        return out
    raise TypeError(f"not an intervention: {iv!r}")
