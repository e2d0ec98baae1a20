"""Line-oriented model files.

Kinetic model::

    # anything after '#' is a comment
    model: kinetic
    species: A, B
    [A]
    parents: A, B
    initial: 1.0
    drift: 0.1 * x_0^1 - 0.05 * x_0^1 * x_1^1
    [B]
    parents: A, B
    initial: 1.5
    drift: 0.05 * x_0^1 * x_1^1 - 0.05 * x_1^1
    [network]
    A -> 2 A @ k1 = 0.1
    A + B -> 2 B @ k2 = 0.05
    B -> 0 @ k3 = 0.05

Stochastic models add ``diffusion: <rhs>`` to every component. ``initial:
unset`` marks a missing initial value. The ``[network]`` section is optional
and holds reaction DSL lines. Expressions use the grammar of
:mod:`causalkinetics.terms`; both ``x_i`` and species names are accepted,
and files are written with ``x_i`` and shortest round-trip floats, so that
``read(write(m)) == m`` exactly.

Static SCMs use the same layout with ``model: static``, a ``form:`` line
(``deterministic`` or ``stochastic``) and per-variable ``function:`` and
``noise:`` keys.
"""

from __future__ import annotations

from .errors import ParseError
from .model import KineticModel
from .reactions import format_network, parse_network
from .terms import format_rhs, parse_rhs


def _split_list(text: str) -> list[str]:
    return [s.strip() for s in text.split(",") if s.strip()]


def _read_sections(text: str):
    """Yield (header dict with line numbers, list of sections)."""
    header: dict[str, tuple[str, int]] = {}
    sections: list[tuple[str, int, dict[str, tuple[str, int]], list[tuple[str, int]]]] = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = (line[1:-1].strip(), lineno, {}, [])
            sections.append(current)
            continue
        if current is not None and current[0] == "network":
            current[3].append((raw.split("#", 1)[0], lineno))
            continue
        if ":" not in line:
            raise ParseError(f"expected 'key: value', got {line!r}", lineno, 1)
        key, value = (s.strip() for s in line.split(":", 1))
        target = header if current is None else current[2]
        if key in target:
            raise ParseError(f"duplicate key {key!r}", lineno, 1)
        target[key] = (value, lineno)
    return header, sections


def _require(mapping, key, where, lineno):
    if key not in mapping:
        raise ParseError(f"missing '{key}:' in {where}", lineno, 1)
    return mapping[key]


def write_model(model: KineticModel) -> str:
    names = model.names
    out = ["model: kinetic", "species: " + ", ".join(names)]
    for k, name in enumerate(names):
        out.append(f"[{name}]")
        out.append("parents: " + ", ".join(names[j] for j in sorted(model.parents[k])))
        init = None if model.initial is None else model.initial[k]
        out.append("initial: " + ("unset" if init is None else repr(init)))
        out.append("drift: " + format_rhs(model.drift[k]))
        if model.diffusion is not None:
            out.append("diffusion: " + format_rhs(model.diffusion[k]))
    if model.network is not None:
        out.append("[network]")
        out.extend(format_network(model.network).splitlines())
    return "\n".join(out) + "\n"


def read_model(text: str) -> KineticModel:
    header, sections = _read_sections(text)
    kind, ln = _require(header, "model", "header", 1)
    if kind != "kinetic":
        raise ParseError(f"expected 'model: kinetic', got {kind!r}", ln, 1)
    names_text, ln = _require(header, "species", "header", 1)
    names = _split_list(names_text)
    comp = {s[0]: s for s in sections if s[0] != "network"}
    if [s[0] for s in sections if s[0] != "network"] != names:
        raise ParseError("component sections must match the species line, in order", ln, 1)
    drift, diffusion, parents, initial = [], [], [], []
    for name in names:
        _, sln, keys, _ = comp[name]
        unknown = set(keys) - {"parents", "initial", "drift", "diffusion"}
        if unknown:
            raise ParseError(f"unknown key(s) {sorted(unknown)} in [{name}]", sln, 1)
        ptext, pln = _require(keys, "parents", f"[{name}]", sln)
        pset = set()
        for p in _split_list(ptext):
            if p not in names:
                raise ParseError(f"unknown parent {p!r}", pln, 1)
            pset.add(names.index(p))
        parents.append(frozenset(pset))
        itext, iln = _require(keys, "initial", f"[{name}]", sln)
        if itext == "unset":
            initial.append(None)
        else:
            try:
                initial.append(float(itext))
            except ValueError:
                raise ParseError(f"bad initial value {itext!r}", iln, 1) from None
        dtext, dln = _require(keys, "drift", f"[{name}]", sln)
        drift.append(parse_rhs(dtext, names, line=dln))
        if "diffusion" in keys:
            htext, hln = keys["diffusion"]
            diffusion.append(parse_rhs(htext, names, line=hln))
    if diffusion and len(diffusion) != len(names):
        raise ParseError("diffusion must be given for all components or none", 1, 1)
    network = None
    for sname, sln, _, lines in sections:
        if sname == "network":
            network = parse_network("\n".join(text for text, _ in lines))
            if network.names != tuple(names):
                raise ParseError("[network] species do not match the model species", sln, 1)
    return KineticModel(names=tuple(names), drift=tuple(drift), parents=tuple(parents),
                        initial=tuple(initial), diffusion=tuple(diffusion) or None,
                        network=network)


def write_static(scm) -> str:
    names = scm.names
    out = ["model: static", f"form: {scm.form}", "species: " + ", ".join(names)]
    for k, a in enumerate(scm.assignments):
        out.append(f"[{names[k]}]")
        out.append("parents: " + ", ".join(names[j] for j in sorted(a.parents)))
        out.append("function: " + format_rhs(a.function))
        out.append(f"noise: {a.noise_sd!r}")
    return "\n".join(out) + "\n"


def read_static(text: str):
    from .scm import StaticAssignment, StaticScm

    header, sections = _read_sections(text)
    kind, ln = _require(header, "model", "header", 1)
    if kind != "static":
        raise ParseError(f"expected 'model: static', got {kind!r}", ln, 1)
    form, fln = _require(header, "form", "header", 1)
    names = _split_list(_require(header, "species", "header", 1)[0])
    if [s[0] for s in sections] != names:
        raise ParseError("variable sections must match the species line, in order", ln, 1)
    assignments = []
    for k, (name, sln, keys, _) in enumerate(sections):
        ptext, pln = _require(keys, "parents", f"[{name}]", sln)
        parents = set()
        for p in _split_list(ptext):
            if p not in names:
                raise ParseError(f"unknown parent {p!r}", pln, 1)
            parents.add(names.index(p))
        ftext, fl = _require(keys, "function", f"[{name}]", sln)
        ntext, nl = _require(keys, "noise", f"[{name}]", sln)
        try:
            sd = float(ntext)
        except ValueError:
            raise ParseError(f"bad noise value {ntext!r}", nl, 1) from None
        assignments.append(StaticAssignment(k, frozenset(parents),
                                            parse_rhs(ftext, names, line=fl), sd))
    return StaticScm(tuple(names), tuple(assignments), form)
