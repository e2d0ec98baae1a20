"""Run configuration files.

INI-style (read with :mod:`configparser`); keys are case-sensitive, ``#`` and
``;`` start comments, and relative paths are resolved against the directory
of the config file::

    [model]
    network = lotka_volterra.net   ; reaction DSL, or: model = some.model
    initial = A=1, B=1.5           ; optional overrides of initial values

    [grid]
    t_start = 0
    t_end = 100
    points = 1001
    substeps = 10

    [noise]
    sigma = 0                      ; scalar or one value per species

    [experiment]
    seed = 1
    reps = 1
    initial_sd = 0                 ; optional, scalar or per species
    dataset = dataset.csv          ; output file name inside --out-dir

    [env observational]
    do =

    [env intervened]
    do = set-rate k1 0.05
         set-initial B 2

    [discover]
    dataset = data.csv             ; optional; default: the experiment output
    target = C
    p_max = 3
    degree = 2
    include_self = yes
    mm_c2 =                        ; optional list of Michaelis-Menten c2 values
    weighting = environment
    output = ranking.tsv

``[env ...]`` sections are kept in file order; each line of ``do`` is one
intervention directive.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ParseError


@dataclass
class RunConfig:
    base_dir: Path
    network_path: Path | None = None
    model_path: Path | None = None
    initial: dict[str, float] = field(default_factory=dict)
    t_start: float = 0.0
    t_end: float = 1.0
    points: int = 2
    substeps: int = 1
    sigma: float | tuple[float, ...] | None = None
    seed: int | None = None
    reps: int = 1
    initial_sd: float | tuple[float, ...] | None = None
    dataset_name: str = "dataset.csv"
    environments: list[tuple[str, list[str]]] = field(default_factory=list)
    dataset_path: Path | None = None
    target: str | None = None
    p_max: int | None = None
    degree: int = 2
    include_self: bool = True
    mm_c2: tuple[float, ...] = ()
    weighting: str = "environment"
    ranking_name: str = "ranking.tsv"


def _floats(text: str, what: str):
    try:
        vals = tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise ParseError(f"{what}: expected numbers, got {text!r}") from None
    if not vals:
        return None
    return vals[0] if len(vals) == 1 else vals


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ParseError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ParseError(f"{path}: {exc}") from None
    cfg = RunConfig(base_dir=path.parent)

    def get(section, key, conv=str, default=None):
        if not parser.has_option(section, key):
            return default
        raw = parser.get(section, key).strip()
        if raw == "":
            return default
        try:
            return conv(raw)
        except ValueError:
            raise ParseError(f"[{section}] {key}: invalid value {raw!r}") from None

    try:
        if parser.has_section("model"):
            net = get("model", "network")
            mod = get("model", "model")
            if net and mod:
                raise ParseError("[model]: give either network or model, not both")
            cfg.network_path = cfg.base_dir / net if net else None
            cfg.model_path = cfg.base_dir / mod if mod else None
            init = get("model", "initial", default="")
            for item in filter(None, (s.strip() for s in init.split(","))):
                if "=" not in item:
                    raise ParseError(f"[model] initial: expected name=value, got {item!r}")
                name, value = (s.strip() for s in item.split("=", 1))
                cfg.initial[name] = float(value)
        if parser.has_section("grid"):
            cfg.t_start = get("grid", "t_start", float, cfg.t_start)
            cfg.t_end = get("grid", "t_end", float, cfg.t_end)
            cfg.points = get("grid", "points", int, cfg.points)
            cfg.substeps = get("grid", "substeps", int, cfg.substeps)
        if parser.has_section("noise"):
            cfg.sigma = _floats(get("noise", "sigma", default=""), "[noise] sigma")
        if parser.has_section("experiment"):
            cfg.seed = get("experiment", "seed", int)
            cfg.reps = get("experiment", "reps", int, cfg.reps)
            cfg.initial_sd = _floats(get("experiment", "initial_sd", default=""),
                                     "[experiment] initial_sd")
            cfg.dataset_name = get("experiment", "dataset", default=cfg.dataset_name)
        for section in parser.sections():
            if section.startswith("env "):
                label = section[4:].strip()
                raw = parser.get(section, "do", fallback="")
                cfg.environments.append((label, [ln.strip() for ln in raw.splitlines()
                                                 if ln.strip()]))
        if parser.has_section("discover"):
            ds = get("discover", "dataset")
            cfg.dataset_path = cfg.base_dir / ds if ds else None
            cfg.target = get("discover", "target")
            cfg.p_max = get("discover", "p_max", int)
            cfg.degree = get("discover", "degree", int, cfg.degree)
            cfg.include_self = parser.getboolean("discover", "include_self", fallback=True)
            mm = _floats(get("discover", "mm_c2", default=""), "[discover] mm_c2")
            cfg.mm_c2 = () if mm is None else (mm if isinstance(mm, tuple) else (mm,))
            cfg.weighting = get("discover", "weighting", default=cfg.weighting)
            cfg.ranking_name = get("discover", "output", default=cfg.ranking_name)
    except ValueError as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"{path}: {exc}") from None
    return cfg
