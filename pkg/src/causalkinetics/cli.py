"""Command-line front end.

Exit codes: 0 success, 1 runtime or numerical failure, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import RunConfig, load_config
from .discovery import BasisSpec, format_ranking, rank_models
from .errors import (DatasetFormatError, DiscoveryError, IntegrationError, ModelError,
                     ParseError, SolvabilityError)
from .experiment import Environment, export_csv, import_csv, run_experiment
from .interventions import apply_interventions, parse_directive
from .model import causal_graph
from .modelio import read_model, write_model
from .reactions import compile_mass_action, parse_network
from .simulate import NoiseSpec, TimeGrid

log = logging.getLogger("causalkinetics")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _read_text(path) -> str:
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"file not found: {path}")
    return path.read_text(encoding="utf-8")


def _load_model(cfg: RunConfig):
    if cfg.network_path is not None:
        model = compile_mass_action(parse_network(_read_text(cfg.network_path)))
    elif cfg.model_path is not None:
        model = read_model(_read_text(cfg.model_path))
    else:
        raise UsageError("config needs [model] network = ... or model = ...")
    if cfg.initial:
        model = model.with_initial(cfg.initial)
    return model


def _print_model(model, out):
    for line in model.equations():
        print(line, file=out)
    edges = causal_graph(model).edge_lines()
    print(f"graph: {len(edges)} edges", file=out)
    for line in edges:
        print(f"  {line}", file=out)


def cmd_compile(args, out) -> int:
    text = _read_text(args.network)
    model = compile_mass_action(parse_network(text))
    target = Path(args.output) if args.output else Path(args.out_dir or ".") / (
        Path(args.network).stem + ".model")
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(write_model(model), encoding="utf-8")
    _print_model(model, out)
    print(f"wrote {target}", file=out)
    return EXIT_OK


def _write_plot_data(ds, out_dir: Path) -> list[Path]:
    written = []
    cube = ds.cube()
    times = ds.grid.points
    for i in range(ds.n):
        env = ds.environments[ds.row_env[i]].label
        folder = out_dir / "plot" / env
        folder.mkdir(parents=True, exist_ok=True)
        for k, name in enumerate(ds.names):
            path = folder / f"{name}_rep{ds.row_rep[i]}.csv"
            lines = ["t,value"] + [f"{t!r},{v!r}" for t, v in
                                   zip(times.tolist(), cube[i, :, k].tolist())]
            path.write_text("\n".join(lines) + "\n", encoding="utf-8")
            written.append(path)
    return written


def cmd_simulate(args, out) -> int:
    if not args.config:
        raise UsageError("simulate needs --config")
    cfg = load_config(args.config)
    model = _load_model(cfg)
    seed = args.seed if args.seed is not None else cfg.seed
    if seed is None:
        raise UsageError("a seed is required (--seed or [experiment] seed)")
    try:
        grid = TimeGrid.uniform(cfg.t_start, cfg.t_end, cfg.points, cfg.substeps)
    except ValueError as exc:
        raise UsageError(f"invalid grid: {exc}") from None
    envs = cfg.environments or [("observational", [])]
    environments = [Environment(label, tuple(parse_directive(d, model.names) for d in dirs),
                                cfg.reps) for label, dirs in envs]
    ds = run_experiment(model, environments, grid, NoiseSpec(cfg.sigma), seed=seed,
                        initial_sd=cfg.initial_sd)
    out_dir = Path(args.out_dir or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    export_csv(ds, out_dir / cfg.dataset_name)
    plots = _write_plot_data(ds, out_dir)
    print(f"simulated {ds.n} repetitions in {len(ds.environments)} environment(s); "
          f"wrote {out_dir / cfg.dataset_name} and {len(plots)} plot-data files", file=out)
    return EXIT_OK


def cmd_intervene(args, out) -> int:
    model = read_model(_read_text(args.model))
    ivs = [parse_directive(d, model.names) for d in args.directives]
    new = apply_interventions(model, ivs)
    target = Path(args.output) if args.output else Path(args.out_dir or ".") / (
        Path(args.model).stem + ".intervened.model")
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(write_model(new), encoding="utf-8")
    _print_model(new, out)
    print(f"wrote {target}", file=out)
    return EXIT_OK


def cmd_discover(args, out) -> int:
    cfg = load_config(args.config) if args.config else None
    out_dir = Path(args.out_dir or ".")
    if args.dataset:
        path = Path(args.dataset)
    elif cfg is not None and cfg.dataset_path is not None:
        path = cfg.dataset_path
    elif cfg is not None:
        path = out_dir / cfg.dataset_name
    else:
        raise UsageError("discover needs a dataset path or --config")
    if not path.is_file():
        raise UsageError(f"dataset not found: {path}")
    ds = import_csv(path)
    target = args.target or (cfg.target if cfg else None)
    p_max = args.p_max if args.p_max is not None else (cfg.p_max if cfg else None)
    if target is None or p_max is None:
        raise UsageError("discover needs a target and p_max")
    degree = args.degree if args.degree is not None else (cfg.degree if cfg else 2)
    mm = tuple(args.mm_c2) if args.mm_c2 else (cfg.mm_c2 if cfg else ())
    include_self = (not args.exclude_self) and (cfg.include_self if cfg else True)
    weighting = cfg.weighting if cfg else "environment"
    if len(ds.environments) < 2:
        print("warning: single environment, invariance unavailable; "
              "ranking by predictability only", file=sys.stderr)
    ranking = rank_models(ds, target, p_max, BasisSpec(degree, mm), include_self, weighting)
    name = cfg.ranking_name if cfg else "ranking.tsv"
    out_dir.mkdir(parents=True, exist_ok=True)
    text = format_ranking(ranking)
    (out_dir / name).write_text(text, encoding="utf-8")
    print(f"top candidates for {target}:", file=out)
    for i, e in enumerate(ranking.entries[:3], start=1):
        parents = "{" + ",".join(ds.names[j] for j in e.parent_set) + "}"
        inv = "NA" if e.invariance is None else f"{e.invariance:.6g}"
        print(f"  {i}. {parents}  invariance={inv}  predictability={e.predictability:.6g}",
              file=out)
    print(f"wrote {out_dir / name}", file=out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="seed for stochastic steps")
    common.add_argument("--config", default=None, help="run configuration file")
    common.add_argument("--out-dir", default=None, help="directory for output files")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="causalkinetics",
        description="Causal kinetic models: compile, simulate, intervene, discover.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", parents=[common], help="compile a reaction network")
    p.add_argument("network", help="reaction DSL file")
    p.add_argument("-o", "--output", help="model file to write")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("simulate", parents=[common], help="run the experiment of a config")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("intervene", parents=[common], help="apply interventions to a model")
    p.add_argument("model", help="model file")
    p.add_argument("directives", nargs="+", help="e.g. 'set-rate k1 0.05' 'clamp C 0.3'")
    p.add_argument("-o", "--output", help="model file to write")
    p.set_defaults(func=cmd_intervene)

    p = sub.add_parser("discover", parents=[common], help="rank candidate parent sets")
    p.add_argument("dataset", nargs="?", help="dataset CSV (default: from --config)")
    p.add_argument("--target")
    p.add_argument("--p-max", type=int)
    p.add_argument("--degree", type=int, choices=(0, 1, 2))
    p.add_argument("--mm-c2", type=float, nargs="*")
    p.add_argument("--exclude-self", action="store_true")
    p.set_defaults(func=cmd_discover)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, out)
    except (UsageError, ParseError, DatasetFormatError, ModelError, DiscoveryError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IntegrationError, SolvabilityError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
