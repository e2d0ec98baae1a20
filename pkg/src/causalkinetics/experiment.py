"""Multi-environment experiments and their CSV representation.

A :class:`Dataset` holds ``n`` repetitions of ``d`` components observed on a
grid of ``L`` points as an ``n x (d*L)`` matrix. Columns are component-major:
column ``k*L + l`` holds component ``k`` at ``t_{l+1}``.

CSV layout (``#`` lines first, then a header row and one row per repetition)::

    # grid: 0.0,0.5,1.0
    # substeps: 10
    # species: A,B
    # seed: 7
    # env: observational
    # env: shifted | set-rate k1 0.05 | set-initial B 2.0
    env,rep,A_t1,A_t2,A_t3,B_t1,B_t2,B_t3
    observational,1,1.0,...

``rep`` is 1-based within its environment. Values are written with Python's
shortest round-trip ``repr`` so that import reproduces every bit.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DatasetFormatError, IntegrationError
from .interventions import (Intervention, SetInitial, SetRate, apply_interventions,
                            format_directive, parse_directive)
from .model import KineticModel
from .simulate import (DEFAULT_BLOW_UP, STREAM_DRIVING, STREAM_INITIAL, STREAM_NOISE,
                       NoiseSpec, TimeGrid, Trajectory, add_measurement_noise,
                       integrate_rk4_batch, rng_stream, simulate_sde_paths)

LABEL_RE = re.compile(r"[A-Za-z0-9_.-]+\Z")


@dataclass(frozen=True)
class Environment:
    label: str
    interventions: tuple[Intervention, ...] = ()
    reps: int = 1

    def __post_init__(self):
        if not LABEL_RE.match(self.label):
            raise ValueError(f"environment label {self.label!r} must match {LABEL_RE.pattern}")
        if self.reps < 1:
            raise ValueError("an environment needs at least one repetition")
        object.__setattr__(self, "interventions", tuple(self.interventions))


@dataclass(eq=False)
class Dataset:
    names: tuple[str, ...]
    grid: TimeGrid
    environments: tuple[Environment, ...]
    matrix: np.ndarray
    row_env: np.ndarray
    row_rep: np.ndarray
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.names = tuple(self.names)
        self.environments = tuple(self.environments)
        self.matrix = np.asarray(self.matrix, dtype=float)
        self.row_env = np.asarray(self.row_env, dtype=int)
        self.row_rep = np.asarray(self.row_rep, dtype=int)
        n = self.matrix.shape[0]
        if self.matrix.ndim != 2 or self.matrix.shape[1] != self.d * self.L:
            raise DatasetFormatError(f"matrix must be n x (d*L) = n x {self.d * self.L}, "
                                     f"got {self.matrix.shape}")
        if self.row_env.shape != (n,) or self.row_rep.shape != (n,):
            raise DatasetFormatError("one environment index and repetition per row required")
        labels = [e.label for e in self.environments]
        if len(set(labels)) != len(labels):
            raise DatasetFormatError("environment labels must be unique")
        counts = np.bincount(self.row_env, minlength=len(labels)) if n else np.zeros(0)
        if len(counts) != len(labels) or any(c != e.reps for c, e in
                                             zip(counts, self.environments)):
            raise DatasetFormatError("row counts do not match environment repetitions")

    @property
    def d(self) -> int:
        return len(self.names)

    @property
    def L(self) -> int:
        return len(self.grid)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def labels(self) -> list[str]:
        return [e.label for e in self.environments]

    def row_labels(self) -> list[str]:
        return [self.environments[e].label for e in self.row_env]

    def values(self, row: int) -> np.ndarray:
        """Observations of one repetition as an ``(L, d)`` array."""
        return self.matrix[row].reshape(self.d, self.L).T

    def cube(self) -> np.ndarray:
        """All repetitions as an ``(n, L, d)`` array."""
        return self.matrix.reshape(self.n, self.d, self.L).transpose(0, 2, 1)

    def rows_of(self, env: int | str) -> np.ndarray:
        if isinstance(env, str):
            env = self.labels.index(env)
        return np.nonzero(self.row_env == env)[0]

    def trajectory(self, row: int) -> Trajectory:
        return Trajectory(self.grid, self.values(row))

    def __eq__(self, other):
        return (isinstance(other, Dataset) and self.names == other.names
                and self.grid == other.grid and self.environments == other.environments
                and np.array_equal(self.matrix, other.matrix)
                and np.array_equal(self.row_env, other.row_env)
                and np.array_equal(self.row_rep, other.row_rep) and self.seed == other.seed)


def _by_name(iv: Intervention, names) -> Intervention:
    if not isinstance(iv, SetRate) and isinstance(iv.target, int):
        return replace(iv, target=names[iv.target])
    return iv


def _initial_targets(ivs) -> set:
    from .interventions import Clamp, SetTrajectory
    return {iv.target for iv in ivs if isinstance(iv, (SetInitial, Clamp, SetTrajectory))}


def run_experiment(base_model: KineticModel, environments: Sequence, grid: TimeGrid,
                   noise: NoiseSpec = NoiseSpec(), seed: int = 0, reps: int | None = None,
                   initial_sd=None, blow_up_bound: float = DEFAULT_BLOW_UP) -> Dataset:
    """Simulate every environment and assemble the data matrix.

    ``environments`` holds :class:`Environment` objects or ``(label,
    interventions)`` pairs; ``reps`` (if given) overrides the repetition count
    of every environment. ``initial_sd`` (scalar or per component) draws each
    repetition's initial values from ``N(xi, sd^2)`` around the environment's
    initial values; components whose initial value is set by an intervention
    of that environment stay fixed.

    Repetition ``r`` of environment ``e`` uses the streams ``(purpose, e, r)``
    for its initial values, driving noise and measurement noise.
    """
    envs = []
    for env in environments:
        if not isinstance(env, Environment):
            label, ivs = env
            env = Environment(label, tuple(ivs))
        if reps is not None:
            env = replace(env, reps=int(reps))
        env = replace(env, interventions=tuple(_by_name(iv, base_model.names)
                                               for iv in env.interventions))
        envs.append(env)
    d, L = base_model.d, len(grid)
    sd = None
    if initial_sd is not None:
        sd = np.broadcast_to(np.asarray(initial_sd, dtype=float), (d,))
    rows, row_env, row_rep = [], [], []
    for e, env in enumerate(envs):
        model = apply_interventions(base_model, env.interventions)
        x0 = np.tile(model.initial_array(), (env.reps, 1))
        if sd is not None:
            fixed = {model.index(t) for t in _initial_targets(env.interventions)}
            mask = np.array([k not in fixed for k in range(d)])
            for r in range(env.reps):
                z = rng_stream(seed, STREAM_INITIAL, e, r).standard_normal(d)
                x0[r] = x0[r] + np.where(mask, sd * z, 0.0)
        try:
            if model.stochastic:
                latent = np.concatenate([
                    simulate_sde_paths(model, grid, x0[r:r + 1],
                                       rng_stream(seed, STREAM_DRIVING, e, r), blow_up_bound)
                    for r in range(env.reps)])
            else:
                latent = integrate_rk4_batch(model, grid, x0, blow_up_bound)
        except IntegrationError as exc:
            which = getattr(exc, "rows", None)
            rep = f" repetition {which[0] + 1}" if which else ""
            raise IntegrationError(f"environment {env.label!r}{rep}: {exc}") from exc
        for r in range(env.reps):
            traj = Trajectory(grid, latent[r])
            if noise.kind != "none":
                traj = add_measurement_noise(traj, noise, rng=rng_stream(seed, STREAM_NOISE, e, r))
            rows.append(traj.values.T.reshape(d * L))
            row_env.append(e)
            row_rep.append(r + 1)
    return Dataset(base_model.names, grid, tuple(envs), np.array(rows).reshape(len(rows), d * L),
                   np.array(row_env, dtype=int), np.array(row_rep, dtype=int), seed)


# ---------------------------------------------------------------------------
# CSV

def _header(names, L) -> list[str]:
    return ["env", "rep"] + [f"{n}_t{l}" for n in names for l in range(1, L + 1)]


def dataset_to_csv(ds: Dataset) -> str:
    buf = io.StringIO()
    buf.write("# grid: " + ",".join(repr(float(t)) for t in ds.grid.points) + "\n")
    buf.write(f"# substeps: {ds.grid.substeps}\n")
    buf.write("# species: " + ",".join(ds.names) + "\n")
    if ds.seed is not None:
        buf.write(f"# seed: {ds.seed}\n")
    for env in ds.environments:
        parts = [env.label] + [format_directive(iv, ds.names) for iv in env.interventions]
        buf.write("# env: " + " | ".join(parts) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_header(ds.names, ds.L))
    labels = ds.labels
    for i in range(ds.n):
        writer.writerow([labels[ds.row_env[i]], int(ds.row_rep[i])]
                        + [repr(float(v)) for v in ds.matrix[i]])
    return buf.getvalue()


def export_csv(ds: Dataset, path) -> None:
    Path(path).write_text(dataset_to_csv(ds), encoding="utf-8")


def _float_cell(text: str, lineno: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise DatasetFormatError(f"line {lineno}: non-numeric cell {text!r}") from None


def dataset_from_csv(text: str) -> Dataset:
    meta: dict[str, str] = {}
    env_lines: list[str] = []
    lines = text.splitlines()
    i = 0
    while i < len(lines) and lines[i].startswith("#"):
        body = lines[i][1:].strip()
        if ":" in body:
            key, value = (s.strip() for s in body.split(":", 1))
            if key == "env":
                env_lines.append(value)
            else:
                meta[key] = value
        i += 1
    for key in ("grid", "species"):
        if key not in meta:
            raise DatasetFormatError(f"missing '# {key}:' header line")
    try:
        points = [float(v) for v in meta["grid"].split(",")]
        grid = TimeGrid(points, int(meta.get("substeps", "1")))
    except ValueError as exc:
        raise DatasetFormatError(f"bad grid header: {exc}") from None
    names = tuple(s.strip() for s in meta["species"].split(","))
    seed = int(meta["seed"]) if "seed" in meta else None
    reader = csv.reader(lines[i:])
    try:
        header = next(reader)
    except StopIteration:
        raise DatasetFormatError("missing header row") from None
    expected = _header(names, len(grid))
    if header[:2] != ["env", "rep"]:
        raise DatasetFormatError("environments required: the first columns must be 'env,rep'")
    if header != expected:
        raise DatasetFormatError(
            f"header has {len(header) - 2} value columns, expected {len(expected) - 2} "
            f"({len(names)} species x {len(grid)} grid points) named <species>_t<l>")
    declared: list[Environment] = []
    for line in env_lines:
        parts = [p.strip() for p in line.split("|")]
        try:
            ivs = tuple(parse_directive(p, names) for p in parts[1:])
        except ValueError as exc:
            raise DatasetFormatError(f"bad environment line {line!r}: {exc}") from None
        declared.append((parts[0], ivs))
    labels = [lab for lab, _ in declared]
    rows, row_env, row_rep = [], [], []
    for lineno, cells in enumerate(reader, start=i + 2):
        if not cells:
            continue
        if len(cells) != len(expected):
            raise DatasetFormatError(f"line {lineno}: {len(cells)} cells, expected {len(expected)}")
        label = cells[0]
        if not label:
            raise DatasetFormatError(f"line {lineno}: environments required (empty env label)")
        if label not in labels:
            if env_lines:
                raise DatasetFormatError(f"line {lineno}: undeclared environment {label!r}")
            labels.append(label)
            declared.append((label, ()))
        try:
            rep = int(cells[1])
        except ValueError:
            raise DatasetFormatError(f"line {lineno}: bad repetition {cells[1]!r}") from None
        rows.append([_float_cell(c, lineno) for c in cells[2:]])
        row_env.append(labels.index(label))
        row_rep.append(rep)
    counts = np.bincount(np.array(row_env, dtype=int), minlength=len(labels))
    try:
        envs = tuple(Environment(lab, ivs, int(c)) for (lab, ivs), c in zip(declared, counts))
    except ValueError as exc:
        raise DatasetFormatError(str(exc)) from None
    matrix = np.array(rows, dtype=float).reshape(len(rows), len(names) * len(grid))
    return Dataset(names, grid, envs, matrix, np.array(row_env, dtype=int),
                   np.array(row_rep, dtype=int), seed)


def import_csv(path) -> Dataset:
    return dataset_from_csv(Path(path).read_text(encoding="utf-8"))
