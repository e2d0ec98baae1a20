"""Fixed-step integration, Euler-Maruyama simulation and measurement noise.

Random streams
--------------
Every stochastic draw comes from ``numpy.random.Generator(PCG64)`` seeded with
``SeedSequence(entropy=seed, spawn_key=(purpose, env, rep))`` where
``purpose`` is one of :data:`STREAM_INITIAL`, :data:`STREAM_NOISE`,
:data:`STREAM_DRIVING`, :data:`STREAM_SCM` and ``env``/``rep`` are 0-based
environment and repetition indices. The stream of a repetition therefore does
not depend on how many other repetitions or environments are simulated, or
in which order.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import IntegrationError, ModelError
from .model import KineticModel

logger = logging.getLogger(__name__)

STREAM_INITIAL = 0
STREAM_NOISE = 1
STREAM_DRIVING = 2
STREAM_SCM = 3

DEFAULT_BLOW_UP = 1e9
NEGATIVE_TOL = -1e-9


class NegativeStateWarning(UserWarning):
    """A mass-action state went below -1e-9."""


def rng_stream(seed: int, purpose: int, env: int = 0, rep: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(purpose), int(env), int(rep)))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Observation times ``t_1 < ... < t_L`` and the RK/EM substeps per interval."""

    points: np.ndarray
    substeps: int = 1

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("a time grid needs at least two points")
        if not np.all(np.isfinite(pts)):
            raise ValueError("time grid points must be finite")
        if not np.all(np.diff(pts) > 0):
            raise ValueError("time grid must be strictly increasing")
        if int(self.substeps) != self.substeps or self.substeps < 1:
            raise ValueError("substeps must be a positive integer")
        object.__setattr__(self, "substeps", int(self.substeps))

    @classmethod
    def uniform(cls, t_start: float, t_end: float, n_points: int, substeps: int = 1) -> TimeGrid:
        return cls(np.linspace(t_start, t_end, n_points), substeps)

    def __len__(self):
        return self.points.size

    def __eq__(self, other):
        return (isinstance(other, TimeGrid) and self.substeps == other.substeps
                and np.array_equal(self.points, other.points))

    def __hash__(self):
        return hash((self.points.tobytes(), self.substeps))


@dataclass(frozen=True, eq=False)
class Trajectory:
    grid: TimeGrid
    values: np.ndarray  # (L, d)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2 or vals.shape[0] != len(self.grid):
            raise ValueError(f"values must have shape (L={len(self.grid)}, d), got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("trajectory contains non-finite values")
        object.__setattr__(self, "values", vals)

    @property
    def times(self) -> np.ndarray:
        return self.grid.points

    def __eq__(self, other):
        return (isinstance(other, Trajectory) and self.grid == other.grid
                and np.array_equal(self.values, other.values))

    __hash__ = None


@dataclass(frozen=True)
class NoiseSpec:
    """Independent Gaussian measurement noise at observed grid points.

    ``sigma`` is a scalar (same for every component), a per-component
    sequence, or ``None`` for no noise.
    """

    sigma: float | tuple[float, ...] | None = None

    def __post_init__(self):
        s = self.sigma
        if s is None:
            return
        if np.ndim(s) == 0:
            s = float(s)
            vals = [s]
        else:
            s = tuple(float(v) for v in s)
            vals = list(s)
        if any(not math.isfinite(v) or v < 0 for v in vals):
            raise ValueError("noise sigma must be finite and >= 0")
        object.__setattr__(self, "sigma", s)

    @property
    def kind(self) -> str:
        return "none" if self.sigma is None else "gaussian"

    def sigmas(self, d: int) -> np.ndarray:
        if self.sigma is None:
            return np.zeros(d)
        if isinstance(self.sigma, tuple):
            if len(self.sigma) != d:
                raise ValueError(f"noise has {len(self.sigma)} sigmas for d={d}")
            return np.array(self.sigma)
        return np.full(d, self.sigma)


def _check_state(x: np.ndarray, t: float, bound: float, warn_negative: bool) -> None:
    bad = ~np.isfinite(x) | (np.abs(x) > bound)
    if bad.any():
        rows = np.unique(np.nonzero(bad)[0])
        exc = IntegrationError(
            f"state left the bound {bound:g} at t={t:g}: possible solvability violation"
        )
        exc.rows = rows.tolist()
        raise exc
    if warn_negative and np.any(x < NEGATIVE_TOL):
        warnings.warn(f"negative state {x.min()!r} at t={t:g}", NegativeStateWarning,
                      stacklevel=3)


def integrate_rk4_batch(model: KineticModel, grid: TimeGrid, x0: np.ndarray,
                        blow_up_bound: float = DEFAULT_BLOW_UP,
                        warn_negative: bool = False) -> np.ndarray:
    """Integrate many initial states at once; returns an array ``(n, L, d)``.

    Each row is computed with exactly the same floating-point operations as a
    single-state integration, so batching never changes results.
    """
    x = np.array(x0, dtype=float, ndmin=2)
    if x.shape[1] != model.d:
        raise ModelError(f"initial states must have {model.d} columns")
    pts = grid.points
    out = np.empty((x.shape[0], pts.size, model.d))
    out[:, 0] = x
    _check_state(x, float(pts[0]), blow_up_bound, warn_negative)
    f = model.drift_eval
    m = grid.substeps
    for l in range(pts.size - 1):
        t0 = float(pts[l])
        h = (float(pts[l + 1]) - t0) / m
        for s in range(m):
            t = t0 + s * h
            k1 = f(x, t)
            k2 = f(x + (0.5 * h) * k1, t + 0.5 * h)
            k3 = f(x + (0.5 * h) * k2, t + 0.5 * h)
            k4 = f(x + h * k3, t + h)
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            _check_state(x, t + h, blow_up_bound, warn_negative)
        out[:, l + 1] = x
    return out


def integrate_rk4(model: KineticModel, grid: TimeGrid, substeps: int | None = None,
                  blow_up_bound: float = DEFAULT_BLOW_UP, ignore_diffusion: bool = False,
                  warn_negative: bool = False, initial=None) -> Trajectory:
    """Classical RK4 with step ``(t_{l+1} - t_l) / substeps`` on every interval.

    Initial values are assigned at ``grid.points[0]``. ``substeps`` overrides
    the grid's own count.
    """
    if model.stochastic and not ignore_diffusion:
        raise ModelError("model has diffusion terms; use simulate_sde or ignore_diffusion=True")
    if substeps is not None:
        grid = TimeGrid(grid.points, substeps)
    x0 = model.initial_array() if initial is None else np.asarray(initial, dtype=float)
    values = integrate_rk4_batch(model, grid, x0, blow_up_bound, warn_negative)[0]
    return Trajectory(grid, values)


def simulate_sde_paths(model: KineticModel, grid: TimeGrid, x0: np.ndarray,
                       rng: np.random.Generator,
                       blow_up_bound: float = DEFAULT_BLOW_UP) -> np.ndarray:
    """Euler-Maruyama for a batch of paths; returns ``(n, L, d)``.

    ``X <- X + f(X, t) dt + h(X, t) sqrt(dt) Z`` where every step draws one
    ``(n, d)`` block of independent standard normals from ``rng``.
    """
    if not model.stochastic:
        raise ModelError("model has no diffusion terms")
    x = np.array(x0, dtype=float, ndmin=2)
    n = x.shape[0]
    pts = grid.points
    out = np.empty((n, pts.size, model.d))
    out[:, 0] = x
    _check_state(x, float(pts[0]), blow_up_bound, False)
    m = grid.substeps
    for l in range(pts.size - 1):
        t0 = float(pts[l])
        dt = (float(pts[l + 1]) - t0) / m
        if not dt > 0:
            raise IntegrationError("non-positive step")
        sq = math.sqrt(dt)
        for s in range(m):
            t = t0 + s * dt
            z = rng.standard_normal((n, model.d))
            x = x + model.drift_eval(x, t) * dt + model.diffusion_eval(x, t) * sq * z
            _check_state(x, t + dt, blow_up_bound, False)
        out[:, l + 1] = x
    return out


def simulate_sde(model: KineticModel, grid: TimeGrid, n_paths: int, seed: int,
                 blow_up_bound: float = DEFAULT_BLOW_UP) -> list[Trajectory]:
    """``n_paths`` independent Euler-Maruyama paths from the initial values.

    All paths share the stream ``(STREAM_DRIVING, 0, 0)``.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    x0 = np.tile(model.initial_array(), (n_paths, 1))
    vals = simulate_sde_paths(model, grid, x0, rng_stream(seed, STREAM_DRIVING),
                              blow_up_bound)
    return [Trajectory(grid, v) for v in vals]


def add_measurement_noise(traj: Trajectory, noise: NoiseSpec, seed: int | None = None,
                          rng: np.random.Generator | None = None) -> Trajectory:
    """``X_t = x_t + eps_t`` at the grid points, ``eps ~ N(0, sigma_k^2)`` i.i.d."""
    if noise.kind == "none":
        return Trajectory(traj.grid, traj.values.copy())
    if rng is None:
        if seed is None:
            raise ValueError("a seed or generator is required for measurement noise")
        rng = rng_stream(seed, STREAM_NOISE)
    sig = noise.sigmas(traj.values.shape[1])
    eps = rng.standard_normal(traj.values.shape)
    return Trajectory(traj.grid, traj.values + eps * sig)
