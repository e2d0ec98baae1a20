"""Invariance-based ranking of candidate parent sets for one target.

For a candidate parent set ``S`` with basis functions ``g_1..g_B`` over ``S``,
each repetition is fitted by integral matching::

    y(t_l) - y(t_1) = sum_b theta_b * Q_b(t_l),   l = 2..L

where ``Q_b(t_l)`` is the cumulative trapezoid integral of ``g_b`` along the
observed trajectory. One pooled ``theta`` is fitted on all environments and
one ``theta_e`` per environment, always as the minimum-norm least-squares
solution.

Scores (lower is better):

* predictability: pooled RSS divided by the number of residuals;
* invariance: ``max_e [MSE_e(theta) - MSE_e(theta_e)]`` floored at 0, i.e.
  the worst excess loss an environment pays for sharing one mechanism.

Candidates are ranked by invariance, then predictability, then ``|S|``, then
``S`` lexicographically.

Weighting: by default (``weighting="environment"``) the pooled fit minimizes
``sum_e RSS_e / n_e``, so each environment counts once regardless of its
number of repetitions; duplicating the repetitions of an environment leaves
``theta`` unchanged. ``weighting="row"`` minimizes the plain pooled RSS.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DiscoveryError
from .experiment import Dataset
from .interventions import Clamp, Forcing, ReplaceOde, SetTrajectory
from .terms import Rhs, Term, pretty_rhs

logger = logging.getLogger(__name__)

ORDERING_RULE = "invariance asc, predictability asc, |S| asc, S lexicographic"


@dataclass(frozen=True)
class BasisSpec:
    """Which basis functions to generate over a parent set.

    ``degree`` is the maximal monomial degree (0, 1 or 2); ``mm_c2`` adds a
    Michaelis-Menten term ``x_i / (c2 + x_i)`` for every parent and every c2.
    """

    degree: int = 2
    mm_c2: tuple[float, ...] = ()

    def __post_init__(self):
        if self.degree not in (0, 1, 2):
            raise ValueError("basis degree must be 0, 1 or 2")
        object.__setattr__(self, "mm_c2", tuple(float(c) for c in self.mm_c2))
        if any(c <= 0 for c in self.mm_c2):
            raise ValueError("Michaelis-Menten constants must be positive")


@dataclass(frozen=True)
class CandidateModel:
    target: int
    parent_set: tuple[int, ...]
    basis: tuple[Term, ...]

    def __post_init__(self):
        if not self.basis:
            raise DiscoveryError("basis must be nonempty")
        allowed = set(self.parent_set)
        for term in self.basis:
            if not term.support <= allowed:
                raise DiscoveryError(f"basis term uses variables outside {self.parent_set}")

    def basis_labels(self, names) -> list[str]:
        return [pretty_rhs(Rhs((t,)), names).replace("[", "").replace("]", "")
                for t in self.basis]


@dataclass(frozen=True, eq=False)
class FittedModel:
    candidate: CandidateModel
    theta: np.ndarray
    theta_by_env: tuple[np.ndarray, ...]
    rss_pooled: float
    rss_by_env: tuple[float, ...]
    mse_pooled_by_env: tuple[float, ...]
    mse_own_by_env: tuple[float, ...]
    n_residuals: int
    grid_points: np.ndarray


@dataclass(frozen=True)
class RankedModel:
    fitted: FittedModel
    invariance: float | None
    predictability: float

    @property
    def parent_set(self) -> tuple[int, ...]:
        return self.fitted.candidate.parent_set


@dataclass(frozen=True)
class Ranking:
    entries: tuple[RankedModel, ...]
    target: int
    names: tuple[str, ...]
    invariance_available: bool
    ordering_rule: str = ORDERING_RULE
    target_intervened: tuple[str, ...] = ()

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, i) -> RankedModel:
        return self.entries[i]

    def parent_sets(self) -> list[tuple[int, ...]]:
        return [e.parent_set for e in self.entries]


def basis_terms(parent_set: Sequence[int], spec: BasisSpec = BasisSpec()) -> tuple[Term, ...]:
    """``{1} + {x_i} + {x_i x_j, i <= j}`` over ``parent_set`` (up to ``spec.degree``)."""
    S = sorted(parent_set)
    out = [Term.constant(1.0)]
    if spec.degree >= 1:
        out += [Term.monomial(1.0, {i: 1}) for i in S]
    if spec.degree >= 2:
        for a, i in enumerate(S):
            for j in S[a:]:
                out.append(Term.monomial(1.0, {i: 2} if i == j else {i: 1, j: 1}))
    for c2 in spec.mm_c2:
        out += [Term.michaelis_menten(1.0, i, c2) for i in S]
    return tuple(out)


def enumerate_candidates(d: int, target: int, p_max: int, basis_spec: BasisSpec = BasisSpec(),
                         include_self: bool = True) -> list[CandidateModel]:
    """All parent sets of size at most ``p_max``, ordered by size then lexicographically."""
    if not 0 <= target < d:
        raise DiscoveryError(f"target {target} out of range")
    if not 0 <= p_max <= d:
        raise DiscoveryError(f"p_max must lie in [0, d={d}]")
    pool = [k for k in range(d) if include_self or k != target]
    out = []
    for size in range(p_max + 1):
        for S in itertools.combinations(pool, size):
            out.append(CandidateModel(target, S, basis_terms(S, basis_spec)))
    if not out:
        raise DiscoveryError("empty search space")
    return out


def cumulative_trapezoid(values: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Running trapezoid integral along axis 0, starting at 0."""
    dt = np.diff(times)
    increments = 0.5 * (values[1:] + values[:-1]) * dt.reshape((-1,) + (1,) * (values.ndim - 1))
    out = np.zeros_like(values, dtype=float)
    np.cumsum(increments, axis=0, out=out[1:])
    return out


def design_matrix(candidate: CandidateModel, x: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Quadratures ``Q_b(t_l)`` for one repetition; ``x`` is ``(L, d)``, result ``(L, B)``."""
    g = np.column_stack([np.broadcast_to(Rhs((term,)).evaluate(x), (x.shape[0],))
                         for term in candidate.basis])
    return cumulative_trapezoid(g, times)


def _system(ds: Dataset, candidate: CandidateModel):
    times = ds.grid.points
    cube = ds.cube()
    Xs, ys = [], []
    for r in range(ds.n):
        Q = design_matrix(candidate, cube[r], times)
        y = cube[r, :, candidate.target]
        Xs.append(Q[1:])
        ys.append(y[1:] - y[0])
    return np.stack(Xs), np.stack(ys)


def _lstsq(X: np.ndarray, y: np.ndarray, w: np.ndarray | None = None) -> np.ndarray:
    if w is not None:
        sw = np.sqrt(w)
        X, y = X * sw[:, None], y * sw
    theta, *_ = np.linalg.lstsq(X, y, rcond=None)
    return theta


def fit_candidate(ds: Dataset, candidate: CandidateModel,
                  weighting: str = "environment") -> FittedModel:
    """Integral-matching least squares, pooled and per environment."""
    if ds.L < 2:
        raise DiscoveryError("need at least two grid points")
    if not 0 <= candidate.target < ds.d:
        raise DiscoveryError("target column not in dataset")
    if weighting not in ("environment", "row"):
        raise ValueError("weighting must be 'environment' or 'row'")
    X, y = _system(ds, candidate)  # (n, L-1, B), (n, L-1)
    n, m, B = X.shape
    counts = np.bincount(ds.row_env, minlength=len(ds.environments))
    Xf, yf = X.reshape(n * m, B), y.reshape(n * m)
    w = None
    if weighting == "environment":
        w = np.repeat(1.0 / counts[ds.row_env], m)
    theta = _lstsq(Xf, yf, w)
    resid = yf - Xf @ theta
    rss_pooled = float(resid @ resid)
    thetas, rss_env, mse_pooled, mse_own = [], [], [], []
    for e in range(len(ds.environments)):
        rows = np.nonzero(ds.row_env == e)[0]
        Xe, ye = X[rows].reshape(-1, B), y[rows].reshape(-1)
        th = _lstsq(Xe, ye)
        re_own = ye - Xe @ th
        re_pool = ye - Xe @ theta
        thetas.append(th)
        rss_env.append(float(re_own @ re_own))
        mse_own.append(float(re_own @ re_own) / ye.size)
        mse_pooled.append(float(re_pool @ re_pool) / ye.size)
    return FittedModel(candidate, theta, tuple(thetas), rss_pooled, tuple(rss_env),
                       tuple(mse_pooled), tuple(mse_own), n * m, ds.grid.points.copy())


def predictability_score(fitted: FittedModel) -> float:
    return fitted.rss_pooled / fitted.n_residuals


def invariance_score(fitted: FittedModel) -> float:
    """Worst-case excess loss of the pooled fit over per-environment fits.

    Raises :class:`DiscoveryError` for single-environment fits, where the
    score is undefined.
    """
    if len(fitted.theta_by_env) < 2:
        raise DiscoveryError("invariance needs at least two environments")
    excess = max(p - o for p, o in zip(fitted.mse_pooled_by_env, fitted.mse_own_by_env))
    return max(excess, 0.0)


def rank_models(ds: Dataset, target: int | str, p_max: int,
                basis_spec: BasisSpec = BasisSpec(), include_self: bool = True,
                weighting: str = "environment") -> Ranking:
    """Fit every candidate and sort them by the ranking rule.

    With a single environment the invariance score is unavailable; candidates
    are then ranked by predictability alone and the ranking is flagged.
    """
    if isinstance(target, str):
        if target not in ds.names:
            raise DiscoveryError(f"unknown target {target!r}; species: {', '.join(ds.names)}")
        target = ds.names.index(target)
    candidates = enumerate_candidates(ds.d, target, p_max, basis_spec, include_self)
    have_inv = len(ds.environments) >= 2
    if not have_inv:
        logger.warning("single environment: invariance unavailable, ranking by predictability")
    entries = []
    for cand in candidates:
        fitted = fit_candidate(ds, cand, weighting)
        inv = invariance_score(fitted) if have_inv else None
        entries.append(RankedModel(fitted, inv, predictability_score(fitted)))

    def key(e: RankedModel):
        S = e.parent_set
        return (e.invariance if have_inv else 0.0, e.predictability, len(S), S)

    entries.sort(key=key)
    hit = target_intervened_environments(ds, target)
    if hit:
        logger.warning("the dynamics of %s are intervened on in %s; scores are reported "
                       "as computed", ds.names[target], ", ".join(hit))
    return Ranking(tuple(entries), target, ds.names, have_inv, target_intervened=hit)


def target_intervened_environments(ds: Dataset, target: int) -> tuple[str, ...]:
    """Labels of environments that replace the target's equation directly.

    Rate changes are not inspected, because a dataset does not carry the
    reaction network that says which equations a rate enters.
    """
    name = ds.names[target]
    out = []
    for env in ds.environments:
        for iv in env.interventions:
            if isinstance(iv, (Clamp, Forcing, ReplaceOde, SetTrajectory)) and \
                    iv.target in (name, target):
                out.append(env.label)
                break
    return tuple(out)


def predict_new_environment(fitted: FittedModel, x_trajectory, y0: float,
                            times=None) -> np.ndarray:
    """``y0 + sum_b theta_b Q_b(t_l)`` along a new ``(L, d)`` predictor trajectory."""
    x = getattr(x_trajectory, "values", x_trajectory)
    x = np.asarray(x, dtype=float)
    if times is None:
        times = getattr(x_trajectory, "times", fitted.grid_points)
    times = np.asarray(times, dtype=float)
    if x.ndim != 2 or x.shape[0] != times.size:
        raise DiscoveryError(f"grid mismatch: trajectory has {x.shape[0]} points, "
                             f"grid has {times.size}")
    Q = design_matrix(fitted.candidate, x, times)
    return y0 + Q @ fitted.theta


def format_ranking(ranking: Ranking) -> str:
    """Tab-separated ranking table (see the package README for the format)."""
    names = ranking.names
    lines = [f"# target: {names[ranking.target]}",
             f"# ordering: {ranking.ordering_rule}"]
    if not ranking.invariance_available:
        lines.append("# invariance unavailable (single environment): ranked by predictability")
    if ranking.target_intervened:
        lines.append("# warning: target dynamics intervened on in "
                     + ", ".join(ranking.target_intervened))
    lines.append("rank\tparents\tinvariance\tpredictability\ttheta")
    for i, e in enumerate(ranking.entries, start=1):
        cand = e.fitted.candidate
        parents = ",".join(names[j] for j in cand.parent_set) or "-"
        inv = "NA" if e.invariance is None else repr(e.invariance)
        theta = ";".join(f"{lab}={v!r}" for lab, v in
                         zip(cand.basis_labels(names), e.fitted.theta.tolist()))
        lines.append(f"{i}\t{parents}\t{inv}\t{e.predictability!r}\t{theta}")
    return "\n".join(lines) + "\n"
