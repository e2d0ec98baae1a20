"""Reference computations written independently of the package internals."""

import itertools

import numpy as np
from scipy.integrate import cumulative_trapezoid


def basis_values(x, S, degree=2):
    """Columns 1, x_i, x_i x_j (i <= j) over the sorted parent set S."""
    cols = [np.ones(x.shape[0])]
    if degree >= 1:
        cols += [x[:, i] for i in S]
    if degree >= 2:
        cols += [x[:, i] * x[:, j] for i, j in itertools.combinations_with_replacement(S, 2)]
    return np.column_stack(cols)


def candidate_scores(cube, row_env, times, target, S, degree=2):
    """(theta, invariance, predictability) for one parent set by integral matching."""
    Xs, ys = [], []
    for x in cube:
        Q = cumulative_trapezoid(basis_values(x, S, degree), times, axis=0, initial=0)
        Xs.append(Q[1:])
        ys.append(x[1:, target] - x[0, target])
    X, y = np.concatenate(Xs), np.concatenate(ys)
    m = len(times) - 1
    envs = sorted(set(row_env.tolist()))
    counts = {e: int(np.sum(row_env == e)) for e in envs}
    w = np.repeat([1.0 / counts[e] for e in row_env], m)
    sw = np.sqrt(w)
    theta = np.linalg.pinv(X * sw[:, None]) @ (y * sw)
    rss = float(np.sum((y - X @ theta) ** 2))
    excess = []
    for e in envs:
        mask = np.repeat(row_env == e, m)
        Xe, ye = X[mask], y[mask]
        own = np.linalg.pinv(Xe) @ ye
        excess.append(np.mean((ye - Xe @ theta) ** 2) - np.mean((ye - Xe @ own) ** 2))
    return theta, max(max(excess), 0.0), rss / y.size


def all_subsets(pool, p_max):
    for size in range(p_max + 1):
        yield from itertools.combinations(pool, size)


def oracle_table(cube, row_env, times, target, p_max, degree=2):
    d = cube.shape[2]
    return {S: candidate_scores(cube, row_env, times, target, S, degree)
            for S in all_subsets(range(d), p_max)}


def predict(theta, x, times, S, y0, degree=2):
    Q = cumulative_trapezoid(basis_values(x, S, degree), times, axis=0, initial=0)
    return y0 + Q @ theta
