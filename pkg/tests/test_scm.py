import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from causalkinetics.errors import ModelError, SolvabilityError
from causalkinetics.scm import (StaticAssignment, StaticScm, intervene_static, linear_scm,
                                observe, sample_stochastic, samples_from_csv, samples_to_csv,
                                solve_deterministic)
from causalkinetics.terms import Rhs, parse_rhs


def det(weights, intercepts, names=("x1", "x2")):
    return linear_scm(names, weights, intercepts, 0.0, form="deterministic")


def chain3(sd=(1.0, 0.5, 0.8)):
    return linear_scm(["X1", "X2", "X3"], {("X1", "X2"): 2.0, ("X2", "X3"): -1.5},
                      intercepts=[0.0, 1.0, 0.5], noise_sd=sd)


def test_chain_solve():
    scm = det({("x1", "x2"): 3.0}, [2.0, 0.0])
    assert solve_deterministic(scm).tolist() == [2.0, 6.0]


def test_cycle_fixed_point():
    scm = det({("x2", "x1"): 0.5, ("x1", "x2"): 0.5}, [1.0, 0.0])
    assert not scm.is_acyclic()
    x = solve_deterministic(scm)
    assert abs(x[0] - 4 / 3) < 1e-9 and abs(x[1] - 2 / 3) < 1e-9


def test_divergent_cycle():
    scm = det({("x2", "x1"): 2.0, ("x1", "x2"): 2.0}, [0.0, 1.0])
    with pytest.raises(SolvabilityError, match="solvability assumption violated"):
        solve_deterministic(scm)


@settings(max_examples=30)
@given(st.lists(st.floats(-0.9, 0.9), min_size=3, max_size=3),
       st.lists(st.floats(-5, 5), min_size=4, max_size=4))
def test_fixed_point_agrees_with_topological_on_dags(w, b):
    names = ["a", "b", "c", "d"]
    scm = det({("a", "b"): w[0], ("b", "c"): w[1], ("a", "d"): w[2]}, b, names)
    exact = solve_deterministic(scm, "topological")
    np.testing.assert_allclose(solve_deterministic(scm, "fixed_point"), exact, atol=1e-8)


def test_topological_rejects_cycles():
    scm = det({("x2", "x1"): 0.5, ("x1", "x2"): 0.5}, [1.0, 0.0])
    with pytest.raises(SolvabilityError, match="cycle"):
        solve_deterministic(scm, "topological")


def test_structure_validation():
    with pytest.raises(ModelError, match="acyclic"):
        linear_scm(["a", "b"], {("a", "b"): 1.0, ("b", "a"): 1.0})
    with pytest.raises(ModelError, match="own parent"):
        StaticScm(("a",), (StaticAssignment(0, frozenset({0}), parse_rhs("x_0", d=1)),),
                  "deterministic")
    with pytest.raises(ModelError, match="time"):
        StaticAssignment(0, frozenset(), parse_rhs("t"))


def test_observe():
    state = np.array([1.0, -2.0, 3.0])
    assert np.all(observe(state, 0.0, 5, seed=1) == state)
    n = 10_000
    sd = np.array([0.5, 1.0, 2.0])
    obs = observe(state, sd, n, seed=7)
    np.testing.assert_allclose(obs.std(axis=0, ddof=1), sd, rtol=0.05)
    cov = np.cov(obs, rowvar=False)
    for i in range(3):
        for j in range(i):
            assert abs(cov[i, j]) < 3 / math.sqrt(n) * sd[i] * sd[j]
    assert np.array_equal(obs, observe(state, sd, n, seed=7))


def test_single_node_is_standard_normal():
    scm = linear_scm(["X"], {}, noise_sd=1.0)
    x = sample_stochastic(scm, 10_000, seed=3)[:, 0]
    assert stats.kstest(x, "norm").pvalue > 0.01


def test_chain_covariance():
    scm = linear_scm(["X1", "X2"], {("X1", "X2"): 2.0}, noise_sd=[1.5, 1.0])
    x = sample_stochastic(scm, 10_000, seed=5)
    n = x.shape[0]
    c = np.cov(x, rowvar=False)[0, 1]
    # Var of the product X1*X2 for this chain: 2 s1^4 + ... estimated from the sample
    prod = (x[:, 0] - x[:, 0].mean()) * (x[:, 1] - x[:, 1].mean())
    se = prod.std(ddof=1) / math.sqrt(n)
    assert abs(c - 2 * 1.5 ** 2) < 3 * se
    assert np.array_equal(x, sample_stochastic(scm, 10_000, seed=5))


def test_hard_intervention():
    scm = chain3()
    new = intervene_static(scm, "X2", value=4.0)
    x = sample_stochastic(new, 1000, seed=1)
    assert np.all(x[:, 1] == 4.0)
    assert new.graph.edges == {(1, 2)}
    # modularity: other assignments are the same objects' values
    assert new.assignments[0] == scm.assignments[0]
    assert new.assignments[2] == scm.assignments[2]


def test_interventional_mean_of_x3():
    new = intervene_static(chain3(), "X2", value=4.0)
    x3 = sample_stochastic(new, 10_000, seed=2)[:, 2]
    analytic = 0.5 - 1.5 * 4.0
    assert abs(x3.mean() - analytic) < 3 * 0.8 / math.sqrt(x3.size)


def _regress(y, x):
    X = np.column_stack([np.ones_like(x), x])
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    s2 = resid @ resid / (len(y) - 2)
    se = np.sqrt(np.diag(s2 * np.linalg.inv(X.T @ X)))
    return beta, se


def test_parent_regression_is_invariant_under_upstream_intervention():
    scm = chain3()
    soft = intervene_static(scm, "X1", function=Rhs.const(3.0), noise_sd=2.0)
    obs = sample_stochastic(scm, 10_000, seed=10)
    itv = sample_stochastic(soft, 10_000, seed=11)
    b1, s1 = _regress(obs[:, 2], obs[:, 1])
    b2, s2 = _regress(itv[:, 2], itv[:, 1])
    assert np.all(np.abs(b1 - b2) < 3 * np.sqrt(s1 ** 2 + s2 ** 2))
    assert abs(itv[:, 0].mean() - 3.0) < 3 * 2.0 / 100


def test_soft_intervention_updates_graph():
    new = intervene_static(chain3(), "X3", function=parse_rhs("x_0 + x_1", d=3))
    assert new.graph.edges == {(0, 1), (0, 2), (1, 2)}
    with pytest.raises(ModelError):
        intervene_static(chain3(), "X1", function=parse_rhs("x_2", d=3))


def test_intervention_creating_a_divergent_cycle():
    scm = det({("x1", "x2"): 2.0}, [0.0, 1.0])
    with pytest.raises(SolvabilityError):
        intervene_static(scm, "x1", function=parse_rhs("2 * x_1", d=2))


def test_samples_csv_round_trip():
    x = sample_stochastic(chain3(), 50, seed=1)
    text = samples_to_csv(["X1", "X2", "X3"], x, seed=1)
    names, back = samples_from_csv(text)
    assert names == ("X1", "X2", "X3")
    assert np.array_equal(back, x)
