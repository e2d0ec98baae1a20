import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from causalkinetics.errors import IntegrationError, ModelError
from causalkinetics.interventions import Clamp, ReplaceOde, SetTrajectory, apply_intervention
from causalkinetics.model import build_kinetic_model
from causalkinetics.simulate import (NegativeStateWarning, NoiseSpec, TimeGrid, Trajectory,
                                     add_measurement_noise, integrate_rk4, integrate_rk4_batch,
                                     simulate_sde)
from causalkinetics.terms import Rhs, parse_rhs


def chain_model():
    """x0 -> x1 -> x2 with linear decay."""
    drifts = [parse_rhs("-0.5 * x_0", d=3), parse_rhs("x_0 - x_1", d=3),
              parse_rhs("0.3 * x_1 - 0.2 * x_2", d=3)]
    return build_kinetic_model(drifts, [(0,), (0, 1), (1, 2)], initial=[2.0, 0.5, 0.1],
                               names=["X", "Y", "Z"])


def lv_invariant(x, k1=0.1, k2=0.05, k3=0.05):
    A, B = x[..., 0], x[..., 1]
    return k2 * A - k3 * np.log(A) + k2 * B - k1 * np.log(B)


def test_time_grid_validation():
    with pytest.raises(ValueError):
        TimeGrid([0.0])
    with pytest.raises(ValueError):
        TimeGrid([0.0, 0.0, 1.0])
    with pytest.raises(ValueError):
        TimeGrid([0.0, 1.0], substeps=0)
    g = TimeGrid.uniform(0, 1, 11, 3)
    assert len(g) == 11 and g.substeps == 3
    with pytest.raises(ValueError):
        g.points[0] = 5.0


def test_zero_dynamics_stay_exactly_constant():
    m = build_kinetic_model([Rhs.zero(), Rhs.zero()], [(), ()], initial=[0.1, -3.7])
    traj = integrate_rk4(m, TimeGrid.uniform(0, 50, 26, 7))
    assert np.all(traj.values == np.array([0.1, -3.7]))


def test_exponential_decay_accuracy():
    m = build_kinetic_model([parse_rhs("-1 * x_0", d=1)], [(0,)], initial=[1.0])
    g = TimeGrid.uniform(0, 2, 21, 10)
    traj = integrate_rk4(m, g)
    np.testing.assert_allclose(traj.values[:, 0], np.exp(-g.points), rtol=1e-9)


def test_initial_values_sit_at_first_grid_point():
    m = build_kinetic_model([parse_rhs("t", d=1)], [()], initial=[0.0])
    traj = integrate_rk4(m, TimeGrid([2.0, 3.0], 4))
    assert traj.values[0, 0] == 0.0
    assert math.isclose(traj.values[1, 0], (9 - 4) / 2, rel_tol=1e-12)


def test_lv_conserved_quantity(lv_model):
    traj = integrate_rk4(lv_model, TimeGrid.uniform(0, 100, 1001, 10))
    v = lv_invariant(traj.values)
    assert np.max(np.abs(v - v[0]) / abs(v[0])) < 1e-6


def test_rk4_convergence_order(lv_model):
    grid = TimeGrid([0.0, 10.0])
    ref = integrate_rk4(lv_model, grid, substeps=80).values[-1]
    e1 = np.max(np.abs(integrate_rk4(lv_model, grid, substeps=10).values[-1] - ref))
    e2 = np.max(np.abs(integrate_rk4(lv_model, grid, substeps=20).values[-1] - ref))
    assert 8 <= e1 / e2 <= 32


def test_batch_equals_single(lv_model):
    grid = TimeGrid.uniform(0, 5, 6, 4)
    x0 = np.array([[1.0, 1.5], [2.0, 0.5], [0.3, 3.0]])
    batch = integrate_rk4_batch(lv_model, grid, x0)
    for i in range(3):
        assert np.array_equal(batch[i], integrate_rk4(lv_model, grid, initial=x0[i]).values)


def test_clamp_is_bitwise_constant(lv_model):
    m = apply_intervention(lv_model, Clamp("B", 0.3))
    traj = integrate_rk4(m, TimeGrid.uniform(0, 20, 201, 10))
    assert np.all(traj.values[:, 1] == 0.3)


def test_trajectory_intervention_reproduces_sine():
    m = chain_model()
    zeta = parse_rhs("sin(1.0 * t + 0.0)")
    out = apply_intervention(m, SetTrajectory("Y", zeta))
    grid = TimeGrid.uniform(0, 10, 101, 100)
    traj = integrate_rk4(out, grid)
    assert np.max(np.abs(traj.values[:, 1] - np.sin(grid.points))) < 1e-6


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(["Y", "Z"]), st.floats(-2, 2))
def test_non_descendants_are_bit_identical(target, value):
    m = chain_model()
    grid = TimeGrid.uniform(0, 5, 11, 5)
    base = integrate_rk4(m, grid).values
    for iv in (Clamp(target, value), ReplaceOde(target, Rhs.const(value))):
        new = integrate_rk4(apply_intervention(m, iv), grid).values
        k = m.index(target)
        assert np.array_equal(new[:, :k], base[:, :k])


def test_blow_up_is_reported():
    m = build_kinetic_model([parse_rhs("x_0^2", d=1)], [(0,)], initial=[1.0])
    with pytest.raises(IntegrationError, match="solvability"):
        integrate_rk4(m, TimeGrid.uniform(0, 2, 21, 10))


def test_negative_state_warning():
    m = build_kinetic_model([parse_rhs("-1", d=1)], [()], initial=[0.5])
    with pytest.warns(NegativeStateWarning):
        integrate_rk4(m, TimeGrid.uniform(0, 1, 3), warn_negative=True)


def test_missing_initial_values(consumer_net):
    from causalkinetics.reactions import compile_mass_action
    with pytest.raises(ModelError, match="initial"):
        integrate_rk4(compile_mass_action(consumer_net), TimeGrid.uniform(0, 1, 3))


def ou_model(sigma=0.5):
    return build_kinetic_model([parse_rhs("-1 * x_0", d=1)], [(0,)], initial=[1.0],
                               diffusions=[Rhs.const(sigma)])


def test_sde_with_zero_diffusion_is_euler():
    m = ou_model(0.0)
    grid = TimeGrid.uniform(0, 1, 11, 10)
    paths = simulate_sde(m, grid, 3, seed=4)
    h = 0.01
    x, expected = 1.0, [1.0]
    for _ in range(10):
        for _ in range(10):
            x = x + (-x) * h
        expected.append(x)
    for p in paths:
        np.testing.assert_allclose(p.values[:, 0], expected, rtol=1e-13)


def test_sde_seed_determinism():
    grid = TimeGrid.uniform(0, 1, 5, 20)
    a = simulate_sde(ou_model(), grid, 4, seed=11)
    b = simulate_sde(ou_model(), grid, 4, seed=11)
    c = simulate_sde(ou_model(), grid, 4, seed=12)
    assert all(x == y for x, y in zip(a, b))
    assert not all(x == y for x, y in zip(a, c))


def test_sde_needs_diffusion(lv_model):
    with pytest.raises(ModelError):
        simulate_sde(lv_model, TimeGrid.uniform(0, 1, 3), 2, seed=0)
    with pytest.raises(ModelError):
        integrate_rk4(ou_model(), TimeGrid.uniform(0, 1, 3))


def test_ou_moments():
    paths = simulate_sde(ou_model(), TimeGrid([0.0, 1.0], 1000), 10_000, seed=2024)
    x = np.array([p.values[-1, 0] for p in paths])
    var = 0.25 / 2 * (1 - math.exp(-2))
    se = math.sqrt(var / x.size)
    assert abs(x.mean() - math.exp(-1)) < 3 * se
    assert abs(x.var(ddof=1) / var - 1) < 0.10


def test_measurement_noise():
    values = np.tile([1.0, 2.0], (2001, 1))
    traj = Trajectory(TimeGrid.uniform(0, 1, 2001), values)
    assert add_measurement_noise(traj, NoiseSpec(0.0), seed=1) == traj
    assert add_measurement_noise(traj, NoiseSpec(None), seed=1) == traj
    noisy = add_measurement_noise(traj, NoiseSpec((0.1, 0.4)), seed=3)
    sd = (noisy.values - values).std(axis=0, ddof=1)
    np.testing.assert_allclose(sd, [0.1, 0.4], rtol=0.05)
    assert add_measurement_noise(traj, NoiseSpec(0.1), seed=3) == \
        add_measurement_noise(traj, NoiseSpec(0.1), seed=3)
    with pytest.raises(ValueError):
        NoiseSpec(-1.0)
