import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from causalkinetics.errors import DatasetFormatError, IntegrationError
from causalkinetics.experiment import (Environment, dataset_from_csv, dataset_to_csv,
                                       export_csv, import_csv, run_experiment)
from causalkinetics.interventions import Clamp, SetInitial, SetRate
from causalkinetics.model import build_kinetic_model
from causalkinetics.simulate import NoiseSpec, TimeGrid, integrate_rk4
from causalkinetics.terms import parse_rhs

ENVS = [Environment("obs", (), 2),
        Environment("low", (SetRate("k1", 0.05), SetInitial("B", 2.0)), 3),
        Environment("held", (Clamp("A", 0.5),), 1)]


def small(lv_model, **kw):
    return run_experiment(lv_model, ENVS, TimeGrid.uniform(0, 4, 8, 5), **kw)


def test_matrix_layout(lv_model):
    ds = small(lv_model)
    assert ds.matrix.shape == (6, 2 * 8)
    assert ds.row_env.tolist() == [0, 0, 1, 1, 1, 2]
    assert ds.row_rep.tolist() == [1, 2, 1, 2, 3, 1]
    traj = integrate_rk4(lv_model, TimeGrid.uniform(0, 4, 8, 5))
    # component-major: column k * L + l
    assert np.array_equal(ds.matrix[0], traj.values.T.reshape(-1))
    assert np.array_equal(ds.values(0), traj.values)
    assert np.array_equal(ds.cube()[5, :, 0], np.full(8, 0.5))


def test_noise_free_repetitions_coincide(lv_model):
    ds = small(lv_model)
    assert np.array_equal(ds.matrix[2], ds.matrix[4])


def test_measurement_noise_streams_differ(lv_model):
    ds = small(lv_model, noise=NoiseSpec(0.01), seed=5)
    assert not np.array_equal(ds.matrix[2], ds.matrix[3])
    again = small(lv_model, noise=NoiseSpec(0.01), seed=5)
    assert dataset_to_csv(ds) == dataset_to_csv(again)


def test_initial_jitter_spares_intervened_components(lv_model):
    ds = small(lv_model, initial_sd=0.1, seed=3)
    cube = ds.cube()
    assert len({cube[r, 0, 0] for r in range(5)}) == 5
    assert np.all(cube[ds.rows_of("low"), 0, 1] == 2.0)
    assert cube[5, 0, 0] == 0.5


def test_csv_round_trip(lv_model, tmp_path):
    ds = small(lv_model, noise=NoiseSpec(0.02), seed=9)
    text = dataset_to_csv(ds)
    back = dataset_from_csv(text)
    assert back == ds
    assert dataset_to_csv(back) == text
    export_csv(ds, tmp_path / "d.csv")
    assert import_csv(tmp_path / "d.csv") == ds


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_csv_round_trip_property(reps, L, seed):
    m = build_kinetic_model([parse_rhs("-0.3 * x_0", d=1)], [(0,)], initial=[1.0], names=["P"])
    ds = run_experiment(m, [("a", ()), ("b", (SetInitial("P", 2.0),))],
                        TimeGrid.uniform(0, 1, L), NoiseSpec(0.5), seed=seed, reps=reps)
    assert dataset_from_csv(dataset_to_csv(ds)) == ds


def _csv_body(ds):
    return [ln for ln in dataset_to_csv(ds).splitlines() if not ln.startswith("#")]


def test_missing_environment_column(lv_model):
    ds = small(lv_model)
    header = [ln for ln in dataset_to_csv(ds).splitlines() if ln.startswith("#")]
    body = [",".join(ln.split(",")[1:]) for ln in _csv_body(ds)]
    with pytest.raises(DatasetFormatError, match="environments required"):
        dataset_from_csv("\n".join(header + body) + "\n")


@pytest.mark.parametrize("mutate, msg", [
    (lambda ls: ls[:-1] + [ls[-1] + ",1.0"], "cells"),
    (lambda ls: ls[:-1] + [ls[-1].replace("0.5", "abc", 1)], "non-numeric"),
    (lambda ls: [ls[0].replace("A_t1", "A_t0")] + ls[1:], "header"),
    (lambda ls: ls[:-1] + ["mystery" + ls[-1][4:]], "undeclared"),
])
def test_malformed_csv(lv_model, mutate, msg):
    ds = small(lv_model)
    text = dataset_to_csv(ds).splitlines()
    header = [ln for ln in text if ln.startswith("#")]
    body = mutate(_csv_body(ds))
    with pytest.raises(DatasetFormatError, match=msg):
        dataset_from_csv("\n".join(header + body) + "\n")


def test_csv_without_env_comments_infers_labels(lv_model):
    ds = small(lv_model)
    lines = [ln for ln in dataset_to_csv(ds).splitlines() if not ln.startswith("# env")]
    back = dataset_from_csv("\n".join(lines) + "\n")
    assert back.labels == ["obs", "low", "held"]
    assert np.array_equal(back.matrix, ds.matrix)


def test_integration_failure_names_environment():
    m = build_kinetic_model([parse_rhs("x_0^2", d=1)], [(0,)], initial=[0.1], names=["X"])
    with pytest.raises(IntegrationError, match="'boom' repetition 1"):
        run_experiment(m, [("calm", ()), ("boom", (SetInitial("X", 5.0),))],
                       TimeGrid.uniform(0, 1, 5, 10))


def test_environment_label_validation():
    with pytest.raises(ValueError):
        Environment("has space")
    with pytest.raises(ValueError):
        Environment("ok", (), 0)
