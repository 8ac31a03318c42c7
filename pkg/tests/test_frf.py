import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spatialregret.errors import GridMismatch, SingularInputSpectrum
from spatialregret.frf import (
    ExperimentBatch,
    FrfBlock,
    GeneralizedPlantFrf,
    assemble_generalized_plant,
    check_assumptions,
    estimate_frf,
    impulse_experiments,
    multisine_experiments,
    plant_frf_from_model,
    read_experiment_csvs,
    read_plant_csv,
    write_experiment_csvs,
    write_plant_csv,
)
from spatialregret.grid import make_log_grid
from spatialregret.lti import StateSpaceModel, frequency_response

TS = 0.02
GRID = make_log_grid(1e-2, np.pi / TS, 60, TS)


def impulse_batch(h: np.ndarray) -> ExperimentBatch:
    """Scalar impulse experiment with response ``h``."""
    u = np.zeros_like(h)
    u[0] = 1
    return ExperimentBatch(u[:, None, None], h[:, None, None], TS)


def test_identity_plant():
    U = np.zeros((10, 2, 2))
    U[0] = np.eye(2)
    G = estimate_frf(ExperimentBatch(U, U.copy(), TS), GRID)
    np.testing.assert_allclose(G.data, np.broadcast_to(np.eye(2), (len(GRID), 2, 2)), atol=1e-14)


def test_unit_delay():
    h = np.zeros(10)
    h[1] = 1
    G = estimate_frf(impulse_batch(h), GRID)
    np.testing.assert_allclose(G.data[:, 0, 0], np.exp(-1j * GRID.omegas * TS), atol=1e-14)


def test_first_order_iir():
    m = StateSpaceModel([[0.5]], [[1.0]], [[1.0]], [[0.0]], TS)
    G = estimate_frf(impulse_experiments(m, 2000), GRID)
    assert np.abs(G.data - frequency_response(m, GRID)).max() <= 1e-6


def test_singular_input_spectrum():
    with pytest.raises(SingularInputSpectrum):
        estimate_frf(ExperimentBatch(np.zeros((5, 1, 1)), np.zeros((5, 1, 1)), TS), GRID)


@given(st.integers(0, 2**32 - 1), st.integers(1, 30))
def test_fir_exact(seed, L):
    rng = np.random.default_rng(seed)
    h = np.concatenate([rng.standard_normal(L), np.zeros(5)])
    G = estimate_frf(impulse_batch(h), GRID)
    exact = np.exp(-1j * np.outer(GRID.omegas * TS, np.arange(L))) @ h[:L]
    np.testing.assert_allclose(G.data[:, 0, 0], exact, atol=1e-12)


@given(st.floats(-0.9, 0.9), st.floats(0, np.pi))
def test_iir_convergence(r, phi):
    # real second-order system with poles r e^{+-j phi}
    A = r * np.array([[np.cos(phi), -np.sin(phi)], [np.sin(phi), np.cos(phi)]])
    m = StateSpaceModel(A, [[1.0], [0.0]], [[1.0, 1.0]], [[0.3]], TS)
    G = estimate_frf(impulse_experiments(m, 2000), GRID)
    assert np.abs(G.data - frequency_response(m, GRID)).max() <= 1e-6


def test_multisine_matches_after_settling():
    m = StateSpaceModel([[0.5]], [[1.0]], [[1.0]], [[0.0]], TS)
    a = multisine_experiments(m, 512, seed=7)
    b = multisine_experiments(m, 512, seed=7)
    np.testing.assert_array_equal(a.U, b.U)
    assert not np.array_equal(a.U, multisine_experiments(m, 512, seed=8).U)
    G = estimate_frf(a, GRID)
    assert np.all(np.isfinite(G.data))


def test_assemble_from_model(bus_model):
    full = frequency_response(bus_model, GRID)
    G22 = FrfBlock(GRID, full[:, 10:, 5:])
    plant = assemble_generalized_plant(G22, bus_model)
    np.testing.assert_allclose(plant.full(), full, atol=1e-14)
    assert (plant.n_z, plant.n_w, plant.p, plant.m) == (10, 5, 5, 5)


def test_assemble_from_data(bus_model):
    # N_s long enough for the slowest open-loop mode to decay below 1e-8
    G22 = estimate_frf(impulse_experiments(bus_model, 30000), GRID)
    plant = assemble_generalized_plant(G22, bus_model)
    exact = frequency_response(bus_model, GRID)[:, 10:, 5:]
    assert np.abs(plant.G22 - exact).max() <= 1e-6


def test_assemble_grid_mismatch(bus_model):
    plant = plant_frf_from_model(bus_model, GRID)
    other = make_log_grid(1e-2, np.pi / TS, 61, TS)
    blocks = {n: plant.block(n) for n in ("G11", "G12", "G21")}
    with pytest.raises(GridMismatch):
        assemble_generalized_plant(FrfBlock(other, np.zeros((61, 5, 5))), blocks)


def test_assumptions_on_bus_plant(bus_model):
    g = make_log_grid(1e-2, np.pi / TS, 600, TS)
    rep = check_assumptions(plant_frf_from_model(bus_model, g))
    assert rep.a1_pass and rep.a2_pass


def _scalar_plant(g12, g22):
    n = len(GRID)
    one = np.ones((n, 1, 1))
    return GeneralizedPlantFrf(GRID, one, g12 * one, one, g22)


def test_assumption_violations():
    rep = check_assumptions(_scalar_plant(0.0, np.zeros((len(GRID), 1, 1))))
    assert not rep.a1_pass and rep.a1_violations.size == len(GRID)
    w0 = GRID.omegas[20]
    z = GRID.z
    g22 = (1 / (z - np.exp(1j * w0 * TS) * (1 - 1e-14)))[:, None, None]
    rep = check_assumptions(_scalar_plant(1.0, g22))
    assert rep.a1_pass and not rep.a2_pass
    assert rep.a2_violations.tolist() == [w0]


@given(st.integers(0, 2**32 - 1), st.floats(1e-8, 1e-1), st.floats(1, 1e3), st.floats(0.1, 10), st.floats(1, 100))
def test_assumption_monotone(seed, tol, tol_factor, bound, bound_factor):
    rng = np.random.default_rng(seed)
    n = len(GRID)
    G12 = rng.standard_normal((n, 3, 2)) * rng.uniform(0, 1, (n, 1, 2)) ** 4
    plant = GeneralizedPlantFrf(
        GRID, rng.standard_normal((n, 3, 1)) * 3, G12, rng.standard_normal((n, 2, 1)), np.zeros((n, 2, 2))
    )
    tight = check_assumptions(plant, tol * tol_factor, bound)
    loose = check_assumptions(plant, tol, bound * bound_factor)
    assert set(loose.a1_violations) <= set(tight.a1_violations)
    assert set(loose.a2_violations) <= set(tight.a2_violations)
    assert tight.passed <= loose.passed


def test_plant_csv_roundtrip(tmp_path, bus_model):
    plant = plant_frf_from_model(bus_model, GRID)
    write_plant_csv(tmp_path / "plant.csv", plant)
    back = read_plant_csv(tmp_path / "plant.csv")
    assert back.grid.same_as(plant.grid)
    np.testing.assert_array_equal(back.full(), plant.full())
    header = (tmp_path / "plant.csv").read_text().splitlines()[1]
    assert header == "omega,block,row,col,re,im"


def test_experiment_csv_roundtrip(tmp_path, bus_model):
    batch = impulse_experiments(bus_model, 50)
    paths = write_experiment_csvs(tmp_path, batch)
    assert len(paths) == 5
    assert len(paths[0].read_text().splitlines()) == 2 + 50 * 5
    back = read_experiment_csvs(paths)
    np.testing.assert_array_equal(back.U, batch.U)
    np.testing.assert_array_equal(back.Y, batch.Y)
    assert back.Ts == TS
