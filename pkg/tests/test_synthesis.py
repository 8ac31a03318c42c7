import json

import numpy as np
import pytest

from spatialregret.errors import NotASuperset, SolverFailed, StabilityLost
from spatialregret.evaluation import closed_loop_frf, spatial_regret_value
from spatialregret.frf import plant_frf_from_model
from spatialregret.grid import make_log_grid
from spatialregret.lti import (
    PowerGridParams,
    StateSpaceModel,
    assemble_networked,
    build_power_grid,
)
from spatialregret.structure import (
    ControllerFactors,
    SparsityPattern,
    build_factor_parameterization,
    chain_edges,
    pattern_from_graph,
    realize_factors,
    verify_pattern,
    zero_controller_theta,
)
from spatialregret.synthesis import (
    OracleData,
    SpatialRegret,
    SynthesisConfig,
    iterate_synthesis,
    return_difference_det,
    synthesize_oracle,
    winding_number,
)

TS = 0.02
FREE1 = SparsityPattern.from_text([["x"]])


def desk_param(order=2):
    return build_factor_parameterization(FREE1, order, 0.0, TS)


def minus_one_oracle(plant):
    """Static ``k = -1`` closes the desk loop to ``T = 0``."""
    param = build_factor_parameterization(FREE1, 1, 0.0, TS)
    factors = ControllerFactors(param, np.array([0.0, -1.0, 0.0, 1.0]))
    T_hat = closed_loop_frf(plant, factors.K(plant.grid))
    return OracleData(factors, T_hat, "hinf", 0.0, FREE1)


@pytest.mark.parametrize("objective", ["hinf", "h2"])
def test_desk_norm_optimum(desk_plant, objective):
    rep = iterate_synthesis(desk_plant, desk_param(), objective=objective, cfg=SynthesisConfig(max_iter=10))
    assert len(rep) <= 10
    assert rep.gammas[-1] <= 1e-3
    K = rep.factors.K(desk_plant.grid)
    np.testing.assert_allclose(K, -1.0, atol=1e-3)


def test_desk_regret_optimum(desk_plant):
    oracle = minus_one_oracle(desk_plant)
    np.testing.assert_allclose(oracle.T_hat.data, 0.0, atol=1e-15)
    rep = iterate_synthesis(
        desk_plant, desk_param(), objective=SpatialRegret(oracle), cfg=SynthesisConfig(max_iter=10)
    )
    assert rep.gammas[-1] <= 1e-3
    T = closed_loop_frf(desk_plant, rep.factors.K(desk_plant.grid))
    reg = spatial_regret_value(T, oracle.T_hat)
    assert reg.value == pytest.approx(rep.gammas[-1], abs=2e-6)


def test_max_iter_one_gives_one_record(desk_plant):
    for objective in ("hinf", "h2", SpatialRegret(minus_one_oracle(desk_plant))):
        rep = iterate_synthesis(desk_plant, desk_param(), objective=objective, cfg=SynthesisConfig(max_iter=1))
        assert len(rep) == 1


def test_model_free_certificate(desk_plant):
    rep = iterate_synthesis(desk_plant, desk_param(), objective="hinf", model=None)
    assert all(r.winding == 0 for r in rep.records)
    assert all(np.isnan(r.spectral_radius) for r in rep.records)


def test_unstable_initial_controller_is_rejected():
    # open-loop unstable scalar plant with K = 0
    model = StateSpaceModel([[1.2]], [[1.0, 1.0]], [[1.0], [1.0]], np.zeros((2, 2)), TS, n_w=1, n_z=1)
    g = make_log_grid(0.1, 100.0, 20, TS)
    plant = plant_frf_from_model(model, g)
    with pytest.raises(StabilityLost) as info:
        iterate_synthesis(plant, desk_param(), objective="hinf", model=model)
    assert info.value.iteration == 0
    assert str(info.value).startswith("iteration 0:")


def test_solver_failure_carries_iteration(desk_plant, monkeypatch):
    import spatialregret.synthesis as S

    real = S.solve_sdp

    def broken(problem, settings=None):
        res = real(problem, settings)
        res.status = "NumericalFailure"
        return res

    monkeypatch.setattr(S, "solve_sdp", broken)
    with pytest.raises(SolverFailed) as info:
        iterate_synthesis(desk_plant, desk_param(), objective="hinf")
    assert info.value.iteration == 1
    assert info.value.report is not None and len(info.value.report) == 0


def test_winding_number():
    t = np.linspace(0, np.pi, 400)
    assert winding_number(2 + np.exp(1j * t)) == 0
    assert winding_number(np.exp(1j * t)) == 1
    assert winding_number(np.exp(-2j * t)) == -2


def test_return_difference_of_zero_controller(desk_plant):
    param = desk_param()
    det = return_difference_det(realize_factors(param, desk_plant.grid), desk_plant, zero_controller_theta(param))
    np.testing.assert_allclose(det, 1.0)


def test_not_a_superset(desk_plant):
    target = SparsityPattern.from_text([["x"]])
    with pytest.raises(NotASuperset):
        synthesize_oracle(desk_plant, SparsityPattern.from_text([["0"]]), "hinf", target_pattern=target)
    with pytest.raises(NotASuperset):
        synthesize_oracle(desk_plant, SparsityPattern.from_text([["z^-1"]]), "hinf", target_pattern=target)


@pytest.fixture(scope="module")
def two_bus():
    model = assemble_networked(build_power_grid(PowerGridParams(bus_count=2)))
    grid = make_log_grid(1e-2, np.pi / TS, 30, TS)
    return model, plant_frf_from_model(model, grid)


def test_oracle_over_target_pattern_gives_zero_regret(two_bus):
    model, plant = two_bus
    target = pattern_from_graph(2, chain_edges(2), delay_steps=1)
    cfg = SynthesisConfig(max_iter=4)
    oracle, _ = synthesize_oracle(plant, target, "hinf", target, cfg=cfg, model=model)
    param = build_factor_parameterization(target, 2, 0.0, TS)
    rep = iterate_synthesis(plant, param, objective=SpatialRegret(oracle), cfg=SynthesisConfig(max_iter=3), model=model)
    T = closed_loop_frf(plant, rep.factors.K(plant.grid))
    reg = spatial_regret_value(T, oracle.T_hat)
    assert reg.value >= -1e-6
    # K = K_hat lies in the class, so the optimum is (near) zero
    assert rep.gammas[-1] <= 1e-4 * oracle.value**2


def test_two_bus_regret_iterations(two_bus):
    model, plant = two_bus
    target = pattern_from_graph(2, chain_edges(2), delay_steps=1)
    full = SparsityPattern.from_text([["x", "x"], ["x", "x"]])
    cfg = SynthesisConfig(max_iter=5)
    oracle, orep = synthesize_oracle(plant, full, "hinf", target, cfg=cfg, model=model)
    assert orep.monotone()
    param = build_factor_parameterization(target, 2, 0.0, TS)
    rep = iterate_synthesis(plant, param, objective=SpatialRegret(oracle), cfg=cfg, model=model)
    assert rep.monotone()
    assert all(r.spectral_radius < 1 for r in rep.records)
    assert verify_pattern(rep.factors, target, plant.grid).passed
    T = closed_loop_frf(plant, rep.factors.K(plant.grid))
    reg = spatial_regret_value(T, oracle.T_hat)
    assert reg.value >= -1e-6
    assert reg.value == pytest.approx(rep.gammas[-1], rel=1e-3, abs=1e-6)


def test_report_serialization_is_deterministic(desk_plant, tmp_path):
    outs = []
    for k in range(2):
        rep = iterate_synthesis(desk_plant, desk_param(), objective="hinf", cfg=SynthesisConfig(max_iter=3))
        rep.write_json(tmp_path / f"r{k}.json")
        rep.write_history_csv(tmp_path / f"h{k}.csv")
        outs.append(((tmp_path / f"r{k}.json").read_bytes(), (tmp_path / f"h{k}.csv").read_bytes()))
    assert outs[0] == outs[1]
    head = (tmp_path / "h0.csv").read_text().splitlines()[0]
    assert head == "iter,gamma,solve_time,spectral_radius"
    d = json.loads((tmp_path / "r0.json").read_text())
    assert d["objective"] == "hinf" and len(d["iterations"]) == len(rep)
    rep.write_history_csv(tmp_path / "t.csv", include_timing=True)
    solve_time = (tmp_path / "t.csv").read_text().splitlines()[1].split(",")[2]
    assert float(solve_time) > 0
