import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import solve_discrete_lyapunov

from spatialregret.errors import DimensionMismatch, PoleOnGrid, SingularDY
from spatialregret.grid import make_linear_grid
from spatialregret.lti import (
    NetworkedSystem,
    PowerGridParams,
    StateSpaceModel,
    assemble_networked,
    build_power_grid,
    closed_loop_spectral_radius,
    feedback_interconnection,
    frequency_response,
    realize_controller,
    simulate,
)
from spatialregret.structure import (
    ControllerFactors,
    SparsityPattern,
    build_factor_parameterization,
)


def scalar(a, b=1.0, c=1.0, d=0.0, Ts=1.0):
    return StateSpaceModel([[a]], [[b]], [[c]], [[d]], Ts)


def test_single_node_and_decoupled_assembly():
    one = NetworkedSystem([1], [1], [1], [0], [0], 0.1, set(), {"A": {(0, 0): [[0.3]]}})
    assert assemble_networked(one).A.tolist() == [[0.3]]
    two = NetworkedSystem(
        [1, 2], [1, 1], [1, 1], [0, 0], [0, 0], 0.1, set(),
        {"A": {(0, 0): [[0.3]], (1, 1): np.eye(2) * 0.5}},
    )
    A = assemble_networked(two).A
    np.testing.assert_array_equal(A, np.diag([0.3, 0.5, 0.5]))


def test_assembly_rejects_non_neighbour_blocks():
    sys = NetworkedSystem([1, 1], [1, 1], [1, 1], [0, 0], [0, 0], 0.1, set(), {"A": {(0, 1): [[1.0]]}})
    with pytest.raises(DimensionMismatch):
        assemble_networked(sys)
    bad_shape = NetworkedSystem([1], [1], [1], [0], [0], 0.1, set(), {"A": {(0, 0): np.eye(2)}})
    with pytest.raises(DimensionMismatch):
        assemble_networked(bad_shape)


def test_power_grid_blocks():
    # pure line coupling (no ground term) gives the textbook interior-bus block
    sys = build_power_grid(PowerGridParams(ground_coupling=0.0))
    np.testing.assert_allclose(sys.blocks["A"][(2, 2)], [[1, 0.02], [-0.4, 0.98]])
    np.testing.assert_allclose(sys.blocks["A"][(2, 1)], [[0, 0], [0.2, 0]])
    np.testing.assert_allclose(sys.blocks["B2"][(2, 2)], [[0], [0.01]])
    # default: each bus also carries its own coupling-sized stiffness
    sys = build_power_grid()
    np.testing.assert_allclose(sys.blocks["A"][(2, 2)], [[1, 0.02], [-0.6, 0.98]])
    np.testing.assert_allclose(sys.blocks["A"][(0, 0)], [[1, 0.02], [-0.4, 0.98]])


def test_power_grid_structure(bus_model):
    A = bus_model.A
    assert A.shape == (10, 10)
    for i in range(5):
        for j in range(5):
            blk = A[2 * i : 2 * i + 2, 2 * j : 2 * j + 2]
            if abs(i - j) > 1:
                assert not blk.any()
            elif abs(i - j) == 1:
                assert blk[1, 0] == pytest.approx(0.2)
    assert (bus_model.n_w, bus_model.n_z, bus_model.m, bus_model.p) == (5, 10, 5, 5)


def test_power_grid_open_loop_stable(bus_model):
    assert bus_model.spectral_radius() < 1
    # the pure Laplacian coupling leaves a mode on the unit circle
    lap = assemble_networked(build_power_grid(PowerGridParams(ground_coupling=0.0)))
    assert lap.spectral_radius() == pytest.approx(1.0, abs=1e-12)


def test_simulate_examples():
    m = scalar(0.5)
    tr = simulate(m, T=20)
    assert not tr.x.any() and not tr.y.any()
    integ = scalar(1.0)
    u = np.zeros(6)
    u[0] = 1
    tr = simulate(integ, u=u)
    np.testing.assert_array_equal(tr.x[:, 0], [0, 1, 1, 1, 1, 1])


def test_simulate_recursion_and_determinism(bus_model):
    rng = np.random.default_rng(3)
    u, w = rng.standard_normal((50, 5)), rng.standard_normal((50, 5))
    x0 = rng.standard_normal(10)
    a = simulate(bus_model, u=u, w=w, x0=x0)
    b = simulate(bus_model, u=u, w=w, x0=x0)
    np.testing.assert_array_equal(a.x, b.x)
    v = np.hstack([w, u])
    np.testing.assert_allclose(a.x[1:], a.x[:-1] @ bus_model.A.T + v[:-1] @ bus_model.B.T, atol=1e-12)
    np.testing.assert_allclose(a.z, a.x @ bus_model.C1.T + w @ bus_model.D11.T + u @ bus_model.D12.T)


def test_impulse_energy_parseval(bus_model):
    # oracle: exact energy from the observability Gramian of the w1 -> z channel
    sub = bus_model.block(1, 1)
    b, c, d = sub.B[:, :1], sub.C, sub.D[:, :1]
    Wo = solve_discrete_lyapunov(sub.A.T, c.T @ c)
    exact = float(np.trace(d.T @ d + b.T @ Wo @ b))
    w = np.zeros((4000, 5))
    w[0, 0] = 1
    tr = simulate(bus_model, w=w)
    assert np.sum(tr.z**2) == pytest.approx(exact, rel=1e-2)
    g = make_linear_grid(0, np.pi / 0.02, 40001, 0.02)
    col = frequency_response(sub, g)[:, :, 0]
    quad = g.quadrature_weights() @ np.sum(np.abs(col) ** 2, axis=1)
    assert quad == pytest.approx(exact, rel=1e-2)


def test_frequency_response_examples():
    static = StateSpaceModel(np.zeros((1, 1)), np.zeros((1, 2)), np.zeros((1, 1)), [[1.0, 2.0]], 1.0)
    np.testing.assert_allclose(frequency_response(static, [0.0, 1.0])[:, 0], [[1, 2], [1, 2]])
    m = scalar(0.5)
    assert frequency_response(m, [0.0])[0, 0, 0] == pytest.approx(2.0)
    assert frequency_response(m, [np.pi])[0, 0, 0] == pytest.approx(-2 / 3)
    with pytest.raises(PoleOnGrid):
        frequency_response(scalar(1.0), [0.0, 1.0])


def test_feedback_examples(bus_model):
    plant = StateSpaceModel([[0.5]], [[0.0, 1.0]], [[1.0], [1.0]], np.zeros((2, 2)), 1.0, n_w=1, n_z=1)
    assert closed_loop_spectral_radius(plant, StateSpaceModel(np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), [[-0.5]], 1.0)) == pytest.approx(0)
    zero_k = StateSpaceModel(np.zeros((0, 0)), np.zeros((0, 5)), np.zeros((5, 0)), np.zeros((5, 5)), 0.02)
    assert closed_loop_spectral_radius(bus_model, zero_k) == pytest.approx(bus_model.spectral_radius())


def _scalar_factors(theta, order=1):
    par = build_factor_parameterization(SparsityPattern.from_text([["x"]]), order, 0.0, 1.0)
    return ControllerFactors(par, theta)


def test_realize_controller_examples():
    # theta = [X_B, X_D, Y_B, Y_D]: X = 1/z, Y = (z - 0.5)/z
    K = realize_controller(_scalar_factors([1.0, 0.0, -0.5, 1.0]))
    om = np.linspace(0, 3, 7)
    np.testing.assert_allclose(
        frequency_response(K, om)[:, 0, 0], 1 / (np.exp(1j * om) - 0.5), atol=1e-12
    )
    Z = realize_controller(_scalar_factors([0.0, 0.0, 0.0, 1.0]))
    np.testing.assert_array_equal(frequency_response(Z, om), 0)
    with pytest.raises(SingularDY):
        realize_controller(_scalar_factors([1.0, 0.0, 1.0, 0.0]))


@given(st.integers(0, 2**32 - 1))
def test_realization_matches_factor_ratio(seed):
    rng = np.random.default_rng(seed)
    pat = SparsityPattern.from_text([["x", "z^-1"], ["0", "x"]])
    par = build_factor_parameterization(pat, 2, 0.3, 0.02)
    theta = rng.standard_normal(par.n_theta)
    for k, s in enumerate(par.slots):
        if s.factor == "Y" and s.part == "D":
            theta[k] = 2.0 + abs(theta[k])
    f = ControllerFactors(par, theta)
    g = make_linear_grid(0.1, 150, 30, 0.02)
    K = frequency_response(realize_controller(f), g)
    np.testing.assert_allclose(K, f.K(g), atol=1e-9 * max(1, np.abs(K).max()))


@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_networked_frequency_response_matches_direct(seed, nodes):
    rng = np.random.default_rng(seed)
    nx = list(rng.integers(1, 3, nodes))
    edges = {(j, i) for i in range(nodes) for j in range(nodes) if i != j and rng.random() < 0.5}
    neigh = {i: {i} | {j for (j, k) in edges if k == i} for i in range(nodes)}
    blocks = {"A": {}, "B2": {}, "C2": {}, "D22": {}}
    for i in range(nodes):
        for j in neigh[i]:
            blocks["A"][(i, j)] = 0.3 * rng.standard_normal((nx[i], nx[j])) / nodes
            blocks["B2"][(i, j)] = rng.standard_normal((nx[i], 1))
            blocks["C2"][(i, j)] = rng.standard_normal((1, nx[j]))
            blocks["D22"][(i, j)] = rng.standard_normal((1, 1))
    sys = NetworkedSystem(nx, [1] * nodes, [1] * nodes, [0] * nodes, [0] * nodes, 1.0, edges, blocks)
    model = assemble_networked(sys)
    if model.spectral_radius() >= 0.999:
        return
    # oracle: solve the node equations with an explicit per-node block loop
    z = np.exp(0.7j)
    off = np.concatenate([[0], np.cumsum(nx)])
    n = off[-1]
    M = np.zeros((n, n), complex)
    Bf = np.zeros((n, nodes), complex)
    Cf = np.zeros((nodes, n), complex)
    Df = np.zeros((nodes, nodes), complex)
    for i in range(nodes):
        for j in range(nodes):
            blk = blocks["A"].get((i, j), np.zeros((nx[i], nx[j])))
            M[off[i] : off[i + 1], off[j] : off[j + 1]] = (z if i == j else 0) * np.eye(nx[i], nx[j]) - blk
            Bf[off[i] : off[i + 1], j] = blocks["B2"].get((i, j), np.zeros((nx[i], 1)))[:, 0]
            Cf[i, off[j] : off[j + 1]] = blocks["C2"].get((i, j), np.zeros((1, nx[j])))[0]
            Df[i, j] = blocks["D22"].get((i, j), np.zeros((1, 1)))[0, 0]
    direct = Cf @ np.linalg.solve(M, Bf) + Df
    np.testing.assert_allclose(frequency_response(model, [0.7])[0], direct, atol=1e-10)


def test_trace_csv(tmp_path):
    tr = simulate(scalar(0.5), u=np.ones(3))
    tr.write_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "t,x0,u0,y0"
    assert lines[2] == "1,1,1,1"
