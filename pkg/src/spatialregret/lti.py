"""Discrete-time state-space models, networked assembly, simulation and
frequency response.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    IllPosedInterconnection,
    PoleOnGrid,
    SingularDY,
)
from .grid import FrequencyGrid

#: condition number of (zI - A) above which a grid point is treated as a pole
POLE_COND = 1e13


@dataclass(frozen=True)
class StateSpaceModel:
    """``x+ = A x + B v``, ``o = C x + D v`` with sampling time ``Ts``.

    When ``n_w``/``n_z`` are nonzero the model is a generalized plant with
    inputs ``v = [w; u]`` and outputs ``o = [z; y]``; the partitioned blocks
    are exposed as ``B1, B2, C1, C2, D11, D12, D21, D22``.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    Ts: float
    n_w: int = 0
    n_z: int = 0

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        A = A.reshape(0, 0) if A.size == 0 else np.atleast_2d(A)
        n = A.shape[0]
        D = np.atleast_2d(np.asarray(self.D, dtype=float))
        B = np.asarray(self.B, dtype=float)
        C = np.asarray(self.C, dtype=float)
        if B.ndim != 2 or B.size == 0:
            B = B.reshape(n, -1) if B.size else np.zeros((n, D.shape[1]))
        if C.ndim != 2 or C.size == 0:
            C = C.reshape(-1, n) if C.size else np.zeros((D.shape[0], n))
        for name, val in (("A", A), ("B", B), ("C", C), ("D", D)):
            object.__setattr__(self, name, val)
            if not np.all(np.isfinite(val)):
                raise ValueError(f"{name} has non-finite entries")
        if A.shape != (n, n) or B.shape[0] != n or C.shape[1] != n:
            raise DimensionMismatch(
                f"inconsistent shapes A{A.shape} B{B.shape} C{C.shape} D{D.shape}"
            )
        if D.shape != (C.shape[0], B.shape[1]):
            raise DimensionMismatch(f"D must be {(C.shape[0], B.shape[1])}, got {D.shape}")
        if self.Ts <= 0:
            raise ValueError("Ts must be positive")
        if not (0 <= self.n_w <= B.shape[1] and 0 <= self.n_z <= C.shape[0]):
            raise DimensionMismatch("partition sizes exceed model dimensions")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.C.shape[0]

    @property
    def m(self) -> int:
        """Number of control inputs."""
        return self.n_inputs - self.n_w

    @property
    def p(self) -> int:
        """Number of measured outputs."""
        return self.n_outputs - self.n_z

    B1 = property(lambda s: s.B[:, : s.n_w])
    B2 = property(lambda s: s.B[:, s.n_w :])
    C1 = property(lambda s: s.C[: s.n_z, :])
    C2 = property(lambda s: s.C[s.n_z :, :])
    D11 = property(lambda s: s.D[: s.n_z, : s.n_w])
    D12 = property(lambda s: s.D[: s.n_z, s.n_w :])
    D21 = property(lambda s: s.D[s.n_z :, : s.n_w])
    D22 = property(lambda s: s.D[s.n_z :, s.n_w :])

    def subsystem(self, outputs: slice | Sequence[int], inputs: slice | Sequence[int]):
        """Plain model restricted to the chosen output rows and input columns."""
        return StateSpaceModel(
            self.A, self.B[:, inputs], self.C[outputs, :], self.D[outputs][:, inputs], self.Ts
        )

    def block(self, i: int, j: int) -> "StateSpaceModel":
        """``G_ij`` of the 2x2 generalized-plant partition (1-based as in G11..G22)."""
        rows = slice(0, self.n_z) if i == 1 else slice(self.n_z, self.n_outputs)
        cols = slice(0, self.n_w) if j == 1 else slice(self.n_w, self.n_inputs)
        return self.subsystem(rows, cols)

    def spectral_radius(self) -> float:
        if self.n == 0:
            return 0.0
        return float(np.max(np.abs(np.linalg.eigvals(self.A))))


@dataclass
class SimulationTrace:
    x: np.ndarray  # (T, n)
    u: np.ndarray  # (T, m)
    w: np.ndarray  # (T, n_w)
    y: np.ndarray  # (T, p)
    z: np.ndarray  # (T, n_z)

    def __len__(self) -> int:
        return self.x.shape[0]

    def write_csv(self, path) -> None:
        """Header ``t,x0..,u0..,w0..,y0..,z0..``; 17 significant digits."""
        cols = []
        for name in ("x", "u", "w", "y", "z"):
            cols += [f"{name}{k}" for k in range(getattr(self, name).shape[1])]
        data = np.hstack([self.x, self.u, self.w, self.y, self.z])
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t"] + cols)
            for t, row in enumerate(data):
                writer.writerow([t] + [f"{v:.17g}" for v in row])


def _signal(seq, T: int, width: int, name: str) -> np.ndarray:
    if seq is None:
        return np.zeros((T, width))
    arr = np.asarray(seq, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None] if width == 1 else arr.reshape(-1, width)
    if arr.shape[0] < T or arr.shape[1] != width:
        raise DimensionMismatch(f"{name} must have shape (>= {T}, {width}), got {arr.shape}")
    return arr[:T]


def state_recursion(A: np.ndarray, Bv: np.ndarray, x0: np.ndarray) -> np.ndarray:
    """States ``x_0..x_{T-1}`` of ``x+ = A x + Bv[t]`` (``Bv`` already multiplied)."""
    T = Bv.shape[0]
    x = np.empty((T, A.shape[0]))
    xt = np.array(x0, dtype=float)
    At = A.T
    for t in range(T):
        x[t] = xt
        xt = xt @ At + Bv[t]
    return x


def simulate(model: StateSpaceModel, u=None, w=None, x0=None, T: int | None = None) -> SimulationTrace:
    """Run the generalized-plant recursion for ``T`` steps from ``x0``."""
    if T is None:
        lengths = [np.shape(s)[0] for s in (u, w) if s is not None]
        if not lengths:
            raise ValueError("T is required when no input sequence is given")
        T = min(lengths)
    u = _signal(u, T, model.m, "u")
    w = _signal(w, T, model.n_w, "w")
    if x0 is None:
        x0 = np.zeros(model.n)
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.size != model.n:
        raise DimensionMismatch(f"x0 must have length {model.n}")
    v = np.hstack([w, u])
    x = state_recursion(model.A, v @ model.B.T, x0)
    o = x @ model.C.T + v @ model.D.T
    return SimulationTrace(x=x, u=u, w=w, y=o[:, model.n_z :], z=o[:, : model.n_z])


def frequency_response(model: StateSpaceModel, grid: FrequencyGrid | np.ndarray, Ts=None) -> np.ndarray:
    """``C (zI - A)^{-1} B + D`` at every grid point; shape ``(nf, outputs, inputs)``."""
    if isinstance(grid, FrequencyGrid):
        z = grid.z
        omegas = grid.omegas
    else:
        omegas = np.asarray(grid, dtype=float).reshape(-1)
        z = np.exp(1j * omegas * (model.Ts if Ts is None else Ts))
    nf = z.size
    if model.n == 0:
        return np.broadcast_to(model.D.astype(complex), (nf,) + model.D.shape).copy()
    eye = np.eye(model.n)
    M = z[:, None, None] * eye - model.A
    cond = np.linalg.cond(M)
    bad = ~np.isfinite(cond) | (cond > POLE_COND)
    if np.any(bad):
        raise PoleOnGrid(float(omegas[np.argmax(bad)]))
    X = np.linalg.solve(M, np.broadcast_to(model.B.astype(complex), (nf,) + model.B.shape))
    return model.C @ X + model.D


# ---------------------------------------------------------------------------
# networked systems

_BLOCK_NAMES = ("A", "B1", "B2", "C1", "C2", "D11", "D12", "D21", "D22")


@dataclass
class NetworkedSystem:
    """Graph-structured plant: node ``i`` is driven by its neighbours ``N_i``.

    ``blocks[name][(i, j)]`` is the block coupling node ``j``'s signal into
    node ``i``'s equation (0-based node indices). ``edges`` holds directed
    pairs ``(j, i)`` meaning ``j`` influences ``i``; self-coupling is implicit.
    """

    n: Sequence[int]
    m: Sequence[int]
    p: Sequence[int]
    n_w: Sequence[int]
    n_z: Sequence[int]
    Ts: float
    edges: set = field(default_factory=set)
    blocks: Mapping[str, Mapping[tuple, np.ndarray]] = field(default_factory=dict)

    @property
    def node_count(self) -> int:
        return len(self.n)

    def neighbors(self, i: int) -> set:
        return {i} | {j for (j, k) in self.edges if k == i}


def assemble_networked(sys: NetworkedSystem) -> StateSpaceModel:
    """Monolithic generalized plant with node-ordered block rows and columns."""
    N = sys.node_count
    dims = {
        "x": list(sys.n), "u": list(sys.m), "w": list(sys.n_w),
        "y": list(sys.p), "z": list(sys.n_z),
    }
    for key, d in dims.items():
        if len(d) != N:
            raise DimensionMismatch(f"{key} dimensions must list {N} nodes")
    offs = {k: np.concatenate([[0], np.cumsum(v)]).astype(int) for k, v in dims.items()}
    shape = {  # (row signal, column signal)
        "A": ("x", "x"), "B1": ("x", "w"), "B2": ("x", "u"),
        "C1": ("z", "x"), "C2": ("y", "x"),
        "D11": ("z", "w"), "D12": ("z", "u"), "D21": ("y", "w"), "D22": ("y", "u"),
    }
    full = {
        name: np.zeros((offs[r][-1], offs[c][-1])) for name, (r, c) in shape.items()
    }
    for name, blocks in sys.blocks.items():
        if name not in shape:
            raise DimensionMismatch(f"unknown block family {name!r}")
        r, c = shape[name]
        for (i, j), blk in blocks.items():
            if not (0 <= i < N and 0 <= j < N) or j not in sys.neighbors(i):
                raise DimensionMismatch(f"{name} block ({i}, {j}) outside the neighbourhood of node {i}")
            blk = np.atleast_2d(np.asarray(blk, dtype=float))
            want = (dims[r][i], dims[c][j])
            if blk.shape != want:
                raise DimensionMismatch(
                    f"{name}[{i},{j}] has shape {blk.shape}, expected {want}"
                )
            full[name][offs[r][i] : offs[r][i + 1], offs[c][j] : offs[c][j + 1]] = blk
    B = np.hstack([full["B1"], full["B2"]])
    C = np.vstack([full["C1"], full["C2"]])
    D = np.block([[full["D11"], full["D12"]], [full["D21"], full["D22"]]])
    return StateSpaceModel(full["A"], B, C, D, sys.Ts, n_w=offs["w"][-1], n_z=offs["z"][-1])


# ---------------------------------------------------------------------------
# power grid


@dataclass(frozen=True)
class PowerGridParams:
    """Discretized swing dynamics of a line of buses (per-unit values).

    ``ground_coupling`` is the part of each bus's self stiffness ``k_i`` not
    accounted for by its lines, ``k_i = ground_coupling + sum_j k_ij``. The
    default treats each bus as coupled to itself like to a neighbour
    (``k_ii = coupling``), which keeps the network strictly open-loop stable;
    ``ground_coupling=0`` gives the pure Laplacian with a mode at ``z = 1``.
    """

    bus_count: int = 5
    inertia: float | Sequence[float] = 2.0
    damping: float | Sequence[float] = 2.0
    coupling: float = 20.0
    ground_coupling: float | None = None
    Ts: float = 0.02
    lines: tuple | None = None

    def per_bus(self, value) -> np.ndarray:
        arr = np.broadcast_to(np.asarray(value, dtype=float), (self.bus_count,))
        return arr.copy()

    def line_list(self) -> list[tuple[int, int]]:
        if self.lines is not None:
            return [tuple(sorted(map(int, ln))) for ln in self.lines]
        return [(i, i + 1) for i in range(self.bus_count - 1)]


def build_power_grid(params: PowerGridParams | None = None) -> NetworkedSystem:
    p = params or PowerGridParams()
    if p.bus_count < 2:
        raise ValueError("bus_count must be at least 2")
    if p.Ts <= 0:
        raise ValueError("Ts must be positive")
    N, Ts = p.bus_count, p.Ts
    m, d = p.per_bus(p.inertia), p.per_bus(p.damping)
    if np.any(m <= 0):
        raise ValueError("inertia must be positive")
    ground = p.coupling if p.ground_coupling is None else p.ground_coupling
    kij = {}
    for i, j in p.line_list():
        kij[(i, j)] = kij[(j, i)] = p.coupling
    edges = set(kij)
    blocks = {name: {} for name in _BLOCK_NAMES}
    for i in range(N):
        k_i = ground + sum(v for (a, _), v in kij.items() if a == i)
        blocks["A"][(i, i)] = np.array(
            [[1.0, Ts], [-(k_i / m[i]) * Ts, 1.0 - (d[i] / m[i]) * Ts]]
        )
        blocks["B1"][(i, i)] = np.array([[0.0], [1.0]])
        blocks["B2"][(i, i)] = np.array([[0.0], [Ts / m[i]]])
        blocks["C1"][(i, i)] = np.array([[1.0, 0.0], [0.0, 0.0]])
        blocks["D12"][(i, i)] = np.array([[0.0], [1.0]])
        blocks["C2"][(i, i)] = np.array([[1.0, 0.0]])
        blocks["D21"][(i, i)] = np.array([[1.0]])
    for (i, j), k in kij.items():
        blocks["A"][(i, j)] = np.array([[0.0, 0.0], [(k / m[i]) * Ts, 0.0]])
    ones = [1] * N
    return NetworkedSystem(
        n=[2] * N, m=ones, p=ones, n_w=ones, n_z=[2] * N, Ts=Ts,
        edges={(j, i) for (i, j) in edges}, blocks=blocks,
    )


# ---------------------------------------------------------------------------
# feedback interconnection


def feedback_interconnection(plant: StateSpaceModel, controller: StateSpaceModel) -> StateSpaceModel:
    """Closed loop ``w -> z`` of the generalized plant with ``u = K y``.

    States are stacked ``[x; xi]`` (plant then controller).
    """
    if controller.n_inputs != plant.p or controller.n_outputs != plant.m:
        raise DimensionMismatch(
            f"controller is {controller.n_outputs}x{controller.n_inputs}, plant needs {plant.m}x{plant.p}"
        )
    Ak, Bk, Ck, Dk = controller.A, controller.B, controller.C, controller.D
    ret = np.eye(plant.m) - Dk @ plant.D22
    if np.linalg.cond(ret) > 1e12:
        raise IllPosedInterconnection("I - D22 DK is singular")
    R = np.linalg.inv(ret)
    Ux = R @ Dk @ plant.C2
    Uk = R @ Ck
    Uw = R @ Dk @ plant.D21
    Yx = plant.C2 + plant.D22 @ Ux
    Yk = plant.D22 @ Uk
    Yw = plant.D21 + plant.D22 @ Uw
    A = np.block([[plant.A + plant.B2 @ Ux, plant.B2 @ Uk], [Bk @ Yx, Ak + Bk @ Yk]])
    B = np.vstack([plant.B1 + plant.B2 @ Uw, Bk @ Yw])
    C = np.hstack([plant.C1 + plant.D12 @ Ux, plant.D12 @ Uk])
    D = plant.D11 + plant.D12 @ Uw
    return StateSpaceModel(A, B, C, D, plant.Ts)


def closed_loop_spectral_radius(plant: StateSpaceModel, controller: StateSpaceModel) -> float:
    return feedback_interconnection(plant, controller).spectral_radius()


def realize_controller(factors) -> StateSpaceModel:
    """State-space realization of ``K = Y^{-1} X``.

    ``X`` and ``Y`` share ``A`` and ``C``, so ``Y u = X y`` gives directly
    ``s+ = (A - B_Y D_Y^{-1} C) s + (B_X - B_Y D_Y^{-1} D_X) y`` and
    ``u = D_Y^{-1} (C s + D_X y)``. Not minimal in general.
    """
    A, BX, BY, C, DX, DY = factors.state_space()
    if np.linalg.cond(DY) > 1e12:
        raise SingularDY("D_Y is not invertible")
    DYi = np.linalg.inv(DY)
    Ak = A - BY @ DYi @ C
    Bk = BX - BY @ DYi @ DX
    Ck = DYi @ C
    Dk = DYi @ DX
    return StateSpaceModel(Ak, Bk, Ck, Dk, factors.Ts)
