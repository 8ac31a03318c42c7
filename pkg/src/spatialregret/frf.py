"""Frequency-response data: estimation from experiments, generalized-plant
assembly, assumption checks and CSV exchange formats.

CSV formats (a leading ``# key=value ...`` comment line carries ``Ts``):

* FRF data: ``omega,block,row,col,re,im``, rows ordered by block, then
  frequency, then row, then column.
* experiments: ``k,experiment,channel,u,y``, rows ordered by ``k`` then
  channel; one file per experiment.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import DimensionMismatch, GridMismatch, SingularInputSpectrum
from .grid import FrequencyGrid
from .lti import StateSpaceModel, frequency_response, simulate

INPUT_COND_MAX = 1e10
A1_RANK_TOL = 1e-6
A2_BOUND = 1e6

BLOCK_NAMES = ("G11", "G12", "G21", "G22")


@dataclass(frozen=True)
class ExperimentBatch:
    """``U[k]`` is ``m x n_exp`` and ``Y[k]`` is ``p x n_exp``; one column per experiment."""

    U: np.ndarray  # (N_s, m, n_exp)
    Y: np.ndarray  # (N_s, p, n_exp)
    Ts: float

    def __post_init__(self):
        U = np.asarray(self.U, dtype=float)
        Y = np.asarray(self.Y, dtype=float)
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "Y", Y)
        if U.ndim != 3 or Y.ndim != 3:
            raise DimensionMismatch("U and Y must be (N_s, channels, experiments)")
        if U.shape[0] != Y.shape[0] or U.shape[2] != Y.shape[2]:
            raise DimensionMismatch(f"U{U.shape} and Y{Y.shape} disagree")
        if U.shape[0] < 1:
            raise DimensionMismatch("N_s must be at least 1")

    @property
    def N_s(self) -> int:
        return self.U.shape[0]

    @property
    def n_experiments(self) -> int:
        return self.U.shape[2]


@dataclass(frozen=True)
class FrfBlock:
    grid: FrequencyGrid
    data: np.ndarray  # (nf, rows, cols) complex

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        if data.ndim != 3 or data.shape[0] != len(self.grid):
            raise DimensionMismatch(
                f"FRF data must be ({len(self.grid)}, rows, cols), got {data.shape}"
            )
        if not np.all(np.isfinite(data)):
            raise ValueError("FRF samples must be finite")
        object.__setattr__(self, "data", data)

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[1:]


@dataclass(frozen=True)
class GeneralizedPlantFrf:
    """Samples of ``[[G11, G12], [G21, G22]]`` on a common grid."""

    grid: FrequencyGrid
    G11: np.ndarray  # (nf, n_z, n_w)
    G12: np.ndarray  # (nf, n_z, m)
    G21: np.ndarray  # (nf, p, n_w)
    G22: np.ndarray  # (nf, p, m)
    meta: Mapping = field(default_factory=dict)

    def __post_init__(self):
        nf = len(self.grid)
        for name in BLOCK_NAMES:
            arr = np.asarray(getattr(self, name), dtype=complex)
            if arr.ndim != 3 or arr.shape[0] != nf:
                raise DimensionMismatch(f"{name} must have {nf} frequency samples, got {arr.shape}")
            object.__setattr__(self, name, arr)
        n_z, n_w = self.G11.shape[1:]
        if self.G12.shape[1] != n_z or self.G21.shape[2] != n_w:
            raise DimensionMismatch("G11/G12/G21 are not partition compatible")
        if self.G22.shape[1:] != (self.G21.shape[1], self.G12.shape[2]):
            raise DimensionMismatch("G22 is not partition compatible")

    n_z = property(lambda s: s.G11.shape[1])
    n_w = property(lambda s: s.G11.shape[2])
    m = property(lambda s: s.G12.shape[2])
    p = property(lambda s: s.G21.shape[1])

    def block(self, name: str) -> FrfBlock:
        return FrfBlock(self.grid, getattr(self, name))

    def full(self) -> np.ndarray:
        top = np.concatenate([self.G11, self.G12], axis=2)
        bottom = np.concatenate([self.G21, self.G22], axis=2)
        return np.concatenate([top, bottom], axis=1)


# ---------------------------------------------------------------------------
# experiments and estimation


def impulse_experiments(model: StateSpaceModel, N_s: int) -> ExperimentBatch:
    """One impulse experiment per control input on the ``u -> y`` channel."""
    if N_s < 1:
        raise ValueError("N_s must be at least 1")
    m, p = model.m, model.p
    U = np.zeros((N_s, m, m))
    Y = np.zeros((N_s, p, m))
    for e in range(m):
        u = np.zeros((N_s, m))
        u[0, e] = 1.0
        trace = simulate(model, u=u, T=N_s)
        U[:, :, e] = u
        Y[:, :, e] = trace.y
    return ExperimentBatch(U, Y, model.Ts)


def multisine_experiments(
    model: StateSpaceModel, N_s: int, seed: int = 0, n_tones: int = 64
) -> ExperimentBatch:
    """Experiment ``e`` drives input ``e`` with a random-phase multisine.

    Tones sit on the DFT grid of length ``N_s``; phases come from ``seed``.
    """
    if N_s < 2:
        raise ValueError("N_s must be at least 2")
    rng = np.random.default_rng(seed)
    m, p = model.m, model.p
    k = np.arange(N_s)
    bins = np.unique(np.geomspace(1, max(1, N_s // 2 - 1), n_tones).astype(int))
    U = np.zeros((N_s, m, m))
    Y = np.zeros((N_s, p, m))
    for e in range(m):
        phases = rng.uniform(0, 2 * np.pi, bins.size)
        sig = np.cos(2 * np.pi * np.outer(k, bins) / N_s + phases).sum(axis=1)
        sig /= np.sqrt(bins.size / 2)
        u = np.zeros((N_s, m))
        u[:, e] = sig
        trace = simulate(model, u=u, T=N_s)
        U[:, :, e] = u
        Y[:, :, e] = trace.y
    return ExperimentBatch(U, Y, model.Ts)


def estimate_frf(batch: ExperimentBatch, grid: FrequencyGrid) -> FrfBlock:
    """Ratio of truncated DTFTs ``[sum Y_k e^{-jwTs k}] [sum U_k e^{-jwTs k}]^{-1}``."""
    k = np.arange(batch.N_s)
    E = np.exp(-1j * np.outer(grid.omegas * grid.Ts, k))  # (nf, N_s)
    N_s = batch.N_s
    Uf = (E @ batch.U.reshape(N_s, -1)).reshape((len(grid),) + batch.U.shape[1:])
    Yf = (E @ batch.Y.reshape(N_s, -1)).reshape((len(grid),) + batch.Y.shape[1:])
    if Uf.shape[1] != Uf.shape[2]:
        raise DimensionMismatch("input spectrum must be square (one experiment per input)")
    cond = np.linalg.cond(Uf)
    bad = ~np.isfinite(cond) | (cond >= INPUT_COND_MAX)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise SingularInputSpectrum(float(grid.omegas[i]), float(cond[i]))
    # G Uf = Yf  <=>  Uf^T G^T = Yf^T
    Gt = np.linalg.solve(np.swapaxes(Uf, 1, 2), np.swapaxes(Yf, 1, 2))
    return FrfBlock(grid, np.swapaxes(Gt, 1, 2))


def plant_frf_from_model(model: StateSpaceModel, grid: FrequencyGrid) -> GeneralizedPlantFrf:
    G = frequency_response(model, grid)
    nz, nw = model.n_z, model.n_w
    return GeneralizedPlantFrf(
        grid, G[:, :nz, :nw], G[:, :nz, nw:], G[:, nz:, :nw], G[:, nz:, nw:]
    )


def assemble_generalized_plant(
    G22: FrfBlock,
    performance: StateSpaceModel | Mapping[str, FrfBlock],
) -> GeneralizedPlantFrf:
    """Combine an estimated ``G22`` with user-defined ``G11, G12, G21``.

    ``performance`` is either a generalized-plant model (sampled on the grid
    of ``G22``) or a mapping with FRF blocks ``"G11", "G12", "G21"``.
    """
    grid = G22.grid
    if isinstance(performance, StateSpaceModel):
        blocks = plant_frf_from_model(performance, grid)
        G11, G12, G21 = blocks.G11, blocks.G12, blocks.G21
    else:
        for name in ("G11", "G12", "G21"):
            if not performance[name].grid.same_as(grid):
                raise GridMismatch(f"{name} is sampled on a different grid than G22")
        G11, G12, G21 = (performance[n].data for n in ("G11", "G12", "G21"))
    return GeneralizedPlantFrf(grid, G11, G12, G21, G22.data)


@dataclass
class AssumptionReport:
    omegas: np.ndarray
    sigma_min_g12: np.ndarray
    sigma_max_g12: np.ndarray
    max_entry: np.ndarray
    rank_tol: float
    bound: float

    @property
    def a1_violations(self) -> np.ndarray:
        return self.omegas[~(self.sigma_min_g12 > self.rank_tol * self.sigma_max_g12)]

    @property
    def a2_violations(self) -> np.ndarray:
        return self.omegas[~(self.max_entry < self.bound)]

    @property
    def a1_pass(self) -> bool:
        return self.a1_violations.size == 0

    @property
    def a2_pass(self) -> bool:
        return self.a2_violations.size == 0

    @property
    def passed(self) -> bool:
        return self.a1_pass and self.a2_pass


def check_assumptions(
    plant: GeneralizedPlantFrf, rank_tol: float = A1_RANK_TOL, bound: float = A2_BOUND
) -> AssumptionReport:
    """A1: ``G12`` has full column rank; A2: ``G`` is bounded, per grid point."""
    s = np.linalg.svd(plant.G12, compute_uv=False)
    if plant.G12.shape[2] > plant.G12.shape[1]:
        smin = np.zeros(len(plant.grid))
    else:
        smin = s[:, -1]
    G = plant.full()
    with np.errstate(invalid="ignore"):
        max_entry = np.nan_to_num(np.abs(G).max(axis=(1, 2)), nan=np.inf)
    return AssumptionReport(plant.grid.omegas, smin, s[:, 0], max_entry, rank_tol, bound)


# ---------------------------------------------------------------------------
# CSV exchange


def _grid_header(grid: FrequencyGrid) -> str:
    return f"# Ts={grid.Ts!r} spacing={grid.spacing}"


def _parse_header(line: str) -> dict:
    out = {}
    for tok in line.lstrip("#").split():
        key, _, val = tok.partition("=")
        out[key] = val
    return out


def write_frf_csv(path, grid: FrequencyGrid, blocks: Mapping[str, np.ndarray]) -> None:
    """Write named FRF blocks (each ``(nf, rows, cols)``) in the long CSV format."""
    with open(path, "w", newline="") as fh:
        fh.write(_grid_header(grid) + "\n")
        writer = csv.writer(fh)
        writer.writerow(["omega", "block", "row", "col", "re", "im"])
        for name, data in blocks.items():
            data = np.asarray(data)
            for f, om in enumerate(grid.omegas):
                for r in range(data.shape[1]):
                    for c in range(data.shape[2]):
                        v = data[f, r, c]
                        writer.writerow(
                            [f"{om:.17g}", name, r, c, f"{v.real:.17g}", f"{v.imag:.17g}"]
                        )


def read_frf_csv(path) -> tuple[FrequencyGrid, dict[str, np.ndarray]]:
    with open(path, newline="") as fh:
        head = fh.readline()
        meta = _parse_header(head) if head.startswith("#") else {}
        if not head.startswith("#"):
            fh.seek(0)
        rows = list(csv.DictReader(fh))
    if "Ts" not in meta:
        raise ValueError(f"{path}: missing '# Ts=...' header line")
    omegas = sorted({float(r["omega"]) for r in rows})
    fidx = {om: i for i, om in enumerate(omegas)}
    shapes: dict[str, list[int]] = {}
    for r in rows:
        sh = shapes.setdefault(r["block"], [0, 0])
        sh[0] = max(sh[0], int(r["row"]) + 1)
        sh[1] = max(sh[1], int(r["col"]) + 1)
    out = {name: np.zeros((len(omegas), *sh), dtype=complex) for name, sh in shapes.items()}
    for r in rows:
        out[r["block"]][fidx[float(r["omega"])], int(r["row"]), int(r["col"])] = complex(
            float(r["re"]), float(r["im"])
        )
    grid = FrequencyGrid(float(meta["Ts"]), np.array(omegas), meta.get("spacing", "log"))
    return grid, out


def write_plant_csv(path, plant: GeneralizedPlantFrf) -> None:
    write_frf_csv(path, plant.grid, {n: getattr(plant, n) for n in BLOCK_NAMES})


def read_plant_csv(path) -> GeneralizedPlantFrf:
    grid, blocks = read_frf_csv(path)
    missing = [n for n in BLOCK_NAMES if n not in blocks]
    if missing:
        raise ValueError(f"{path}: missing blocks {missing}")
    return GeneralizedPlantFrf(grid, *(blocks[n] for n in BLOCK_NAMES))


def write_experiment_csvs(directory, batch: ExperimentBatch, prefix: str = "experiment") -> list[Path]:
    """One CSV per experiment; channels beyond ``m`` (or ``p``) are left blank."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    m, p = batch.U.shape[1], batch.Y.shape[1]
    for e in range(batch.n_experiments):
        path = directory / f"{prefix}_{e:03d}.csv"
        with open(path, "w", newline="") as fh:
            fh.write(f"# Ts={batch.Ts!r} experiment={e}\n")
            writer = csv.writer(fh)
            writer.writerow(["k", "experiment", "channel", "u", "y"])
            for k in range(batch.N_s):
                for ch in range(max(m, p)):
                    u = f"{batch.U[k, ch, e]:.17g}" if ch < m else ""
                    y = f"{batch.Y[k, ch, e]:.17g}" if ch < p else ""
                    writer.writerow([k, e, ch, u, y])
        paths.append(path)
    return paths


def read_experiment_csvs(paths) -> ExperimentBatch:
    paths = sorted(Path(p) for p in paths)
    if not paths:
        raise ValueError("no experiment files given")
    per_exp = []
    Ts = None
    for path in paths:
        with open(path, newline="") as fh:
            head = fh.readline()
            meta = _parse_header(head)
            Ts = float(meta["Ts"])
            rows = list(csv.DictReader(fh))
        N_s = max(int(r["k"]) for r in rows) + 1
        m = max((int(r["channel"]) + 1 for r in rows if r["u"] != ""), default=0)
        p = max((int(r["channel"]) + 1 for r in rows if r["y"] != ""), default=0)
        U = np.zeros((N_s, m))
        Y = np.zeros((N_s, p))
        for r in rows:
            k, ch = int(r["k"]), int(r["channel"])
            if r["u"] != "":
                U[k, ch] = float(r["u"])
            if r["y"] != "":
                Y[k, ch] = float(r["y"])
        per_exp.append((int(meta.get("experiment", len(per_exp))), U, Y))
    per_exp.sort(key=lambda t: t[0])
    U = np.stack([u for _, u, _ in per_exp], axis=2)
    Y = np.stack([y for _, _, y in per_exp], axis=2)
    return ExperimentBatch(U, Y, Ts)
