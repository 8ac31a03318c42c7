"""Controller sparsity patterns and the linearly parameterized factor classes.

A structured controller is written ``K = Y^{-1} X`` where ``Y`` is diagonal
and ``X`` follows the sparsity pattern. Every subcontroller (row ``i``) owns
one Jordan block of ``(z - pole)^r``; its basis functions are
``1/(z - pole)^k`` for ``k = 1..r``, and the decision vector holds the
coefficients of these basis functions (``B`` entries) plus the direct
feedthrough (``D`` entries) of every free scalar entry.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import BadEdge, BadPole, ImproperEntry, SingularY
from .grid import FrequencyGrid

# entry kinds: None = Zero, 0 = Free, k >= 1 = Delayed(k)
ZERO = None
FREE = 0

_DELAY_RE = re.compile(r"^z\^-(\d+)$")


def entry_text(kind) -> str:
    if kind is ZERO:
        return "0"
    if kind == FREE:
        return "x"
    return f"z^-{kind}"


def parse_entry(text: str):
    t = str(text).strip().replace(" ", "")
    if t == "0":
        return ZERO
    if t == "x":
        return FREE
    mt = _DELAY_RE.match(t)
    if mt and int(mt.group(1)) >= 1:
        return int(mt.group(1))
    raise ValueError(f"unknown pattern entry {text!r}; expected '0', 'x' or 'z^-k'")


def _rank(kind) -> float:
    """Total order on entry kinds: Zero < Delayed(large k) < Delayed(small k) < Free."""
    if kind is ZERO:
        return -np.inf
    return -float(kind)


@dataclass(frozen=True)
class SparsityPattern:
    """Rows are controller outputs, columns are controller inputs."""

    entries: tuple

    def __post_init__(self):
        rows = tuple(tuple(r) for r in self.entries)
        if not rows or not rows[0] or any(len(r) != len(rows[0]) for r in rows):
            raise ValueError("pattern must be a non-empty rectangular grid")
        for r in rows:
            for e in r:
                if not (e is ZERO or (isinstance(e, (int, np.integer)) and e >= 0)):
                    raise ValueError(f"invalid entry kind {e!r}")
        object.__setattr__(self, "entries", rows)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.entries), len(self.entries[0])

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def is_zero(self, i: int, j: int) -> bool:
        return self.entries[i][j] is ZERO

    def zero_mask(self) -> np.ndarray:
        return np.array([[e is ZERO for e in row] for row in self.entries])

    def delayed_mask(self) -> np.ndarray:
        return np.array([[e is not ZERO and e >= 1 for e in row] for row in self.entries])

    def contains(self, other: "SparsityPattern") -> bool:
        """True when every controller with pattern ``other`` also fits ``self``."""
        if self.shape != other.shape:
            return False
        return all(
            _rank(a) >= _rank(b)
            for ra, rb in zip(self.entries, other.entries)
            for a, b in zip(ra, rb)
        )

    def to_text(self) -> list[list[str]]:
        return [[entry_text(e) for e in row] for row in self.entries]

    @classmethod
    def from_text(cls, rows: Sequence[Sequence[str]]) -> "SparsityPattern":
        return cls(tuple(tuple(parse_entry(t) for t in row) for row in rows))

    def __str__(self) -> str:
        txt = self.to_text()
        width = max(len(t) for row in txt for t in row)
        return "\n".join(" ".join(t.rjust(width) for t in row) for row in txt)


def pattern_from_graph(
    nodes: int,
    edges: Sequence[tuple[int, int]],
    delay_steps: int | Sequence[int] = 0,
    self_delay: int = 0,
) -> SparsityPattern:
    """Pattern of a communication graph (0-based nodes).

    Edge ``(j, i)`` means node ``i`` receives the measurement of node ``j``,
    which makes entry ``(i, j)`` Free (delay 0) or Delayed(delay).
    """
    edges = list(edges)
    delays = [delay_steps] * len(edges) if np.isscalar(delay_steps) else list(delay_steps)
    if len(delays) != len(edges):
        raise BadEdge("delay_steps must be a scalar or have one entry per edge")
    grid = [[ZERO] * nodes for _ in range(nodes)]
    for i in range(nodes):
        grid[i][i] = int(self_delay)
    for (j, i), d in zip(edges, delays):
        if not (0 <= i < nodes and 0 <= j < nodes):
            raise BadEdge(f"edge ({j}, {i}) outside node range 0..{nodes - 1}")
        if int(d) < 0:
            raise BadEdge(f"negative delay on edge ({j}, {i})")
        if i == j:
            continue
        grid[i][j] = int(d)
    return SparsityPattern(tuple(map(tuple, grid)))


def chain_edges(nodes: int) -> list[tuple[int, int]]:
    """Bidirectional nearest-neighbour links of a line graph."""
    return [(k, k + 1) for k in range(nodes - 1)] + [(k + 1, k) for k in range(nodes - 1)]


# ---------------------------------------------------------------------------
# parameterization


@dataclass(frozen=True)
class ThetaSlot:
    factor: str  # "X" or "Y"
    row: int
    col: int
    part: str  # "B" or "D"
    index: int  # basis index for B, 0 for D


@dataclass(frozen=True)
class FactorParameterization:
    """Fixed ``A``/``C`` and the layout of the free ``B``/``D`` entries of ``X`` and ``Y``."""

    pattern: SparsityPattern
    order: int
    pole: float
    Ts: float
    slots: tuple[ThetaSlot, ...] = field(repr=False)

    @property
    def m(self) -> int:
        return self.pattern.shape[0]

    @property
    def p(self) -> int:
        return self.pattern.shape[1]

    @property
    def n_theta(self) -> int:
        return len(self.slots)

    @property
    def n_states(self) -> int:
        return self.m * self.order

    def state_matrices(self) -> tuple[np.ndarray, np.ndarray]:
        """Block-diagonal ``A`` (Jordan blocks) and row selector ``C``."""
        r = self.order
        J = self.pole * np.eye(r) + np.eye(r, k=1)
        A = np.kron(np.eye(self.m), J)
        C = np.kron(np.eye(self.m), np.eye(1, r))
        return A, C

    def matrices(self, theta) -> tuple[np.ndarray, ...]:
        """``(B_X, B_Y, D_X, D_Y)`` for a decision vector."""
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.size != self.n_theta:
            raise ValueError(f"theta has length {theta.size}, expected {self.n_theta}")
        r = self.order
        BX = np.zeros((self.m * r, self.p))
        BY = np.zeros((self.m * r, self.m))
        DX = np.zeros((self.m, self.p))
        DY = np.zeros((self.m, self.m))
        for v, s in zip(theta, self.slots):
            if s.part == "B":
                (BX if s.factor == "X" else BY)[s.row * r + s.index, s.col] = v
            else:
                (DX if s.factor == "X" else DY)[s.row, s.col] = v
        return BX, BY, DX, DY

    def basis(self, z: np.ndarray) -> np.ndarray:
        """``1/(z - pole)^k`` for ``k = 1..order``; shape ``(nf, order)``."""
        z = np.asarray(z, dtype=complex).reshape(-1)
        return (1.0 / (z - self.pole))[:, None] ** np.arange(1, self.order + 1)


def build_factor_parameterization(
    pattern: SparsityPattern, entry_order: int = 2, basis_pole: float = 0.0, Ts: float = 1.0
) -> FactorParameterization:
    """Slots are ordered: ``X`` entries row-major, then the diagonal of ``Y``;
    within an entry, basis coefficients first and the feedthrough last."""
    if not (abs(basis_pole) < 1):
        raise BadPole(f"basis pole must lie inside the unit disc, got {basis_pole}")
    if entry_order < 1:
        raise ValueError("entry_order must be at least 1")
    slots = []
    m, p = pattern.shape
    for i in range(m):
        for j in range(p):
            kind = pattern[i, j]
            if kind is ZERO:
                continue
            if kind > entry_order:
                raise ValueError(
                    f"entry ({i}, {j}) needs delay {kind} but the basis order is {entry_order}"
                )
            first = max(kind - 1, 0)
            slots += [ThetaSlot("X", i, j, "B", k) for k in range(first, entry_order)]
            if kind == FREE:
                slots.append(ThetaSlot("X", i, j, "D", 0))
    for i in range(m):
        slots += [ThetaSlot("Y", i, i, "B", k) for k in range(entry_order)]
        slots.append(ThetaSlot("Y", i, i, "D", 0))
    return FactorParameterization(pattern, entry_order, float(basis_pole), float(Ts), tuple(slots))


def zero_controller_theta(param: FactorParameterization) -> np.ndarray:
    """``X = 0``, ``Y = I``: the zero controller."""
    theta = np.zeros(param.n_theta)
    for k, s in enumerate(param.slots):
        if s.factor == "Y" and s.part == "D":
            theta[k] = 1.0
    return theta


@dataclass(frozen=True)
class FactorMaps:
    """Linear maps ``theta -> X(e^{jw})`` and ``theta -> Y(e^{jw})`` on a grid.

    ``X = X_coef @ theta`` with ``X_coef`` of shape ``(nf, m, p, n_theta)``.
    """

    grid: FrequencyGrid
    X_coef: np.ndarray
    Y_coef: np.ndarray

    def X(self, theta) -> np.ndarray:
        return self.X_coef @ np.asarray(theta, dtype=float)

    def Y(self, theta) -> np.ndarray:
        return self.Y_coef @ np.asarray(theta, dtype=float)


def realize_factors(param: FactorParameterization, grid: FrequencyGrid) -> FactorMaps:
    if abs(param.Ts - grid.Ts) > 1e-12 * grid.Ts:
        raise ValueError(f"parameterization Ts={param.Ts} differs from grid Ts={grid.Ts}")
    b = param.basis(grid.z)  # (nf, r)
    nf, n = len(grid), param.n_theta
    Xc = np.zeros((nf, param.m, param.p, n), dtype=complex)
    Yc = np.zeros((nf, param.m, param.m, n), dtype=complex)
    for k, s in enumerate(param.slots):
        target = Xc if s.factor == "X" else Yc
        target[:, s.row, s.col, k] = b[:, s.index] if s.part == "B" else 1.0
    return FactorMaps(grid, Xc, Yc)


@dataclass(frozen=True)
class ControllerFactors:
    param: FactorParameterization
    theta: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float).reshape(-1).copy()
        if theta.size != self.param.n_theta:
            raise ValueError(f"theta has length {theta.size}, expected {self.param.n_theta}")
        object.__setattr__(self, "theta", theta)

    @property
    def Ts(self) -> float:
        return self.param.Ts

    def state_space(self):
        """``(A, B_X, B_Y, C, D_X, D_Y)``; ``X`` and ``Y`` share ``A`` and ``C``."""
        A, C = self.param.state_matrices()
        BX, BY, DX, DY = self.param.matrices(self.theta)
        return A, BX, BY, C, DX, DY

    def _eval(self, grid: FrequencyGrid) -> tuple[np.ndarray, np.ndarray]:
        maps = realize_factors(self.param, grid)
        return maps.X(self.theta), maps.Y(self.theta)

    def X(self, grid: FrequencyGrid) -> np.ndarray:
        return self._eval(grid)[0]

    def Y(self, grid: FrequencyGrid) -> np.ndarray:
        return self._eval(grid)[1]

    def K(self, grid: FrequencyGrid, sv_tol: float = 1e-8) -> np.ndarray:
        """``Y^{-1} X`` per grid point; raises ``SingularY`` if ``Y`` is nearly singular."""
        X, Y = self._eval(grid)
        check_y_invertible(Y, grid, sv_tol)
        return np.linalg.solve(Y, X)


def check_y_invertible(Y: np.ndarray, grid: FrequencyGrid, sv_tol: float = 1e-8) -> np.ndarray:
    smin = np.linalg.svd(Y, compute_uv=False)[:, -1]
    bad = ~(smin > sv_tol)
    if np.any(bad):
        raise SingularY(float(grid.omegas[np.argmax(bad)]))
    return smin


# ---------------------------------------------------------------------------
# left factorization of a rational controller


def _trim(c) -> np.ndarray:
    c = np.atleast_1d(np.asarray(c, dtype=float))
    nz = np.flatnonzero(c)
    return c[nz[0]:] if nz.size else np.zeros(1)


@dataclass(frozen=True)
class RationalFactors:
    """``Y = y(z) I`` and ``X``, both as polynomials over the common ``lambda(z)``.

    Coefficients are in descending powers of ``z``.
    """

    x_num: tuple  # x_num[i][j] polynomial coefficients
    y_num: np.ndarray
    den: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.x_num), len(self.x_num[0])

    def X(self, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        lam = np.polyval(self.den, z)
        m, p = self.shape
        out = np.empty((z.size, m, p), dtype=complex)
        for i in range(m):
            for j in range(p):
                out[:, i, j] = np.polyval(self.x_num[i][j], z) / lam
        return out

    def Y(self, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        y = np.polyval(self.y_num, z) / np.polyval(self.den, z)
        return y[:, None, None] * np.eye(self.shape[0])

    def K(self, z) -> np.ndarray:
        return np.linalg.solve(self.Y(z), self.X(z))


def left_factorize_rational(num, den, rho: float = 0.0) -> RationalFactors:
    """Left factorization of a proper rational ``K`` with ``K_ij = num[i][j] / den[i][j]``.

    ``y = prod(a_ij) / (z - rho)^d`` with ``d`` the degree of the product,
    ``X_ij = y K_ij``. Both factors are stable and proper when ``|rho| < 1``.
    """
    if not abs(rho) < 1:
        raise BadPole(f"rho must lie inside the unit disc, got {rho}")
    m = len(num)
    if m == 0 or len(den) != m:
        raise ValueError("num and den must be non-empty nested lists of equal shape")
    p = len(num[0])
    b = [[_trim(num[i][j]) for j in range(p)] for i in range(m)]
    a = [[_trim(den[i][j]) for j in range(p)] for i in range(m)]
    for i in range(m):
        if len(num[i]) != p or len(den[i]) != p:
            raise ValueError("num and den must be rectangular")
        for j in range(p):
            if not np.any(a[i][j]):
                raise ImproperEntry(f"entry ({i}, {j}) has a zero denominator")
            if np.any(b[i][j]) and b[i][j].size > a[i][j].size:
                raise ImproperEntry(f"entry ({i}, {j}) is improper")
    prod = np.ones(1)
    for row in a:
        for aij in row:
            prod = np.polymul(prod, aij)
    d = prod.size - 1
    lam = np.poly(np.full(d, rho)) if d else np.ones(1)
    x_num = []
    for i in range(m):
        row = []
        for j in range(p):
            if not np.any(b[i][j]):
                row.append(np.zeros(1))
                continue
            others = np.ones(1)
            for k in range(m):
                for l in range(p):
                    if (k, l) != (i, j):
                        others = np.polymul(others, a[k][l])
            row.append(np.polymul(b[i][j], others))
        x_num.append(tuple(row))
    return RationalFactors(tuple(x_num), prod, lam)


# ---------------------------------------------------------------------------
# pattern verification


@dataclass
class PatternReport:
    max_zero_entry: float
    max_delayed_feedthrough: float
    tol: float
    zero_violations: list = field(default_factory=list)
    delay_violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.zero_violations and not self.delay_violations


def verify_pattern(
    factors: ControllerFactors, pattern: SparsityPattern, grid: FrequencyGrid, tol: float = 1e-10
) -> PatternReport:
    """Check Zero entries of ``K = Y^{-1} X`` on the grid and the feedthrough of Delayed entries."""
    from .lti import realize_controller

    K = factors.K(grid)
    zmask = pattern.zero_mask()
    dmask = pattern.delayed_mask()
    mag = np.abs(K).max(axis=0)
    Dk = realize_controller(factors).D
    zero_viol = [(int(i), int(j)) for i, j in zip(*np.nonzero(zmask & (mag > tol)))]
    delay_viol = [(int(i), int(j)) for i, j in zip(*np.nonzero(dmask & (np.abs(Dk) > 0)))]
    return PatternReport(
        max_zero_entry=float(mag[zmask].max()) if zmask.any() else 0.0,
        max_delayed_feedthrough=float(np.abs(Dk)[dmask].max()) if dmask.any() else 0.0,
        tol=tol,
        zero_violations=zero_viol,
        delay_violations=delay_viol,
    )


# ---------------------------------------------------------------------------
# theta CSV


def write_theta_csv(path, theta) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "value"])
        for k, v in enumerate(np.asarray(theta, dtype=float)):
            writer.writerow([k, f"{v:.17g}"])


def read_theta_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    theta = np.zeros(len(rows))
    for r in rows:
        theta[int(r["index"])] = float(r["value"])
    return theta

