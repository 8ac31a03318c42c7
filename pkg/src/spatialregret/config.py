"""Run configuration: a versioned YAML/JSON schema mapped onto dataclasses.

Unknown keys are rejected at every level. Patterns are written as matrices of
``"0"``, ``"x"`` and ``"z^-k"`` entries.
"""

import json
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from pathlib import Path
from typing import Optional, get_args, get_origin, get_type_hints

import yaml

from .errors import ConfigError

SCHEMA_VERSION = 1

CHAIN_DELAYED = [
    ["x", "z^-1", "0", "0", "0"],
    ["z^-1", "x", "z^-1", "0", "0"],
    ["0", "z^-1", "x", "z^-1", "0"],
    ["0", "0", "z^-1", "x", "z^-1"],
    ["0", "0", "0", "z^-1", "x"],
]
CHAIN_WITH_BUS1 = [
    ["x", "x", "0", "0", "0"],
    ["x", "x", "x", "0", "0"],
    ["x", "x", "x", "x", "0"],
    ["x", "0", "x", "x", "x"],
    ["x", "0", "0", "x", "x"],
]


@dataclass
class PowerGridSection:
    bus_count: int = 5
    inertia: float = 2.0
    damping: float = 2.0
    coupling: float = 20.0
    ground_coupling: Optional[float] = None
    Ts: float = 0.02


@dataclass
class PlantSection:
    """``source``: ``power_grid`` (builtin), ``state_space`` (JSON file) or ``frf`` (CSV file)."""

    source: str = "power_grid"
    power_grid: PowerGridSection = field(default_factory=PowerGridSection)
    state_space_file: Optional[str] = None
    frf_file: Optional[str] = None


@dataclass
class ExperimentSection:
    excitation: str = "impulse"
    N_s: int = 30000


@dataclass
class GridSection:
    w_min: float = 1e-2
    w_max: Optional[float] = None  # None -> Nyquist
    points: int = 150
    spacing: str = "log"


@dataclass
class StructureSection:
    pattern: list = field(default_factory=lambda: [list(r) for r in CHAIN_DELAYED])
    order: int = 2
    basis_pole: float = 0.0


@dataclass
class OracleSection:
    pattern: Optional[list] = field(default_factory=lambda: [list(r) for r in CHAIN_WITH_BUS1])
    objective: str = "hinf"
    file: Optional[str] = None  # controller JSON of a previously synthesized oracle


@dataclass
class SynthesisSection:
    objective: str = "regret"
    baselines: list = field(default_factory=lambda: ["h2", "hinf"])
    max_iter: int = 15
    rel_tol: float = 1e-4
    tol_feas: float = 1e-7
    tol_gap: float = 1e-7
    solver_max_iter: int = 200
    regularization: float = 0.0


@dataclass
class EvaluationSection:
    channels: list = field(default_factory=lambda: [0])
    tones: list = field(default_factory=lambda: [[8.0, 1.0, 0.0], [38.0, 1.0, 0.0]])
    periods: int = 100
    sweep_channel: int = 0


@dataclass
class RunConfig:
    version: int = SCHEMA_VERSION
    seed: int = 0
    output_dir: str = "spatialregret-out"
    plant: PlantSection = field(default_factory=PlantSection)
    experiments: ExperimentSection = field(default_factory=ExperimentSection)
    grid: GridSection = field(default_factory=GridSection)
    structure: StructureSection = field(default_factory=StructureSection)
    oracle: OracleSection = field(default_factory=OracleSection)
    synthesis: SynthesisSection = field(default_factory=SynthesisSection)
    evaluation: EvaluationSection = field(default_factory=EvaluationSection)

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self) -> "RunConfig":
        if self.version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported config version {self.version}; expected {SCHEMA_VERSION}")
        if self.plant.source not in ("power_grid", "state_space", "frf"):
            raise ConfigError(f"plant.source must be power_grid, state_space or frf")
        if self.plant.source == "state_space" and not self.plant.state_space_file:
            raise ConfigError("plant.state_space_file is required for source state_space")
        if self.plant.source == "frf" and not self.plant.frf_file:
            raise ConfigError("plant.frf_file is required for source frf")
        if self.experiments.excitation not in ("impulse", "multisine"):
            raise ConfigError("experiments.excitation must be impulse or multisine")
        if self.experiments.N_s < 1:
            raise ConfigError("experiments.N_s must be at least 1")
        if self.grid.points < 1 or self.grid.w_min <= 0:
            raise ConfigError("grid.points must be >= 1 and grid.w_min > 0")
        if self.grid.spacing not in ("log", "linear"):
            raise ConfigError("grid.spacing must be log or linear")
        if self.structure.order < 1 or not abs(self.structure.basis_pole) < 1:
            raise ConfigError("structure.order must be >= 1 and |structure.basis_pole| < 1")
        if self.synthesis.objective not in ("h2", "hinf", "regret"):
            raise ConfigError("synthesis.objective must be h2, hinf or regret")
        for b in self.synthesis.baselines:
            if b not in ("h2", "hinf"):
                raise ConfigError(f"unknown baseline objective {b!r}")
        if self.oracle.objective not in ("h2", "hinf"):
            raise ConfigError("oracle.objective must be h2 or hinf")
        if self.synthesis.max_iter < 1:
            raise ConfigError("synthesis.max_iter must be at least 1")
        for tone in self.evaluation.tones:
            if len(tone) != 3:
                raise ConfigError("evaluation.tones entries are [omega, amplitude, phase]")
        return self


def _build(cls, data, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'} must be a mapping, got {type(data).__name__}")
    hints = get_type_hints(cls)
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) in {path or 'config'}: {', '.join(unknown)}")
    kwargs = {}
    for name, value in data.items():
        typ = hints[name]
        if get_origin(typ) is Optional or type(None) in get_args(typ):
            inner = [a for a in get_args(typ) if a is not type(None)][0]
            typ = inner if value is not None else type(None)
        where = f"{path}.{name}" if path else name
        if is_dataclass(typ):
            kwargs[name] = _build(typ, value, where)
        elif typ is float and isinstance(value, (int, float)) and not isinstance(value, bool):
            kwargs[name] = float(value)
        elif typ in (int, str, list) and not isinstance(value, typ) or (typ is int and isinstance(value, bool)):
            raise ConfigError(f"{where} must be of type {typ.__name__}, got {value!r}")
        else:
            kwargs[name] = value
    return cls(**kwargs)


def config_from_dict(data: dict) -> RunConfig:
    return _build(RunConfig, data or {}, "").validate()


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    return config_from_dict(data or {})


def dump_config(cfg: RunConfig, path) -> None:
    """Write the resolved config; ``output_dir`` is left out so the file is location independent."""
    data = cfg.to_dict()
    data.pop("output_dir")
    with open(path, "w") as fh:
        yaml.safe_dump(data, fh, sort_keys=True, default_flow_style=None)


def full_scale(cfg: RunConfig) -> RunConfig:
    """600-point grid and 30 outer iterations."""
    return replace(
        cfg,
        grid=replace(cfg.grid, points=600),
        synthesis=replace(cfg.synthesis, max_iter=30),
    )


def describe_keys() -> str:
    """Flat listing of every config key with its default, for ``--help``."""
    lines = []

    def walk(obj, prefix):
        for f in fields(obj):
            val = getattr(obj, f.name)
            key = f"{prefix}{f.name}"
            if is_dataclass(val):
                walk(val, key + ".")
            else:
                lines.append(f"  {key} = {json.dumps(val) if not isinstance(val, str) else val}")

    walk(RunConfig(), "")
    return "\n".join(lines)
