"""File-based pipeline stages behind the command-line interface.

Output layout under the run directory::

    config.yaml                      resolved configuration
    experiments/experiment_NNN.csv   simulate-experiments
    frf/G22.csv, frf/plant.csv       estimate-frf
    frf/assumptions.txt
    controllers/<name>/              synthesize (name: oracle, h2, hinf, regret)
        theta.csv controller.json report.json history.csv certificate.json
    evaluation/                      evaluate
        worst_case_<name>.csv column<c>_<name>.csv energy_<name>.csv
        summary.csv reductions.csv summary.txt

Each stage reads only files written by earlier stages, so a run can be
resumed from any stage.
"""

from __future__ import annotations

import contextlib
import csv
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import config as C
from .errors import ConfigError, NotASuperset, SynthesisError, UnstableClosedLoop
from .evaluation import (
    H2_CONVENTION,
    DisturbanceSpec,
    closed_loop_frf,
    column_energy_sweep,
    default_horizon,
    h2_norm,
    hinf_norm,
    percent_reduction,
    spatial_regret_value,
    time_domain_experiment,
    transient_steps,
    worst_case_sweep,
    write_sweep_csv,
)
from .frf import (
    GeneralizedPlantFrf,
    assemble_generalized_plant,
    check_assumptions,
    estimate_frf,
    impulse_experiments,
    multisine_experiments,
    read_experiment_csvs,
    read_plant_csv,
    write_experiment_csvs,
    write_frf_csv,
    write_plant_csv,
)
from .grid import make_linear_grid, make_log_grid
from .io import read_controller_json, read_model_json, write_controller_json
from .lti import (
    PowerGridParams,
    StateSpaceModel,
    assemble_networked,
    build_power_grid,
    closed_loop_spectral_radius,
    realize_controller,
)
from .structure import (
    ControllerFactors,
    SparsityPattern,
    build_factor_parameterization,
    verify_pattern,
    write_theta_csv,
)
from .synthesis import (
    H2,
    HINF,
    REGRET,
    OracleData,
    SpatialRegret,
    SynthesisConfig,
    SynthesisReport,
    iterate_synthesis,
    synthesize_oracle,
)

log = logging.getLogger(__name__)

ORACLE = "oracle"
CONTROLLER_ORDER = (ORACLE, H2, HINF, REGRET)


@contextlib.contextmanager
def stage(name: str):
    """Tag exceptions with the pipeline stage they came from."""
    t0 = time.perf_counter()
    log.info("stage %s: start", name)
    try:
        yield
    except Exception as exc:
        if not hasattr(exc, "stage"):
            exc.stage = name
        raise
    log.info("stage %s: done in %.1fs", name, time.perf_counter() - t0)


@dataclass(frozen=True)
class Layout:
    root: Path

    def __post_init__(self):
        object.__setattr__(self, "root", Path(self.root))

    @property
    def experiments(self) -> Path:
        return self.root / "experiments"

    @property
    def frf(self) -> Path:
        return self.root / "frf"

    @property
    def plant_csv(self) -> Path:
        return self.frf / "plant.csv"

    @property
    def evaluation(self) -> Path:
        return self.root / "evaluation"

    def controller_dir(self, name: str) -> Path:
        return self.root / "controllers" / name

    def controller_json(self, name: str) -> Path:
        return self.controller_dir(name) / "controller.json"


# ---------------------------------------------------------------------------
# plant, grid and structure from the config


def build_model(cfg: C.RunConfig) -> StateSpaceModel | None:
    """True generalized plant, or ``None`` for FRF-only configurations."""
    src = cfg.plant.source
    if src == "power_grid":
        pg = cfg.plant.power_grid
        params = PowerGridParams(
            bus_count=pg.bus_count, inertia=pg.inertia, damping=pg.damping,
            coupling=pg.coupling, ground_coupling=pg.ground_coupling, Ts=pg.Ts,
        )
        try:
            return assemble_networked(build_power_grid(params))
        except ValueError as exc:
            raise ConfigError(f"plant.power_grid: {exc}") from exc
    if src == "state_space":
        model = read_model_json(cfg.plant.state_space_file)
        if model.n_w == 0 or model.n_z == 0:
            raise ConfigError("state-space plant must declare n_w and n_z")
        return model
    return None


def build_grid(cfg: C.RunConfig, Ts: float):
    g = cfg.grid
    w_max = np.pi / Ts if g.w_max is None else g.w_max
    make = make_log_grid if g.spacing == "log" else make_linear_grid
    return make(g.w_min, w_max, g.points, Ts)


def target_pattern(cfg: C.RunConfig) -> SparsityPattern:
    try:
        return SparsityPattern.from_text(cfg.structure.pattern)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"structure.pattern: {exc}") from exc


def oracle_pattern(cfg: C.RunConfig) -> SparsityPattern | None:
    if cfg.oracle.pattern is None:
        return None
    try:
        return SparsityPattern.from_text(cfg.oracle.pattern)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"oracle.pattern: {exc}") from exc


def synthesis_config(cfg: C.RunConfig) -> SynthesisConfig:
    s = cfg.synthesis
    return SynthesisConfig(
        max_iter=s.max_iter, rel_tol=s.rel_tol, tol_feas=s.tol_feas, tol_gap=s.tol_gap,
        solver_max_iter=s.solver_max_iter, regularization=s.regularization,
    )


def _require(path: Path, what: str, producer: str) -> Path:
    if not path.exists():
        raise ConfigError(f"missing {what} {path}; run `{producer}` first")
    return path


# ---------------------------------------------------------------------------
# stages


def simulate_experiments(cfg: C.RunConfig, layout: Layout) -> list[Path]:
    model = build_model(cfg)
    if model is None:
        raise ConfigError("simulate-experiments needs a model (plant.source power_grid or state_space)")
    ex = cfg.experiments
    if ex.excitation == "impulse":
        batch = impulse_experiments(model, ex.N_s)
    else:
        batch = multisine_experiments(model, ex.N_s, seed=cfg.seed)
    return write_experiment_csvs(layout.experiments, batch)


def estimate_plant(cfg: C.RunConfig, layout: Layout) -> GeneralizedPlantFrf:
    """Estimate ``G22`` from the experiment files and assemble the generalized plant."""
    layout.frf.mkdir(parents=True, exist_ok=True)
    if cfg.plant.source == "frf":
        try:
            plant = read_plant_csv(cfg.plant.frf_file)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read plant FRF {cfg.plant.frf_file}: {exc}") from exc
    else:
        paths = sorted(layout.experiments.glob("experiment_*.csv"))
        if not paths:
            raise ConfigError(f"no experiment files in {layout.experiments}; run `simulate-experiments` first")
        batch = read_experiment_csvs(paths)
        model = build_model(cfg)
        if not np.isclose(batch.Ts, model.Ts, rtol=0, atol=1e-15):
            raise ConfigError(f"experiments use Ts={batch.Ts}, the plant Ts={model.Ts}")
        G22 = estimate_frf(batch, build_grid(cfg, batch.Ts))
        write_frf_csv(layout.frf / "G22.csv", G22.grid, {"G22": G22.data})
        plant = assemble_generalized_plant(G22, model)
    write_plant_csv(layout.plant_csv, plant)
    rep = check_assumptions(plant)
    with open(layout.frf / "assumptions.txt", "w") as fh:
        fh.write(f"A1 (G12 full column rank): {'pass' if rep.a1_pass else 'FAIL'}\n")
        fh.write(f"A2 (bounded on grid): {'pass' if rep.a2_pass else 'FAIL'}\n")
        for om in rep.a1_violations:
            fh.write(f"A1 violation at omega={om:.17g}\n")
        for om in rep.a2_violations:
            fh.write(f"A2 violation at omega={om:.17g}\n")
    if not rep.passed:
        log.warning("plant assumptions fail on the grid; see %s", layout.frf / "assumptions.txt")
    return plant


def load_plant(layout: Layout) -> GeneralizedPlantFrf:
    return read_plant_csv(_require(layout.plant_csv, "plant FRF", "estimate-frf"))


def _write_synthesis(out: Path, report: SynthesisReport, plant, model, pattern, timing: bool) -> None:
    out.mkdir(parents=True, exist_ok=True)
    report.write_json(out / "report.json")
    report.write_history_csv(out / "history.csv", include_timing=timing)
    if report.factors is None:
        return
    factors = report.factors
    write_theta_csv(out / "theta.csv", factors.theta)
    write_controller_json(out / "controller.json", factors)
    pr = verify_pattern(factors, pattern, plant.grid)
    cert = {
        "pattern_passed": pr.passed,
        "max_zero_entry": pr.max_zero_entry,
        "max_delayed_feedthrough": pr.max_delayed_feedthrough,
        "spectral_radius": None if model is None else closed_loop_spectral_radius(model, realize_controller(factors)),
        "winding": report.records[-1].winding if report.records else 0,
        "min_sv_Y": report.records[-1].y_sv_min if report.records else None,
    }
    with open(out / "certificate.json", "w") as fh:
        json.dump(cert, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _run_synthesis(out, plant, model, pattern, timing, fn):
    try:
        report = fn()
    except SynthesisError as exc:
        if exc.report is not None:
            _write_synthesis(out, exc.report, plant, model, pattern, timing)
        raise
    return report


def synthesize_oracle_stage(cfg: C.RunConfig, layout: Layout, timing: bool = False) -> OracleData:
    plant = load_plant(layout)
    model = build_model(cfg)
    sup = oracle_pattern(cfg)
    if sup is None:
        raise ConfigError("oracle.pattern is required to synthesize the oracle")
    out = layout.controller_dir(ORACLE)
    oracle = None

    def run():
        nonlocal oracle
        oracle, rep = synthesize_oracle(
            plant, sup, cfg.oracle.objective, target_pattern(cfg), cfg.structure.order,
            cfg.structure.basis_pole, synthesis_config(cfg), model,
        )
        return rep

    report = _run_synthesis(out, plant, model, sup, timing, run)
    _write_synthesis(out, report, plant, model, sup, timing)
    return oracle


def load_oracle(cfg: C.RunConfig, layout: Layout, plant: GeneralizedPlantFrf) -> OracleData:
    """Oracle from ``oracle.file``, else from the run directory, else synthesized now."""
    if cfg.oracle.file:
        path = Path(cfg.oracle.file)
    elif layout.controller_json(ORACLE).exists():
        path = layout.controller_json(ORACLE)
    elif cfg.oracle.pattern is not None:
        return synthesize_oracle_stage(cfg, layout)
    else:
        raise ConfigError("spatial-regret synthesis needs oracle.file or oracle.pattern")
    factors = read_controller_json(path)
    if factors.Ts != plant.grid.Ts:
        raise ConfigError(f"oracle Ts={factors.Ts} differs from the plant Ts={plant.grid.Ts}")
    if not factors.param.pattern.contains(target_pattern(cfg)):
        raise NotASuperset("oracle pattern does not contain the target pattern")
    T_hat = closed_loop_frf(plant, factors.K(plant.grid))
    value = hinf_norm(T_hat) if cfg.oracle.objective == HINF else h2_norm(T_hat)
    return OracleData(factors, T_hat, cfg.oracle.objective, value, factors.param.pattern)


def synthesize_stage(cfg: C.RunConfig, layout: Layout, objective: str, timing: bool = False):
    """Synthesize one controller; ``objective`` in ``oracle, h2, hinf, regret``."""
    if objective == ORACLE:
        return synthesize_oracle_stage(cfg, layout, timing).factors
    if objective not in (H2, HINF, REGRET):
        raise ConfigError(f"unknown objective {objective!r}")
    plant = load_plant(layout)
    model = build_model(cfg)
    pattern = target_pattern(cfg)
    try:
        param = build_factor_parameterization(
            pattern, cfg.structure.order, cfg.structure.basis_pole, plant.grid.Ts
        )
    except ValueError as exc:
        raise ConfigError(f"structure: {exc}") from exc
    if objective == REGRET:
        goal = SpatialRegret(load_oracle(cfg, layout, plant))
    else:
        goal = objective
    out = layout.controller_dir(objective)
    scfg = synthesis_config(cfg)
    report = _run_synthesis(
        out, plant, model, pattern, timing,
        lambda: iterate_synthesis(plant, param, None, goal, scfg, model),
    )
    _write_synthesis(out, report, plant, model, pattern, timing)
    return report.factors


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class ControllerSummary:
    name: str
    h2_sq: float
    hinf_sq: float
    regret: float
    regret_argmax_omega: float
    spectral_radius: float
    avg_z_norm_sq: float
    stable: bool = True


@dataclass
class EvaluationSummary:
    rows: list[ControllerSummary] = field(default_factory=list)
    reductions: dict = field(default_factory=dict)  # baseline -> percent

    @property
    def unstable(self) -> list[str]:
        return [r.name for r in self.rows if not r.stable]


def resolve_controllers(layout: Layout, names) -> dict[str, Path]:
    if not names:
        base = layout.root / "controllers"
        found = sorted(p.parent.name for p in base.glob("*/controller.json")) if base.exists() else []
        names = [n for n in CONTROLLER_ORDER if n in found] + [n for n in found if n not in CONTROLLER_ORDER]
        if not names:
            raise ConfigError(f"no controllers under {base}; run `synthesize` first")
    out = {}
    for n in names:
        path = Path(n) if n.endswith(".json") else layout.controller_json(n)
        name = path.parent.name if n.endswith(".json") else n
        if not path.exists():
            raise ConfigError(f"missing controller file {path}")
        out[name] = path
    return out


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def evaluate_stage(cfg: C.RunConfig, layout: Layout, names=None) -> EvaluationSummary:
    plant = load_plant(layout)
    model = build_model(cfg)
    paths = resolve_controllers(layout, names)
    factors = {n: read_controller_json(p) for n, p in paths.items()}
    grid = plant.grid
    ev = cfg.evaluation
    out = layout.evaluation
    out.mkdir(parents=True, exist_ok=True)

    T = {n: closed_loop_frf(plant, f.K(grid)) for n, f in factors.items()}
    if ORACLE in T:
        T_hat = T[ORACLE]
    elif layout.controller_json(ORACLE).exists():
        T_hat = closed_loop_frf(plant, read_controller_json(layout.controller_json(ORACLE)).K(grid))
    else:
        T_hat = None

    disturbance = DisturbanceSpec(ev.channels, [tuple(t) for t in ev.tones], 1, grid.Ts)
    summary = EvaluationSummary()
    traces = {}
    for name, f in factors.items():
        Tn = T[name]
        write_sweep_csv(out / f"worst_case_{name}.csv", grid, worst_case_sweep(Tn))
        write_sweep_csv(
            out / f"column{ev.sweep_channel}_{name}.csv", grid, column_energy_sweep(Tn, ev.sweep_channel)
        )
        reg = spatial_regret_value(Tn, T_hat) if T_hat is not None else None
        row = ControllerSummary(
            name, h2_norm(Tn) ** 2, hinf_norm(Tn) ** 2,
            reg.value if reg else float("nan"), reg.argmax_omega if reg else float("nan"),
            float("nan"), float("nan"),
        )
        if model is not None:
            K = realize_controller(f)
            rho = closed_loop_spectral_radius(model, K)
            row.spectral_radius = rho
            try:
                ws = transient_steps(disturbance, rho)
                n = default_horizon(disturbance.fundamental_period, grid.Ts, ws, ev.periods)
                d = DisturbanceSpec(disturbance.channels, disturbance.tones, n, grid.Ts)
                tr = time_domain_experiment(model, K, d, window_start=ws)
                tr.write_csv(out / f"energy_{name}.csv")
                traces[name] = tr
                row.avg_z_norm_sq = tr.average
            except UnstableClosedLoop as exc:
                log.error("controller %s: %s", name, exc)
                row.stable = False
        summary.rows.append(row)

    if REGRET in traces:
        for base in (H2, HINF):
            if base in traces:
                summary.reductions[base] = percent_reduction(traces[REGRET], traces[base])
    _write_summary(out, summary, ev)
    return summary


def _write_summary(out: Path, summary: EvaluationSummary, ev) -> None:
    cols = ["controller", "h2_sq", "hinf_sq", "regret", "regret_argmax_omega",
            "spectral_radius", "avg_z_norm_sq", "stable"]
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in summary.rows:
            w.writerow([r.name, _fmt(r.h2_sq), _fmt(r.hinf_sq), _fmt(r.regret),
                        _fmt(r.regret_argmax_omega), _fmt(r.spectral_radius),
                        _fmt(r.avg_z_norm_sq), int(r.stable)])
    with open(out / "reductions.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["controller", "baseline", "percent_reduction"])
        for base, v in summary.reductions.items():
            w.writerow([REGRET, base, _fmt(v)])
    tones = ", ".join(f"{om:g} rad/s" for om, _, _ in ev.tones)
    lines = [
        f"H2 convention: {H2_CONVENTION}",
        "hinf_sq: grid max of sigma_max(T)^2; regret: grid max of lambda_max(T*T - T_hat*T_hat)",
        f"time domain: sinusoids at {tones} in channel(s) {list(ev.channels)}",
        "",
        f"{'controller':<12}{'h2^2':>14}{'hinf^2':>14}{'regret':>12}{'rho':>10}{'<|z|^2>':>12}",
    ]
    for r in summary.rows:
        lines.append(
            f"{r.name:<12}{r.h2_sq:>14.6g}{r.hinf_sq:>14.6g}{r.regret:>12.4g}"
            f"{r.spectral_radius:>10.6f}{r.avg_z_norm_sq:>12.6g}" + ("" if r.stable else "  UNSTABLE")
        )
    if summary.reductions:
        lines.append("")
        for base, v in summary.reductions.items():
            lines.append(f"||z|| reduction of {REGRET} vs {base}: {v:.2f}%")
    (out / "summary.txt").write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# end to end


def prepare_output_dir(path: Path, force: bool) -> None:
    path = Path(path)
    if path.exists() and any(path.iterdir()) and not force:
        raise ConfigError(f"output directory {path} is not empty; pass --force to overwrite")
    path.mkdir(parents=True, exist_ok=True)


def reproduce_case_study(cfg: C.RunConfig, layout: Layout, force: bool = False,
                         timing: bool = False) -> EvaluationSummary:
    prepare_output_dir(layout.root, force)
    C.dump_config(cfg, layout.root / "config.yaml")
    with stage("simulate-experiments"):
        simulate_experiments(cfg, layout)
    with stage("estimate-frf"):
        estimate_plant(cfg, layout)
    with stage("synthesize oracle"):
        synthesize_oracle_stage(cfg, layout, timing)
    names = [ORACLE]
    for objective in list(cfg.synthesis.baselines) + [REGRET]:
        with stage(f"synthesize {objective}"):
            synthesize_stage(cfg, layout, objective, timing)
        names.append(objective)
    with stage("evaluate"):
        return evaluate_stage(cfg, layout, names)
