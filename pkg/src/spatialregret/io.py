"""JSON files for state-space models and synthesized controllers.

State-space file::

    {"n": 10, "n_inputs": 10, "n_outputs": 15,
     "A": [[...]], "B": [[...]], "C": [[...]], "D": [[...]], "Ts": 0.02,
     "n_w": 5, "n_z": 10}

``n_w``/``n_z`` are optional (zero for a plain system); the explicit sizes
keep empty matrices readable. A controller file adds
the factor parameterization and ``theta`` so that ``X`` and ``Y`` can be
rebuilt exactly; the realized ``K = Y^{-1} X`` sits under ``"state_space"``.
"""

import json

import numpy as np

from .errors import ConfigError
from .lti import StateSpaceModel, realize_controller
from .structure import ControllerFactors, SparsityPattern, build_factor_parameterization

CONTROLLER_FORMAT = "spatialregret-controller"


def _matrix(x: np.ndarray) -> list:
    return np.asarray(x, dtype=float).tolist()


def model_to_dict(model: StateSpaceModel) -> dict:
    return {
        "n": int(model.n),
        "n_inputs": int(model.n_inputs),
        "n_outputs": int(model.n_outputs),
        "A": _matrix(model.A),
        "B": _matrix(model.B),
        "C": _matrix(model.C),
        "D": _matrix(model.D),
        "Ts": float(model.Ts),
        "n_w": int(model.n_w),
        "n_z": int(model.n_z),
    }


def model_from_dict(d: dict) -> StateSpaceModel:
    try:
        D = np.atleast_2d(np.asarray(d["D"], dtype=float))
        n = int(d.get("n", len(d["A"])))
        ni = int(d.get("n_inputs", D.shape[1]))
        no = int(d.get("n_outputs", D.shape[0]))
        A = np.asarray(d["A"], dtype=float).reshape(n, n)
        B = np.asarray(d["B"], dtype=float).reshape(n, ni)
        C = np.asarray(d["C"], dtype=float).reshape(no, n)
        D = D.reshape(no, ni)
        return StateSpaceModel(A, B, C, D, float(d["Ts"]), int(d.get("n_w", 0)), int(d.get("n_z", 0)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed state-space description: {exc}") from exc


def _dump(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _load(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc


def write_model_json(path, model: StateSpaceModel) -> None:
    _dump(model_to_dict(model), path)


def read_model_json(path) -> StateSpaceModel:
    return model_from_dict(_load(path))


def write_controller_json(path, factors: ControllerFactors) -> None:
    p = factors.param
    _dump(
        {
            "format": CONTROLLER_FORMAT,
            "version": 1,
            "pattern": p.pattern.to_text(),
            "order": int(p.order),
            "basis_pole": float(p.pole),
            "Ts": float(p.Ts),
            "theta": factors.theta.tolist(),
            "state_space": model_to_dict(realize_controller(factors)),
        },
        path,
    )


def read_controller_json(path) -> ControllerFactors:
    d = _load(path)
    if d.get("format") != CONTROLLER_FORMAT:
        raise ConfigError(f"{path} is not a controller file")
    try:
        param = build_factor_parameterization(
            SparsityPattern.from_text(d["pattern"]), int(d["order"]), float(d["basis_pole"]), float(d["Ts"])
        )
        return ControllerFactors(param, np.asarray(d["theta"], dtype=float))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"malformed controller file {path}: {exc}") from exc
