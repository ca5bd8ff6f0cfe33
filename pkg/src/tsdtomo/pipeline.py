"""Glue between files and the numerical core: simulate, reconstruct, decompose, sweep."""
from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import reps
from .decomposition import Decomposition, decompose
from .reps import parse_gate, ptm_of_unitary
from .schemas import SWEEP_PARAMETERS, DatasetFile, ExperimentConfig, ResultFile
from .simulator import NoiseModel, run_experiment
from .tomography import (
    PROTOCOL,
    MeasurementSetting,
    ReconstructionConfig,
    ReconstructionResult,
    TomographyDataset,
    mitigate_setting_errors,
    reconstruct,
    standard_settings,
)

CALIBRATION_STREAM = 1


def dumps(obj: Any) -> str:
    return json.dumps(obj, indent=2) + "\n"


def write_json(path: Path, obj: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))
    return path


# -- datasets -------------------------------------------------------------------

def dataset_to_json(data: TomographyDataset) -> dict[str, Any]:
    rows = []
    for i, (s, n, k) in enumerate(zip(data.settings, data.n_shots, data.n_excited)):
        row: dict[str, Any] = {"A": s.gate_A.label, "B": s.gate_B.label, "n_shots": n, "n_excited": k}
        if data.probabilities is not None:
            row["probability"] = data.probabilities[i]
        if data.timestamps is not None:
            row["timestamp"] = data.timestamps[i]
        rows.append(row)
    out: dict[str, Any] = {"protocol": PROTOCOL, "gate_label": data.gate_label, "settings": rows}
    if data.provenance is not None:
        out["provenance"] = data.provenance
    return out


def dataset_from_file(model: DatasetFile) -> TomographyDataset:
    settings = [MeasurementSetting(parse_gate(r.A), parse_gate(r.B)) for r in model.settings]
    probs = [r.probability for r in model.settings]
    if any(p is not None for p in probs) and any(p is None for p in probs):
        raise ValueError("either every setting or none carries an exact probability")
    stamps = [r.timestamp for r in model.settings]
    return TomographyDataset(
        settings=tuple(settings),
        n_shots=tuple(r.n_shots for r in model.settings),
        n_excited=tuple(r.n_excited for r in model.settings),
        gate_label=model.gate_label,
        probabilities=tuple(probs) if probs[0] is not None else None,
        provenance=model.provenance,
        timestamps=tuple(stamps) if all(t is not None for t in stamps) else None,
    )


def load_dataset(path: Path) -> TomographyDataset:
    return dataset_from_file(DatasetFile.model_validate_json(Path(path).read_text()))


# -- simulate / analyse -----------------------------------------------------------

def simulate(
    cfg: ExperimentConfig,
    noise: NoiseModel | None = None,
    seed_offset: int = 0,
    gate_label: str | None = None,
    stream: int = 0,
) -> TomographyDataset:
    label = gate_label or cfg.gate
    return run_experiment(
        parse_gate(label),
        standard_settings(),
        noise if noise is not None else cfg.noise.to_model(),
        cfg.readout.to_model(),
        cfg.shots.to_plan(seed_offset),
        setting_noise=cfg.setting_noise.to_model(),
        background=cfg.background_noise.to_model(),
        noise_all_gates=cfg.noise_all_gates,
        gate_label=label,
        stream=stream,
    )


def analyse(
    data: TomographyDataset,
    target: str,
    cfg: ReconstructionConfig | None = None,
    identity_data: TomographyDataset | None = None,
) -> tuple[ReconstructionResult, Decomposition]:
    if identity_data is None:
        result = reconstruct(data, cfg)
    else:
        result = mitigate_setting_errors(identity_data, data, cfg)
    return result, decompose(ptm_of_unitary(parse_gate(target)), result.T_hat)


def result_to_json(
    result: ReconstructionResult,
    target: str,
    dec: Decomposition | None,
    config_echo: dict[str, Any],
) -> dict[str, Any]:
    out: dict[str, Any] = {
        "target": target,
        "T_hat": reps.ptm_to_json(result.T_hat),
        "rho_hat": reps.choi_to_json(result.rho_hat),
        "objective": result.objective,
        "iterations": result.iterations,
        "residuals": {"primal": result.primal_residual, "dual": result.dual_residual},
        "converged": result.converged,
    }
    if dec is not None:
        out["budget"] = dec.to_dict()
        out["fidelity"] = {
            "entanglement": dec.entanglement_fidelity,
            "average_gate": dec.average_gate_fidelity,
        }
    if result.setting_operator is not None:
        out["setting_operator"] = reps.ptm_to_json(result.setting_operator)
    out["warnings"] = list(result.warnings)
    out["config"] = config_echo
    return out


def load_result(path: Path) -> ResultFile:
    return ResultFile.model_validate_json(Path(path).read_text())


# -- sweeps -----------------------------------------------------------------------

COLUMNS: tuple[tuple[str, type], ...] = (
    ("value", float),
    ("seed", int),
    ("total", float),
    ("markovian", float),
    ("coherent", float),
    ("nonmarkovian", float),
    ("additivity_residual", float),
    ("infidelity_r", float),
    ("dtheta_x", float),
    ("dtheta_y", float),
    ("dtheta_z", float),
    ("dtheta_axis", float),
    ("det_flag", int),
    ("F_e", float),
    ("F_av", float),
    ("objective", float),
    ("iterations", int),
    ("primal_residual", float),
    ("dual_residual", float),
    ("converged", bool),
)
COLUMN_NAMES = tuple(name for name, _ in COLUMNS)


def _fmt(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(text: str, kind: type) -> Any:
    if kind is bool:
        if text not in ("true", "false"):
            raise ValueError(f"expected true/false, got {text!r}")
        return text == "true"
    return kind(text)


@dataclass(frozen=True)
class SweepReport:
    parameter: str
    gate: str
    rows: tuple[dict[str, Any], ...] = field(default_factory=tuple)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMN_NAMES)
        for r in self.rows:
            w.writerow([_fmt(r[name]) for name in COLUMN_NAMES])
        return buf.getvalue()

    def to_json(self) -> str:
        return dumps({"parameter": self.parameter, "gate": self.gate, "columns": list(COLUMN_NAMES),
                      "rows": [dict(r) for r in self.rows]})

    @classmethod
    def from_csv(cls, text: str, parameter: str, gate: str) -> "SweepReport":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if tuple(header) != COLUMN_NAMES:
            raise ValueError("unexpected sweep CSV header")
        rows = tuple(
            {name: _parse(cell, kind) for (name, kind), cell in zip(COLUMNS, line)} for line in reader
        )
        return cls(parameter, gate, rows)

    @classmethod
    def from_json(cls, text: str) -> "SweepReport":
        obj = json.loads(text)
        rows = tuple({name: kind(r[name]) for name, kind in COLUMNS} for r in obj["rows"])
        return cls(obj["parameter"], obj["gate"], rows)


def sweep_row(
    value: float,
    seed: int,
    target_axis: np.ndarray,
    result: ReconstructionResult,
    dec: Decomposition,
) -> dict[str, Any]:
    b = dec.budget
    comps = dec.rotation.components if dec.rotation is not None else np.full(3, np.nan)
    return {
        "value": float(value),
        "seed": int(seed),
        "total": b.total,
        "markovian": b.markovian,
        "coherent": b.coherent,
        "nonmarkovian": b.nonmarkovian,
        "additivity_residual": b.additivity_residual,
        "infidelity_r": b.infidelity_r,
        "dtheta_x": float(comps[0]),
        "dtheta_y": float(comps[1]),
        "dtheta_z": float(comps[2]),
        # signed over/under-rotation along the target's own axis
        "dtheta_axis": float(comps @ target_axis),
        "det_flag": int(dec.polar.det_flag),
        "F_e": float(dec.entanglement_fidelity),
        "F_av": float(dec.average_gate_fidelity),
        "objective": float(result.objective),
        "iterations": int(result.iterations),
        "primal_residual": float(result.primal_residual),
        "dual_residual": float(result.dual_residual),
        "converged": bool(result.converged),
    }


def _sweep_point(args: tuple[ExperimentConfig, int, float]) -> dict[str, Any]:
    cfg, index, value = args
    noise = NoiseModel(SWEEP_PARAMETERS[cfg.sweep.parameter], value)
    data = simulate(cfg, noise, seed_offset=index)
    identity = None
    if cfg.mitigate:
        identity = simulate(cfg, NoiseModel.none(), seed_offset=index, gate_label="I",
                            stream=CALIBRATION_STREAM)
    result, dec = analyse(data, cfg.gate, cfg.reconstruction.to_config(), identity)
    return sweep_row(value, cfg.shots.seed + index, parse_gate(cfg.gate).axis_array, result, dec)


def run_sweep(cfg: ExperimentConfig, jobs: int = 1) -> SweepReport:
    """Run the full pipeline once per sweep value; point ``k`` uses seed ``seed + k``."""
    if cfg.sweep is None:
        raise ValueError("config has no 'sweep' section")
    tasks = [(cfg, i, v) for i, v in enumerate(cfg.sweep.values)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_point, tasks))
    else:
        rows = [_sweep_point(t) for t in tasks]
    return SweepReport(cfg.sweep.parameter, cfg.gate, tuple(rows))

