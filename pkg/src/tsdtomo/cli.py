"""``tsd`` command line: simulate, reconstruct, sweep, validate.

Exit codes: 0 success, 2 config/input error, 3 solver did not converge,
4 validation failure.  ``TSD_LOG`` sets the log level (default WARNING).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from pydantic import ValidationError

from . import pipeline
from .reps import choi_from_json, parse_gate, ptm_from_json, validate_cptp
from .schemas import DatasetFile, ExperimentConfig, ResultFile
from .tomography import InvalidDatasetError, RankDeficientDesignError, ReconstructionConfig, design_rank

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NOT_CONVERGED = 3
EXIT_INVALID = 4

log = logging.getLogger("tsdtomo")


class ConfigError(Exception):
    pass


def _line_of(text: str, loc: Sequence[Any]) -> int | None:
    """Best-effort line number of a JSON path, found by walking its keys in order."""
    pos = 0
    found = None
    for part in loc:
        if isinstance(part, int):
            continue
        idx = text.find(f'"{part}"', pos)
        if idx < 0:
            break
        pos = idx
        found = text.count("\n", 0, idx) + 1
    return found


def _format_errors(path: Path, text: str, exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = [p for p in err["loc"] if p not in ("coherent", "gaussian", "tophat", "none")]
        where = ".".join(str(p) for p in loc) or "<root>"
        line = _line_of(text, loc)
        prefix = f"{path}:{line}" if line else str(path)
        lines.append(f"{prefix}: {where}: {err['msg']}")
    return "\n".join(lines)


def _read_model(path: Path, model: type):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        return model.model_validate_json(text)
    except ValidationError as exc:
        first = exc.errors()[0]
        if first["type"] == "json_invalid":
            try:
                json.loads(text)
            except json.JSONDecodeError as jexc:
                raise ConfigError(f"{path}:{jexc.lineno}: invalid JSON: {jexc.msg}") from None
        raise ConfigError(_format_errors(Path(path), text, exc)) from None


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = _read_model(args.config, ExperimentConfig) if args.config else ExperimentConfig()
    d = cfg.model_dump()
    if args.seed is not None:
        d["shots"]["seed"] = args.seed
    if args.shots is not None:
        d["shots"]["n_shots"] = args.shots
    if args.exact_probabilities:
        d["shots"]["exact_probabilities"] = True
    if args.noise_all_gates:
        d["noise_all_gates"] = True
    if getattr(args, "gate", None):
        d["gate"] = args.gate
    if args.out:
        d["out"] = args.out
    try:
        return ExperimentConfig.model_validate(d)
    except ValidationError as exc:
        raise ConfigError(_format_errors(Path("<command line>"), "", exc)) from None


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    data = pipeline.simulate(cfg)
    path = pipeline.write_json(Path(cfg.out) / "dataset.json", pipeline.dataset_to_json(data))
    print(pipeline.dumps({"dataset": str(path), "provenance": data.provenance}), end="")
    return EXIT_OK


def cmd_reconstruct(args: argparse.Namespace) -> int:
    data = pipeline.dataset_from_file(_read_model(args.dataset, DatasetFile))
    identity = None
    if args.mitigate:
        identity = pipeline.dataset_from_file(_read_model(args.mitigate, DatasetFile))
    target = args.target or data.gate_label
    try:
        parse_gate(target)
    except ValueError as exc:
        raise ConfigError(f"--target: {exc}") from None
    rcfg = ReconstructionConfig()
    if args.config:
        rcfg = _read_model(args.config, ExperimentConfig).reconstruction.to_config()
    if args.weighted:
        rcfg = ReconstructionConfig(**{**rcfg.__dict__, "binomial_weights": True})

    result, dec = pipeline.analyse(data, target, rcfg, identity)
    echo = {**rcfg.__dict__, "dataset": str(args.dataset), "mitigate": str(args.mitigate) if args.mitigate else None}
    out = pipeline.result_to_json(result, target, dec, echo)
    path = pipeline.write_json(Path(args.out or ".") / "result.json", out)
    print(pipeline.dumps({"result": str(path), "budget": out["budget"], "converged": result.converged}), end="")
    for w in result.warnings:
        log.warning(w)
    if not result.converged:
        log.error("solver did not converge after %d iterations", result.iterations)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    if cfg.sweep is None:
        raise ConfigError(f"{args.config}: sweep: a sweep section is required")
    report = pipeline.run_sweep(cfg, jobs=args.jobs)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.csv").write_text(report.to_csv())
    (out / "sweep.json").write_text(report.to_json())
    print(report.to_csv(), end="")
    if not all(r["converged"] for r in report.rows):
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _validate_dataset(text: str, path: Path) -> list[str]:
    try:
        model = DatasetFile.model_validate_json(text)
    except ValidationError as exc:
        return _format_errors(path, text, exc).splitlines()
    try:
        data = pipeline.dataset_from_file(model)
    except (ValueError, InvalidDatasetError) as exc:
        return [f"{path}: {exc}"]
    rank = design_rank([s.Y for s in data.settings])
    problems = []
    if rank < 12:
        problems.append(f"{path}: settings: design rank {rank} < 12, channel not identifiable")
    print(f"dataset: {len(data.settings)} settings, gate {data.gate_label!r}, design rank {rank}")
    return problems


def _validate_result(text: str, path: Path, tol: float) -> list[str]:
    try:
        model = ResultFile.model_validate_json(text)
    except ValidationError as exc:
        return _format_errors(path, text, exc).splitlines()
    problems = []
    rho = choi_from_json(model.rho_hat.model_dump())
    report = validate_cptp(rho, tol)
    print(
        f"result: min eigenvalue {report.min_eigenvalue:.3e}, "
        f"hermiticity defect {report.hermiticity_defect:.3e}, TP defect {report.tp_defect:.3e}"
    )
    if not report.passed:
        problems.append(
            f"{path}: rho_hat: CPTP check failed at tol {tol:g} "
            f"(min eigenvalue {report.min_eigenvalue:.3e}, TP defect {report.tp_defect:.3e})"
        )
    T = ptm_from_json(model.T_hat.model_dump())
    if not np.allclose(T[0], [1, 0, 0, 0], atol=tol):
        problems.append(f"{path}: T_hat: first row is not (1, 0, 0, 0)")
    return problems


def cmd_validate(args: argparse.Namespace) -> int:
    path = Path(args.file)
    try:
        text = path.read_text()
        obj = json.loads(text)
    except OSError as exc:
        print(f"{path}: {exc.strerror}", file=sys.stderr)
        return EXIT_INVALID
    except json.JSONDecodeError as exc:
        print(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}", file=sys.stderr)
        return EXIT_INVALID
    if isinstance(obj, dict) and "settings" in obj:
        problems = _validate_dataset(text, path)
    elif isinstance(obj, dict) and "T_hat" in obj:
        problems = _validate_result(text, path, args.tol)
    else:
        problems = [f"{path}: neither a dataset (settings) nor a result (T_hat) file"]
    for p in problems:
        print(p, file=sys.stderr)
    if problems:
        return EXIT_INVALID
    print("ok")
    return EXIT_OK


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="experiment config JSON")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--shots", type=int, help="shots per setting")
    p.add_argument("--exact-probabilities", action="store_true",
                   help="average exact excitation probabilities instead of sampling bits")
    p.add_argument("--noise-all-gates", action="store_true",
                   help="apply the per-shot angle noise to the A/B gates as well")
    p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tsd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a tomography dataset")
    _common(p)
    p.add_argument("--gate", help="gate under test, overrides the config (e.g. I for a calibration run)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconstruct", help="reconstruct a PTM and decompose its error")
    p.add_argument("dataset", type=Path)
    p.add_argument("--target", help="ideal gate label (default: the dataset's gate_label)")
    p.add_argument("--mitigate", type=Path, help="identity-gate dataset for setting-error mitigation")
    p.add_argument("--config", type=Path, help="config JSON; only its reconstruction section is used")
    p.add_argument("--weighted", action="store_true", help="binomial weights in the least-squares fit")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("sweep", help="run the pipeline across a noise sweep")
    _common(p)
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="schema and CPTP checks on a dataset or result file")
    p.add_argument("file", type=Path)
    p.add_argument("--tol", type=float, default=1e-8, help="CPTP tolerance")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("TSD_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    except (RankDeficientDesignError, InvalidDatasetError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
