"""Twelve-setting process tomography of a single-qubit channel.

Each setting prepares ``|0>``, applies a known gate ``A``, the channel under
test, a known gate ``B`` and records the excited-state population.  With the
Pauli vectors of ``|0><0|`` and ``|1><1|`` the expected population is

    y = 2 Tr[Y T],    Y = T_A p0 p1^T T_B,

the factor 2 coming from ``Tr[sigma_a sigma_b] = 2 delta_ab``.  The PTM is
recovered by least squares over trace-preserving PTMs whose Choi matrix is
positive semidefinite, solved with an alternating-direction splitting on the
Choi variable.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .reps import (
    P_EXCITED,
    P_GROUND,
    UnitaryGate,
    choi_of_ptm,
    hermitize,
    identity_gate,
    ptm_of_choi,
    ptm_of_unitary,
    rx,
    ry,
    validate_cptp,
)

log = logging.getLogger(__name__)

PROTOCOL = "tsd-12"
N_FREE = 12
MITIGATION_DEVIATION_LIMIT = 1.0


class RankDeficientDesignError(ValueError):
    """The measurement settings do not determine a trace-preserving PTM."""


class InvalidDatasetError(ValueError):
    pass


@dataclass(frozen=True)
class MeasurementSetting:
    gate_A: UnitaryGate
    gate_B: UnitaryGate
    Y: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        Y = ptm_of_unitary(self.gate_A) @ np.outer(P_GROUND, P_EXCITED) @ ptm_of_unitary(self.gate_B)
        Y.setflags(write=False)
        object.__setattr__(self, "Y", Y)

    @property
    def labels(self) -> tuple[str, str]:
        return self.gate_A.label, self.gate_B.label


PREPARATIONS = (
    identity_gate(),
    rx(np.pi, "Rx(pi)"),
    rx(np.pi / 2, "Rx(pi/2)"),
    ry(np.pi / 2, "Ry(pi/2)"),
)
ANALYSES = (identity_gate(), ry(np.pi / 2, "Ry(pi/2)"), rx(np.pi / 2, "Rx(pi/2)"))


def standard_settings() -> list[MeasurementSetting]:
    """The 12 (A, B) pairs, A-major.

    Preparations ``{I, Rx(pi), Rx(pi/2), Ry(pi/2)}`` give input Bloch vectors
    ``+z, -z, -y, +x``; analyses ``{I, Ry(pi/2), Rx(pi/2)}`` measure along
    ``-z, +x, -y``.
    """
    return [MeasurementSetting(a, b) for a in PREPARATIONS for b in ANALYSES]


def literal_settings() -> list[MeasurementSetting]:
    """Variant with ``Ry(pi)`` as the fourth preparation.

    ``Ry(pi)`` and ``Rx(pi)`` both prepare ``|1>``, so this set only has rank 9
    and cannot be used for reconstruction; kept to document why it is not the
    default.
    """
    preps = PREPARATIONS[:3] + (ry(np.pi, "Ry(pi)"),)
    return [MeasurementSetting(a, b) for a in preps for b in ANALYSES]


def predict_outcome(setting: MeasurementSetting, T: np.ndarray) -> float:
    y = 2.0 * float(np.sum(setting.Y.T * np.asarray(T, dtype=float)))
    if -1e-9 <= y < 0.0:
        return 0.0
    if 1.0 < y <= 1.0 + 1e-9:
        return 1.0
    return y


def design_matrix(observables: Sequence[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Linear model ``y = A @ x + offset`` in the 12 free TP parameters.

    ``x`` is rows 1..3 of the PTM flattened; row 0 is pinned to ``(1, 0, 0, 0)``.
    """
    Ys = np.asarray(observables, dtype=float)
    A = 2.0 * Ys.transpose(0, 2, 1)[:, 1:, :].reshape(len(Ys), N_FREE)
    offset = 2.0 * Ys[:, 0, 0]
    return A, offset


def design_rank(observables: Sequence[np.ndarray], rtol: float = 1e-10) -> int:
    A, _ = design_matrix(observables)
    s = np.linalg.svd(A, compute_uv=False)
    return int(np.sum(s > rtol * s[0])) if s.size else 0


def ptm_from_params(x: np.ndarray) -> np.ndarray:
    T = np.zeros((4, 4))
    T[0, 0] = 1.0
    T[1:, :] = np.asarray(x).reshape(3, 4)
    return T


def params_from_ptm(T: np.ndarray) -> np.ndarray:
    return np.asarray(T, dtype=float)[1:, :].ravel().copy()


@dataclass(frozen=True)
class TomographyDataset:
    settings: tuple[MeasurementSetting, ...]
    n_shots: tuple[int, ...]
    n_excited: tuple[int, ...]
    gate_label: str = ""
    probabilities: tuple[float, ...] | None = None
    provenance: dict[str, Any] | None = field(default=None, compare=False)
    timestamps: tuple[float, ...] | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "settings", tuple(self.settings))
        object.__setattr__(self, "n_shots", tuple(int(n) for n in self.n_shots))
        object.__setattr__(self, "n_excited", tuple(int(k) for k in self.n_excited))
        m = len(self.settings)
        if len(self.n_shots) != m or len(self.n_excited) != m:
            raise InvalidDatasetError("settings, n_shots and n_excited must have equal length")
        for i, (n, k) in enumerate(zip(self.n_shots, self.n_excited)):
            if n < 1:
                raise InvalidDatasetError(f"settings[{i}].n_shots must be positive, got {n}")
            if not 0 <= k <= n:
                raise InvalidDatasetError(
                    f"settings[{i}].n_excited must lie in [0, n_shots={n}], got {k}"
                )
        if self.probabilities is not None:
            probs = tuple(float(p) for p in self.probabilities)
            if len(probs) != m:
                raise InvalidDatasetError("probabilities must have one entry per setting")
            for i, p in enumerate(probs):
                if not np.isfinite(p):
                    raise InvalidDatasetError(f"settings[{i}].probability is not finite")
                if not -1e-12 <= p <= 1.0 + 1e-12:
                    raise InvalidDatasetError(f"settings[{i}].probability {p} outside [0, 1]")
            object.__setattr__(self, "probabilities", probs)

    @property
    def y(self) -> np.ndarray:
        """Excited-state frequencies; exact probabilities when the dataset carries them."""
        if self.probabilities is not None:
            return np.asarray(self.probabilities, dtype=float)
        return np.asarray(self.n_excited, dtype=float) / np.asarray(self.n_shots, dtype=float)


@dataclass(frozen=True)
class ReconstructionConfig:
    objective_tolerance: float = 1e-10
    constraint_tolerance: float = 1e-8
    max_iterations: int = 50000
    penalty_parameter: float = 1.0
    binomial_weights: bool = False

    def __post_init__(self) -> None:
        for name in ("objective_tolerance", "constraint_tolerance", "penalty_parameter"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")


@dataclass(frozen=True)
class ReconstructionResult:
    T_hat: np.ndarray
    rho_hat: np.ndarray
    objective: float
    iterations: int
    primal_residual: float
    dual_residual: float
    converged: bool
    merit_history: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))
    setting_operator: np.ndarray | None = None
    warnings: tuple[str, ...] = ()


def _psd_projection(H: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(hermitize(H))
    w = np.clip(w, 0.0, None)
    return (V * w) @ V.conj().T


def _solve(
    observables: Sequence[np.ndarray],
    y: np.ndarray,
    weights: np.ndarray,
    cfg: ReconstructionConfig,
) -> ReconstructionResult:
    A, offset = design_matrix(observables)
    b = np.asarray(y, dtype=float) - offset
    if not np.all(np.isfinite(b)):
        raise InvalidDatasetError("outcome frequencies contain NaN or infinity")
    sw = np.sqrt(weights)
    Aw, bw = A * sw[:, None], b * sw

    s = np.linalg.svd(Aw, compute_uv=False)
    rank = int(np.sum(s > 1e-10 * s[0])) if s.size else 0
    if rank < N_FREE:
        raise RankDeficientDesignError(
            f"design has rank {rank} on the {N_FREE}-dimensional trace-preserving space"
        )

    def objective(x: np.ndarray) -> float:
        r = Aw @ x - bw
        return float(r @ r)

    rho = cfg.penalty_parameter
    gram = 2.0 * Aw.T @ Aw
    rhs0 = 2.0 * Aw.T @ bw
    factor = cho_factor(gram + rho * np.eye(N_FREE))

    x = np.linalg.lstsq(Aw, bw, rcond=None)[0]
    Z = _psd_projection(choi_of_ptm(ptm_from_params(x)))
    U = np.zeros((4, 4), dtype=complex)
    f_prev = objective(x)
    merit = []
    best: tuple[float, float, np.ndarray] | None = None
    primal = dual = np.inf
    converged = False
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        # exact minimiser of f + rho/2 ||C(x) - Z + U||^2; x -> C(x) is an isometry
        # and the pinned row contributes nothing to ptm_of_choi(...)[1:]
        target = ptm_of_choi(Z - U)[1:, :].ravel()
        x = cho_solve(factor, rhs0 + rho * target)
        C = choi_of_ptm(ptm_from_params(x))
        Z_new = _psd_projection(C + U)
        U_new = U + C - Z_new

        primal = float(np.linalg.norm(C - Z_new))
        dual = float(rho * np.linalg.norm(ptm_of_choi(Z_new - Z)[1:, :]))
        merit.append(float(np.linalg.norm(Z_new - Z) ** 2 + np.linalg.norm(U_new - U) ** 2))
        Z, U = Z_new, U_new

        f = objective(x)
        key = (0.0 if primal < cfg.constraint_tolerance else primal, f)
        if best is None or key < best[:2]:
            best = (key[0], key[1], x.copy())
        if (
            abs(f - f_prev) < cfg.objective_tolerance
            and primal < cfg.constraint_tolerance
            and dual < cfg.constraint_tolerance
        ):
            converged = True
            break
        f_prev = f

    if not converged:
        log.warning("reconstruction did not converge in %d iterations", cfg.max_iterations)
        x = best[2]
    T_hat = ptm_from_params(x)
    return ReconstructionResult(
        T_hat=T_hat,
        rho_hat=hermitize(choi_of_ptm(T_hat)),
        objective=float(np.sum((A @ x - b) ** 2)),
        iterations=it,
        primal_residual=primal,
        dual_residual=dual,
        converged=converged,
        merit_history=np.asarray(merit),
    )


def _weights(data: TomographyDataset, cfg: ReconstructionConfig) -> np.ndarray:
    if not cfg.binomial_weights:
        return np.ones(len(data.settings))
    y = data.y
    return np.asarray(data.n_shots, dtype=float) / (y * (1.0 - y) + 1e-3)


def _check(data: TomographyDataset) -> None:
    if len(data.settings) < N_FREE:
        raise RankDeficientDesignError(
            f"need at least {N_FREE} settings, dataset has {len(data.settings)}"
        )
    if not np.all(np.isfinite(data.y)):
        raise InvalidDatasetError("outcome frequencies contain NaN or infinity")


def reconstruct(data: TomographyDataset, cfg: ReconstructionConfig | None = None) -> ReconstructionResult:
    """Constrained least-squares PTM estimate from a tomography dataset."""
    cfg = cfg or ReconstructionConfig()
    _check(data)
    return _solve([s.Y for s in data.settings], data.y, _weights(data, cfg), cfg)


def mitigate_setting_errors(
    data_identity: TomographyDataset,
    data_gate: TomographyDataset,
    cfg: ReconstructionConfig | None = None,
) -> ReconstructionResult:
    """Reconstruct with imperfect A/B gates absorbed into a learned operator.

    ``data_identity`` is the same protocol run without the gate under test.
    Its reconstruction ``T0`` replaces every observable ``Y`` by ``Y @ T0`` in
    the fit of ``data_gate``.
    """
    cfg = cfg or ReconstructionConfig()
    _check(data_identity)
    _check(data_gate)
    if [s.labels for s in data_identity.settings] != [s.labels for s in data_gate.settings]:
        raise InvalidDatasetError("identity and gate datasets must use identical settings")

    ident = reconstruct(data_identity, cfg)
    T0 = ident.T_hat
    observables = [s.Y @ T0 for s in data_gate.settings]
    result = _solve(observables, data_gate.y, _weights(data_gate, cfg), cfg)

    warnings = []
    deviation = float(np.linalg.norm(T0 - np.eye(4)))
    if deviation > MITIGATION_DEVIATION_LIMIT:
        warnings.append(
            f"setting-error operator deviates from identity by {deviation:.3g} (Frobenius); "
            "mitigation model assumes small setting errors"
        )
    if not ident.converged:
        warnings.append("identity-dataset reconstruction did not converge")
    return ReconstructionResult(
        T_hat=result.T_hat,
        rho_hat=result.rho_hat,
        objective=result.objective,
        iterations=result.iterations,
        primal_residual=result.primal_residual,
        dual_residual=result.dual_residual,
        converged=result.converged and ident.converged,
        merit_history=result.merit_history,
        setting_operator=T0,
        warnings=tuple(warnings),
    )


def check_physical(result: ReconstructionResult, cfg: ReconstructionConfig | None = None):
    cfg = cfg or ReconstructionConfig()
    return validate_cptp(result.rho_hat, cfg.constraint_tolerance)
