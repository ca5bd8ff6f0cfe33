"""Split the deviation of a measured PTM from a unitary target into error types.

The total squared Frobenius distance between the two PTMs is attributed to

* a Markovian part: the first row and first column of the PTM,
* a coherent part: the orthogonal factor of the relative Bloch transform,
* a non-Markovian part: the symmetric factor of the same transform.

The three parts add up to the total only to leading order; the leftover is
reported rather than hidden.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .reps import average_gate_fidelity, entanglement_fidelity

TARGET_ORTHOGONALITY_TOL = 1e-6
SMALL_ANGLE = 1e-8
NEAR_PI = 1e-6


class NonUnitaryTargetError(ValueError):
    """The ideal PTM handed in does not describe a rotation."""


class ReflectionError(ValueError):
    """An axis-angle was requested for an orthogonal matrix with det = -1."""


@dataclass(frozen=True)
class PolarFactors:
    P: np.ndarray
    R: np.ndarray
    det_flag: int
    rank_deficient: bool = False


@dataclass(frozen=True)
class AxisAngleError:
    delta_theta: float
    axis: np.ndarray

    @property
    def components(self) -> np.ndarray:
        return self.axis * self.delta_theta


@dataclass(frozen=True)
class ErrorBudget:
    total: float
    markovian: float
    coherent: float
    nonmarkovian: float
    additivity_residual: float
    infidelity_r: float


@dataclass(frozen=True)
class Decomposition:
    budget: ErrorBudget
    relative: np.ndarray
    polar: PolarFactors
    rotation: AxisAngleError | None
    entanglement_fidelity: float
    average_gate_fidelity: float

    def to_dict(self) -> dict[str, Any]:
        b = self.budget
        comps = self.rotation.components if self.rotation is not None else np.full(3, np.nan)
        return {
            "total": b.total,
            "markovian": b.markovian,
            "coherent": b.coherent,
            "nonmarkovian": b.nonmarkovian,
            "additivity_residual": b.additivity_residual,
            "infidelity_r": b.infidelity_r,
            "delta_theta_xyz": [float(c) for c in comps],
            "det_flag": self.polar.det_flag,
        }


def markovian_error(T_ideal: np.ndarray, T_expt: np.ndarray) -> float:
    d = np.asarray(T_ideal, dtype=float) - np.asarray(T_expt, dtype=float)
    return float(d[0, 0] ** 2 + np.sum(d[0, 1:] ** 2) + np.sum(d[1:, 0] ** 2))


def relative_transform(T_ideal: np.ndarray, T_expt: np.ndarray) -> np.ndarray:
    """``R_ideal^T R_expt`` for the 3x3 Bloch blocks; the target must be a rotation."""
    R_ideal = np.asarray(T_ideal, dtype=float)[1:, 1:]
    defect = np.linalg.norm(R_ideal.T @ R_ideal - np.eye(3))
    if defect > TARGET_ORTHOGONALITY_TOL:
        raise NonUnitaryTargetError(
            f"target Bloch block is not orthogonal (defect {defect:.3g}); "
            "the ideal PTM must describe a unitary gate"
        )
    return R_ideal.T @ np.asarray(T_expt, dtype=float)[1:, 1:]


def polar_decompose(M: np.ndarray) -> PolarFactors:
    """Factor ``M = P @ R`` with ``P`` symmetric PSD and ``R`` orthogonal.

    When ``det(M) < 0`` the orthogonal factor is a reflection; it is returned
    unchanged with ``det_flag = -1``.
    """
    M = np.asarray(M, dtype=float)
    U, s, Vt = np.linalg.svd(M)
    R = U @ Vt
    P = (U * s) @ U.T
    P = 0.5 * (P + P.T)
    det_flag = 1 if np.linalg.det(R) > 0 else -1
    rank_deficient = bool(s[-1] <= 1e-12 * max(s[0], 1.0))
    return PolarFactors(P=P, R=R, det_flag=det_flag, rank_deficient=rank_deficient)


def coherent_error(R: np.ndarray) -> float:
    return float(np.sum((np.eye(3) - np.asarray(R)) ** 2))


def nonmarkovian_error(P: np.ndarray) -> float:
    return float(np.sum((np.eye(3) - np.asarray(P)) ** 2))


def infidelity_from_error(eps2_total: float) -> float:
    """Gate infidelity ``1 - F_av`` estimated as ``eps2_total / 12``.

    Only meaningful for small, predominantly coherent deviations from the target.
    """
    if eps2_total < 0:
        raise ValueError("eps2_total must be non-negative")
    return eps2_total / 12.0


def axis_angle(R: np.ndarray) -> AxisAngleError:
    R = np.asarray(R, dtype=float)
    if np.linalg.det(R) < 0:
        raise ReflectionError("orthogonal factor is a reflection (det = -1)")
    cos_t = np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0)
    theta = float(np.arccos(cos_t))
    if theta < SMALL_ANGLE:
        return AxisAngleError(0.0, np.zeros(3))
    if np.pi - theta < NEAR_PI:
        evals, evecs = np.linalg.eigh(0.5 * (R + R.T))
        axis = evecs[:, np.argmax(evals)]
        # eigenvector sign is arbitrary at pi; fix the largest component positive
        if axis[np.argmax(np.abs(axis))] < 0:
            axis = -axis
        return AxisAngleError(theta, axis / np.linalg.norm(axis))
    v = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    axis = v / (2.0 * np.sin(theta))
    return AxisAngleError(theta, axis / np.linalg.norm(axis))


def decompose(T_ideal: np.ndarray, T_expt: np.ndarray) -> Decomposition:
    T_ideal = np.asarray(T_ideal, dtype=float)
    T_expt = np.asarray(T_expt, dtype=float)
    M = relative_transform(T_ideal, T_expt)
    polar = polar_decompose(M)

    total = float(np.sum((T_ideal - T_expt) ** 2))
    mark = markovian_error(T_ideal, T_expt)
    coh = coherent_error(polar.R)
    nonmark = nonmarkovian_error(polar.P)
    budget = ErrorBudget(
        total=total,
        markovian=mark,
        coherent=coh,
        nonmarkovian=nonmark,
        additivity_residual=abs(total - mark - coh - nonmark),
        infidelity_r=infidelity_from_error(total),
    )
    rotation = axis_angle(polar.R) if polar.det_flag > 0 else None
    fe = entanglement_fidelity(T_ideal, T_expt)
    return Decomposition(
        budget=budget,
        relative=M,
        polar=polar,
        rotation=rotation,
        entanglement_fidelity=fe,
        average_gate_fidelity=average_gate_fidelity(np.clip(fe, 0.0, 1.0)),
    )
