"""Single-qubit states, gates and channels in the Pauli-transfer and Choi pictures.

Conventions used throughout the package:

* Pauli basis order is ``(I, X, Y, Z)``.
* A state is a Pauli vector ``p`` with ``rho = sum_a p[a] * sigma[a]``; a
  trace-one state therefore has ``p[0] == 1/2``.
* The PTM of a channel is ``T[a, b] = 1/2 Tr[sigma_a Phi(sigma_b)]`` so that
  ``p_out = T @ p_in``.
* The Choi matrix is ``sum_ij Phi(|i><j|) (x) |i><j|`` (output factor first),
  which equals ``1/2 sum_ab T[a, b] sigma_a (x) sigma_b^T`` and has trace 2
  for a trace-preserving map.

PTMs and Pauli vectors are plain real ``numpy`` arrays; Choi matrices are
complex ``4x4`` arrays.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any

import numpy as np

PAULI = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)
PAULI_LABELS = "IXYZ"

# sigma_a (x) sigma_b^T for all (a, b); shape (4, 4, 4, 4)
_CHOI_BASIS = np.einsum("aij,bkl->abikjl", PAULI, PAULI.transpose(0, 2, 1)).reshape(4, 4, 4, 4)

P_GROUND = np.array([0.5, 0.0, 0.0, 0.5])
P_EXCITED = np.array([0.5, 0.0, 0.0, -0.5])

FIDELITY_TOL = 1e-9


@dataclass(frozen=True)
class UnitaryGate:
    """Rotation by ``angle`` radians about the unit vector ``axis``.

    The identity is stored with ``angle == 0`` and a zero axis.
    """

    axis: tuple[float, float, float]
    angle: float
    label: str = ""

    def __post_init__(self) -> None:
        axis = np.asarray(self.axis, dtype=float)
        if axis.shape != (3,):
            raise ValueError(f"axis must be a 3-vector, got shape {axis.shape}")
        norm = np.linalg.norm(axis)
        if self.angle == 0.0 or norm == 0.0:
            object.__setattr__(self, "axis", (0.0, 0.0, 0.0))
            object.__setattr__(self, "angle", 0.0)
            return
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"rotation axis must have unit norm, got {norm}")
        object.__setattr__(self, "axis", tuple(float(a) for a in axis))
        object.__setattr__(self, "angle", float(self.angle))

    @property
    def axis_array(self) -> np.ndarray:
        return np.asarray(self.axis, dtype=float)

    def with_angle(self, angle: float) -> "UnitaryGate":
        """Same axis, different rotation angle (used for miscalibrated pulses)."""
        if self.angle == 0.0:
            return self
        return UnitaryGate(self.axis, angle, self.label)

    def unitary(self) -> np.ndarray:
        return rotation_unitary(self.axis_array, self.angle)


def identity_gate() -> UnitaryGate:
    return UnitaryGate((0.0, 0.0, 0.0), 0.0, "I")


def rx(theta: float, label: str = "") -> UnitaryGate:
    return UnitaryGate((1.0, 0.0, 0.0), theta, label)


def ry(theta: float, label: str = "") -> UnitaryGate:
    return UnitaryGate((0.0, 1.0, 0.0), theta, label)


def rz(theta: float, label: str = "") -> UnitaryGate:
    return UnitaryGate((0.0, 0.0, 1.0), theta, label)


def rotation_unitary(axis: np.ndarray, angle: float | np.ndarray) -> np.ndarray:
    """``exp(-i angle n.sigma / 2)``; vectorised over an array of angles."""
    angle = np.asarray(angle, dtype=float)
    n_sigma = np.einsum("k,kij->ij", np.asarray(axis, dtype=float), PAULI[1:])
    c = np.cos(angle / 2)[..., None, None]
    s = np.sin(angle / 2)[..., None, None]
    return c * PAULI[0] - 1j * s * n_sigma


def rotation_matrix(axis: np.ndarray, angle: float) -> np.ndarray:
    """SO(3) rotation by ``angle`` about ``axis`` (Rodrigues formula)."""
    n = np.asarray(axis, dtype=float)
    if not np.any(n) or angle == 0.0:
        return np.eye(3)
    n = n / np.linalg.norm(n)
    k = np.array([[0.0, -n[2], n[1]], [n[2], 0.0, -n[0]], [-n[1], n[0], 0.0]])
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def ptm_of_unitary(gate: UnitaryGate) -> np.ndarray:
    T = np.eye(4)
    T[1:, 1:] = rotation_matrix(gate.axis_array, gate.angle)
    return T


def ptm_of_unitary_matrix(U: np.ndarray) -> np.ndarray:
    """PTM of an arbitrary 2x2 unitary by direct conjugation, ``1/2 Tr[s_a U s_b U^+]``."""
    U = np.asarray(U, dtype=complex)
    conj = np.einsum("ij,bjk,lk->bil", U, PAULI, U.conj())
    return 0.5 * np.einsum("aji,bij->ab", PAULI, conj).real


def choi_of_ptm(T: np.ndarray) -> np.ndarray:
    T = np.asarray(T, dtype=float)
    return 0.5 * np.einsum("ab,abij->ij", T, _CHOI_BASIS)


def ptm_of_choi(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    # Tr[rho B] = sum_ij rho_ij B_ji
    return 0.5 * np.einsum("ij,abji->ab", rho, _CHOI_BASIS).real


def choi_of_unitary_matrix(U: np.ndarray) -> np.ndarray:
    """Choi matrix straight from its definition, ``sum_ij U|i><j|U^+ (x) |i><j|``."""
    U = np.asarray(U, dtype=complex)
    rho = np.zeros((4, 4), dtype=complex)
    for i in range(2):
        for j in range(2):
            eij = np.zeros((2, 2))
            eij[i, j] = 1.0
            rho += np.kron(U @ eij @ U.conj().T, eij)
    return rho


def hermitize(rho: np.ndarray) -> np.ndarray:
    return 0.5 * (rho + rho.conj().T)


def partial_trace_output(rho: np.ndarray) -> np.ndarray:
    """Trace out the first (output) tensor factor of a 4x4 Choi matrix."""
    return np.einsum("ijik->jk", np.asarray(rho).reshape(2, 2, 2, 2))


def density_matrix(p: np.ndarray) -> np.ndarray:
    return np.einsum("a,aij->ij", np.asarray(p, dtype=float), PAULI)


def pauli_vector(rho: np.ndarray) -> np.ndarray:
    return 0.5 * np.einsum("aij,ji->a", PAULI, np.asarray(rho)).real


def apply_ptm(T: np.ndarray, p: np.ndarray) -> np.ndarray:
    return np.asarray(T, dtype=float) @ np.asarray(p, dtype=float)


def apply_channel(rho_choi: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Act with a channel given by its Choi matrix on a state Pauli vector.

    Evaluates ``Tr_2[rho_choi (1 (x) rho^T)]`` and converts back to a Pauli
    vector; deliberately does not go through the PTM.
    """
    rho = density_matrix(p)
    prod = np.asarray(rho_choi) @ np.kron(np.eye(2), rho.T)
    out = np.einsum("ijkj->ik", prod.reshape(2, 2, 2, 2))
    return pauli_vector(out)


def entanglement_fidelity(T_target: np.ndarray, T_actual: np.ndarray) -> float:
    """``1/4 Tr[T_target T_actual^T]``, clipped into [0, 1] within 1e-9."""
    fe = 0.25 * float(np.sum(np.asarray(T_target) * np.asarray(T_actual)))
    if -FIDELITY_TOL <= fe < 0.0:
        return 0.0
    if 1.0 < fe <= 1.0 + FIDELITY_TOL:
        return 1.0
    return fe


def entanglement_fidelity_choi(rho_target: np.ndarray, rho_actual: np.ndarray) -> float:
    return 0.25 * float(np.trace(np.asarray(rho_target) @ np.asarray(rho_actual)).real)


def average_gate_fidelity(fe: float) -> float:
    if not -FIDELITY_TOL <= fe <= 1.0 + FIDELITY_TOL:
        raise ValueError(f"entanglement fidelity {fe} outside [0, 1]")
    return (2.0 * fe + 1.0) / 3.0


@dataclass(frozen=True)
class CPTPReport:
    min_eigenvalue: float
    hermiticity_defect: float
    tp_defect: float
    tol: float
    passed: bool = field(init=False)

    def __post_init__(self) -> None:
        ok = (
            self.min_eigenvalue >= -self.tol
            and self.hermiticity_defect <= self.tol
            and self.tp_defect <= self.tol
        )
        object.__setattr__(self, "passed", bool(ok))

    def to_dict(self) -> dict[str, Any]:
        return {
            "min_eigenvalue": self.min_eigenvalue,
            "hermiticity_defect": self.hermiticity_defect,
            "tp_defect": self.tp_defect,
            "tol": self.tol,
            "passed": self.passed,
        }


def validate_cptp(rho: np.ndarray, tol: float = 1e-9) -> CPTPReport:
    if tol <= 0:
        raise ValueError("tol must be positive")
    rho = np.asarray(rho, dtype=complex)
    herm_defect = float(np.max(np.abs(rho - rho.conj().T)))
    evals = np.linalg.eigvalsh(hermitize(rho))
    tp_defect = float(np.linalg.norm(partial_trace_output(rho) - np.eye(2)))
    return CPTPReport(float(evals[0]), herm_defect, tp_defect, tol)


# -- JSON ---------------------------------------------------------------------

def ptm_to_json(T: np.ndarray) -> dict[str, Any]:
    return {"basis": "IXYZ", "ptm": np.asarray(T, dtype=float).tolist()}


def ptm_from_json(obj: dict[str, Any]) -> np.ndarray:
    _check_basis(obj)
    T = np.asarray(obj["ptm"], dtype=float)
    if T.shape != (4, 4):
        raise ValueError(f"ptm must be 4x4, got {T.shape}")
    return T


def choi_to_json(rho: np.ndarray) -> dict[str, Any]:
    rho = np.asarray(rho, dtype=complex)
    pairs = np.stack([rho.real, rho.imag], axis=-1)
    return {"basis": "IXYZ", "choi": pairs.tolist()}


def choi_from_json(obj: dict[str, Any]) -> np.ndarray:
    _check_basis(obj)
    pairs = np.asarray(obj["choi"], dtype=float)
    if pairs.shape != (4, 4, 2):
        raise ValueError(f"choi must be 4x4 of [re, im] pairs, got {pairs.shape}")
    return pairs[..., 0] + 1j * pairs[..., 1]


def _check_basis(obj: dict[str, Any]) -> None:
    if obj.get("basis", "IXYZ") != "IXYZ":
        raise ValueError(f"unsupported basis {obj.get('basis')!r}, expected 'IXYZ'")


# -- gate labels ----------------------------------------------------------------

_AXES = {"x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0), "z": (0.0, 0.0, 1.0)}
_LABEL_RE = re.compile(r"^R([xyz])\((.+)\)$", re.IGNORECASE)


def _parse_angle(text: str) -> float:
    t = text.replace(" ", "").lower().replace("π", "pi")
    m = re.fullmatch(r"(-?[0-9.eE+-]*)\*?pi(?:/([0-9.]+))?", t)
    if m:
        coeff = m.group(1)
        value = np.pi * (float(coeff) if coeff not in ("", "-", "+") else float(coeff + "1"))
        return value / float(m.group(2)) if m.group(2) else value
    return float(t)


def parse_gate(label: str) -> UnitaryGate:
    """Gate from a label such as ``I``, ``Rx(pi)``, ``Ry(pi/2)``, ``Rx(0.9pi)`` or ``Rz(0.05)``."""
    text = label.strip()
    if text in ("I", "Id", "identity"):
        return identity_gate()
    m = _LABEL_RE.match(text)
    if not m:
        raise ValueError(f"unrecognised gate label {label!r}")
    try:
        angle = _parse_angle(m.group(2))
    except ValueError:
        raise ValueError(f"unrecognised rotation angle in {label!r}") from None
    return UnitaryGate(_AXES[m.group(1).lower()], angle, text)
