"""Monte-Carlo wave-function simulation of the tomography circuit.

Every shot starts in ``|0>``, applies the preparation gate, the gate under
test with a possibly perturbed rotation angle, the analysis gate, and reads
out through a two-outcome confusion model.  The angle perturbation is drawn
once per shot and held for the whole A-U-B sequence.

Random numbers come from counter-based substreams: shot ``j`` of a setting owns
Philox block ``j`` under a key derived from ``(seed, stream, setting key)``, four
uniforms per shot (gate noise, setting noise, background noise, readout).  The
setting key hashes the A/B labels and how often that pair already occurred, so
a setting draws the same numbers wherever it sits in the list, and any split of
the shots into chunks or workers reproduces the same dataset.  In
exact-probability mode every setting averages over one shared ensemble of
angle draws (key ``ENSEMBLE_KEY``), so the twelve probabilities describe a
single averaged channel instead of twelve slightly different ones.
"""
from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass
from typing import Any, Sequence

import numpy as np
from scipy.special import ndtri

from .reps import UnitaryGate, ptm_of_unitary, rotation_unitary
from .tomography import MeasurementSetting, TomographyDataset

COHERENT_GUARD = 0.2
CHUNK = 1 << 16
ENSEMBLE_KEY = 0
_U53 = 2.0 ** -53

NOISE_KINDS = ("none", "coherent", "gaussian", "tophat")


@dataclass(frozen=True)
class NoiseModel:
    """Fractional perturbation of a rotation angle, ``theta -> theta (1 + delta)``.

    ``coherent``: delta = value on every shot; ``gaussian``: delta ~ N(0, value^2)
    per shot; ``tophat``: delta ~ U[-value, value] per shot.
    """

    kind: str = "none"
    value: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}; expected one of {NOISE_KINDS}")
        object.__setattr__(self, "value", float(self.value))
        if self.kind == "none" and self.value != 0.0:
            raise ValueError("noise 'none' takes no parameter")
        if self.kind == "coherent" and abs(self.value) > COHERENT_GUARD:
            raise ValueError(f"coherent epsilon must lie in [-{COHERENT_GUARD}, {COHERENT_GUARD}]")
        if self.kind in ("gaussian", "tophat") and self.value < 0:
            raise ValueError(f"{self.kind} width must be non-negative")

    @classmethod
    def none(cls) -> "NoiseModel":
        return cls()

    @classmethod
    def coherent(cls, epsilon: float) -> "NoiseModel":
        return cls("coherent", epsilon)

    @classmethod
    def gaussian(cls, sigma: float) -> "NoiseModel":
        return cls("gaussian", sigma)

    @classmethod
    def tophat(cls, half_width: float) -> "NoiseModel":
        return cls("tophat", half_width)

    @classmethod
    def tophat_matching(cls, sigma: float) -> "NoiseModel":
        """Uniform distribution with the same variance as ``gaussian(sigma)``."""
        return cls("tophat", sigma * np.sqrt(3.0))

    @property
    def stochastic(self) -> bool:
        return self.kind in ("gaussian", "tophat") and self.value > 0

    def fraction(self, u: np.ndarray) -> np.ndarray:
        """Map uniforms in (0, 1) to fractional angle errors."""
        u = np.asarray(u, dtype=float)
        if self.kind == "none":
            return np.zeros_like(u)
        if self.kind == "coherent":
            return np.full_like(u, self.value)
        if self.kind == "gaussian":
            return self.value * ndtri(u)
        return self.value * (2.0 * u - 1.0)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "value": self.value}


@dataclass(frozen=True)
class ReadoutModel:
    """``p_dark``: P(read 1 | ground); ``p_bright``: P(read 0 | excited)."""

    p_dark: float = 0.0
    p_bright: float = 0.0

    def __post_init__(self) -> None:
        for name in ("p_dark", "p_bright"):
            if not 0.0 <= getattr(self, name) < 0.5:
                raise ValueError(f"{name} must lie in [0, 0.5)")

    def excited_probability(self, p_exc: np.ndarray) -> np.ndarray:
        return p_exc * (1.0 - self.p_bright) + (1.0 - p_exc) * self.p_dark


@dataclass(frozen=True)
class ShotPlan:
    n_shots: int = 10_000
    seed: int = 0
    exact_probabilities: bool = False

    def __post_init__(self) -> None:
        if self.n_shots < 1:
            raise ValueError("n_shots must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class QubitState:
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (2,):
            raise ValueError("a qubit state has two amplitudes")
        if abs(np.linalg.norm(amps) - 1.0) > 1e-12:
            raise ValueError("state is not normalised")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def ground(cls) -> "QubitState":
        return cls(np.array([1.0, 0.0], dtype=complex))

    @property
    def excited_population(self) -> float:
        return float(abs(self.amplitudes[1]) ** 2)


def apply_gate(state: QubitState, gate: UnitaryGate) -> QubitState:
    return QubitState(gate.unitary() @ state.amplitudes)


def setting_key(setting: MeasurementSetting, occurrence: int = 0) -> int:
    """Stable 64-bit substream id for the ``occurrence``-th copy of an (A, B) pair."""
    text = f"{setting.gate_A.label}|{setting.gate_B.label}|{occurrence}".encode()
    return int.from_bytes(hashlib.sha256(text).digest()[:8], "little")


def shot_uniforms(seed: int, key: int, start: int, stop: int, stream: int = 0) -> np.ndarray:
    """Uniforms in the open interval (0, 1) for shots ``start..stop-1``, shape ``(n, 4)``."""
    key = np.random.SeedSequence([seed, stream, key]).generate_state(2, np.uint64)
    raw = np.random.Philox(key=key, counter=start).random_raw(4 * (stop - start))
    return (((raw >> np.uint64(11)).astype(float) + 0.5) * _U53).reshape(stop - start, 4)


def sample_rotation_angle(theta_nominal: float, noise: NoiseModel, rng: np.random.Generator, size=None):
    """Draw perturbed angle(s) for ``size`` shots from a numpy generator."""
    u = (rng.integers(0, 2**53, size=size) + 0.5) * _U53
    angle = theta_nominal * (1.0 + noise.fraction(u))
    return float(angle) if size is None else angle


def _evolve(psi: np.ndarray, gate: UnitaryGate, fraction: np.ndarray) -> np.ndarray:
    if gate.angle == 0.0:
        return psi
    U = rotation_unitary(gate.axis_array, gate.angle * (1.0 + fraction))
    return np.einsum("nij,nj->ni", U, psi)


def _excited_probabilities(
    setting: MeasurementSetting,
    gate: UnitaryGate,
    u: np.ndarray,
    noise: NoiseModel,
    setting_noise: NoiseModel,
    background: NoiseModel,
    noise_all_gates: bool,
) -> np.ndarray:
    delta_u = noise.fraction(u[:, 0])
    delta_bg = background.fraction(u[:, 2])
    frac_u = (1.0 + delta_u) * (1.0 + delta_bg) - 1.0
    frac_ab = frac_u if noise_all_gates else setting_noise.fraction(u[:, 1])

    psi = np.zeros((len(u), 2), dtype=complex)
    psi[:, 0] = 1.0
    psi = _evolve(psi, setting.gate_A, frac_ab)
    psi = _evolve(psi, gate, frac_u)
    psi = _evolve(psi, setting.gate_B, frac_ab)
    return np.abs(psi[:, 1]) ** 2


def simulate_shot(
    setting: MeasurementSetting,
    gate: UnitaryGate,
    noise: NoiseModel,
    readout: ReadoutModel,
    rng: np.random.Generator,
) -> int:
    """One shot, drawing its four uniforms from ``rng``; returns the readout bit."""
    u = ((rng.integers(0, 2**53, size=(1, 4)) + 0.5) * _U53)
    p = _excited_probabilities(setting, gate, u, noise, NoiseModel(), NoiseModel(), False)
    return int(u[0, 3] < readout.excited_probability(p)[0])


def shot_probability(
    setting: MeasurementSetting,
    gate: UnitaryGate,
    readout: ReadoutModel = ReadoutModel(),
    angle: float | None = None,
) -> float:
    """Probability of reading ``1`` for one shot with a fixed angle of the gate under test."""
    g = gate if angle is None else gate.with_angle(angle)
    state = apply_gate(apply_gate(apply_gate(QubitState.ground(), setting.gate_A), g), setting.gate_B)
    return float(readout.excited_probability(state.excited_population))


def run_experiment(
    gate: UnitaryGate,
    settings: Sequence[MeasurementSetting],
    noise: NoiseModel = NoiseModel(),
    readout: ReadoutModel = ReadoutModel(),
    plan: ShotPlan = ShotPlan(),
    *,
    setting_noise: NoiseModel = NoiseModel(),
    background: NoiseModel = NoiseModel(),
    noise_all_gates: bool = False,
    gate_label: str | None = None,
    stream: int = 0,
) -> TomographyDataset:
    """Simulate the full protocol and return the resulting dataset.

    With ``plan.exact_probabilities`` the per-shot excitation probabilities are
    averaged instead of sampled into bits, so only the angle draws are random,
    and all settings share the same draws.
    ``setting_noise`` perturbs the A/B gates; ``noise_all_gates`` instead
    applies the same per-shot draw as the gate under test.  A ``background``
    model multiplies onto the injected one.  ``stream`` selects an independent
    family of substreams for the same seed (e.g. a calibration run).
    """
    n = plan.n_shots
    n_excited, probs = [], []
    seen: dict[tuple[str, str], int] = {}
    for setting in settings:
        occurrence = seen.get(setting.labels, 0)
        seen[setting.labels] = occurrence + 1
        key = ENSEMBLE_KEY if plan.exact_probabilities else setting_key(setting, occurrence)
        hits, total_p = 0, 0.0
        for start in range(0, n, CHUNK):
            stop = min(start + CHUNK, n)
            u = shot_uniforms(plan.seed, key, start, stop, stream)
            p = readout.excited_probability(
                _excited_probabilities(setting, gate, u, noise, setting_noise, background, noise_all_gates)
            )
            total_p += float(np.sum(p))
            hits += int(np.count_nonzero(u[:, 3] < p))
        if plan.exact_probabilities:
            y = min(max(total_p / n, 0.0), 1.0)
            probs.append(y)
            n_excited.append(int(round(y * n)))
        else:
            n_excited.append(hits)

    provenance = {
        "gate": {"label": gate_label or gate.label, "axis": list(gate.axis), "angle": gate.angle},
        "noise": noise.to_dict(),
        "setting_noise": setting_noise.to_dict(),
        "background": background.to_dict(),
        "noise_all_gates": noise_all_gates,
        "readout": asdict(readout),
        "plan": asdict(plan),
        "stream": stream,
    }
    return TomographyDataset(
        settings=tuple(settings),
        n_shots=(n,) * len(settings),
        n_excited=tuple(n_excited),
        gate_label=gate_label or gate.label,
        probabilities=tuple(probs) if plan.exact_probabilities else None,
        provenance=provenance,
    )


def analytic_averaged_ptm(gate: UnitaryGate, noise: NoiseModel) -> np.ndarray:
    """Shot-averaged PTM of an x or y rotation under angle noise, in closed form."""
    axis = gate.axis_array
    if gate.angle == 0.0:
        return np.eye(4)
    if np.allclose(axis, [1, 0, 0]):
        transverse = [2, 3]
    elif np.allclose(axis, [0, 1, 0]):
        transverse = [1, 3]
    else:
        raise ValueError("averaged channel is only available for rotations about x or y")

    theta = gate.angle
    if noise.kind == "coherent":
        return ptm_of_unitary(gate.with_angle(theta * (1.0 + noise.value)))
    T = ptm_of_unitary(gate)
    if noise.kind == "gaussian":
        scale = np.exp(-((theta * noise.value) ** 2) / 2.0)
    elif noise.kind == "tophat":
        scale = np.sinc(theta * noise.value / np.pi)
    else:
        scale = 1.0
    T[np.ix_(transverse, transverse)] *= scale
    return T
