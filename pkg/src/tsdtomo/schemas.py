"""File formats: experiment config, tomography dataset and reconstruction result."""
from __future__ import annotations

from typing import Annotated, Any, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .reps import parse_gate
from .simulator import COHERENT_GUARD, NoiseModel, ReadoutModel, ShotPlan
from .tomography import PROTOCOL, ReconstructionConfig


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class NoNoise(_Strict):
    type: Literal["none"] = "none"

    def to_model(self) -> NoiseModel:
        return NoiseModel.none()


class CoherentNoise(_Strict):
    type: Literal["coherent"]
    epsilon: float = Field(ge=-COHERENT_GUARD, le=COHERENT_GUARD)

    def to_model(self) -> NoiseModel:
        return NoiseModel.coherent(self.epsilon)


class GaussianNoise(_Strict):
    type: Literal["gaussian"]
    sigma: float = Field(ge=0)

    def to_model(self) -> NoiseModel:
        return NoiseModel.gaussian(self.sigma)


class TopHatNoise(_Strict):
    type: Literal["tophat"]
    half_width: float = Field(ge=0)

    def to_model(self) -> NoiseModel:
        return NoiseModel.tophat(self.half_width)


NoiseSpec = Annotated[
    Union[NoNoise, CoherentNoise, GaussianNoise, TopHatNoise], Field(discriminator="type")
]

SWEEP_PARAMETERS = {"epsilon": "coherent", "sigma": "gaussian", "half_width": "tophat"}


class ReadoutSpec(_Strict):
    p_dark: float = Field(default=0.0, ge=0, lt=0.5)
    p_bright: float = Field(default=0.0, ge=0, lt=0.5)

    def to_model(self) -> ReadoutModel:
        return ReadoutModel(self.p_dark, self.p_bright)


class ShotSpec(_Strict):
    n_shots: int = Field(default=10_000, ge=1)
    seed: int = Field(default=0, ge=0, lt=2**64)
    exact_probabilities: bool = False

    def to_plan(self, offset: int = 0) -> ShotPlan:
        return ShotPlan(self.n_shots, (self.seed + offset) % 2**64, self.exact_probabilities)


class SweepSpec(_Strict):
    parameter: Literal["epsilon", "sigma", "half_width"]
    values: list[float] = Field(min_length=1)

    @model_validator(mode="after")
    def _guards(self) -> "SweepSpec":
        for i, v in enumerate(self.values):
            try:
                NoiseModel(SWEEP_PARAMETERS[self.parameter], v)
            except ValueError as exc:
                raise ValueError(f"values[{i}] = {v}: {exc}") from None
        return self


class ReconstructionSpec(_Strict):
    objective_tolerance: float = Field(default=1e-10, gt=0)
    constraint_tolerance: float = Field(default=1e-8, gt=0)
    max_iterations: int = Field(default=50_000, ge=1)
    penalty_parameter: float = Field(default=1.0, gt=0)
    binomial_weights: bool = False

    def to_config(self) -> ReconstructionConfig:
        return ReconstructionConfig(**self.model_dump())


class ExperimentConfig(_Strict):
    gate: str = "Rx(pi)"
    noise: NoiseSpec = Field(default_factory=NoNoise)
    background_noise: NoiseSpec = Field(default_factory=NoNoise)
    setting_noise: NoiseSpec = Field(default_factory=NoNoise)
    noise_all_gates: bool = False
    readout: ReadoutSpec = Field(default_factory=ReadoutSpec)
    shots: ShotSpec = Field(default_factory=ShotSpec)
    sweep: Optional[SweepSpec] = None
    mitigate: bool = False
    reconstruction: ReconstructionSpec = Field(default_factory=ReconstructionSpec)
    out: str = "out"

    @field_validator("gate")
    @classmethod
    def _known_gate(cls, v: str) -> str:
        parse_gate(v)
        return v


class DatasetSetting(_Strict):
    A: str
    B: str
    n_shots: int = Field(ge=1)
    n_excited: int = Field(ge=0)
    probability: Optional[float] = Field(default=None, ge=0, le=1)
    timestamp: Optional[float] = None

    @field_validator("A", "B")
    @classmethod
    def _known_gate(cls, v: str) -> str:
        parse_gate(v)
        return v

    @model_validator(mode="after")
    def _counts(self) -> "DatasetSetting":
        if self.n_excited > self.n_shots:
            raise ValueError(f"n_excited ({self.n_excited}) exceeds n_shots ({self.n_shots})")
        return self


class DatasetFile(_Strict):
    protocol: Literal["tsd-12"] = PROTOCOL
    gate_label: str
    settings: list[DatasetSetting] = Field(min_length=1)
    provenance: Optional[dict[str, Any]] = None


class PTMBlock(_Strict):
    basis: Literal["IXYZ"] = "IXYZ"
    ptm: list[list[float]]

    @field_validator("ptm")
    @classmethod
    def _shape(cls, v: list[list[float]]) -> list[list[float]]:
        if len(v) != 4 or any(len(row) != 4 for row in v):
            raise ValueError("ptm must be a 4x4 row-major array")
        return v


class ChoiBlock(_Strict):
    basis: Literal["IXYZ"] = "IXYZ"
    choi: list[list[list[float]]]

    @field_validator("choi")
    @classmethod
    def _shape(cls, v: list[list[list[float]]]) -> list[list[list[float]]]:
        if len(v) != 4 or any(len(row) != 4 or any(len(z) != 2 for z in row) for row in v):
            raise ValueError("choi must be a 4x4 row-major array of [re, im] pairs")
        return v


class BudgetBlock(_Strict):
    total: float
    markovian: float
    coherent: float
    nonmarkovian: float
    additivity_residual: float
    infidelity_r: float
    delta_theta_xyz: list[float] = Field(min_length=3, max_length=3)
    det_flag: int


class ResultFile(_Strict):
    target: str
    T_hat: PTMBlock
    rho_hat: ChoiBlock
    objective: float
    iterations: int
    residuals: dict[str, float]
    converged: bool
    budget: Optional[BudgetBlock] = None
    fidelity: Optional[dict[str, float]] = None
    setting_operator: Optional[PTMBlock] = None
    warnings: list[str] = Field(default_factory=list)
    config: dict[str, Any] = Field(default_factory=dict)
