"""Single-qubit process tomography with a coherent / Markovian / non-Markovian error split."""
from .decomposition import ErrorBudget, decompose
from .reps import UnitaryGate, choi_of_ptm, parse_gate, ptm_of_choi, ptm_of_unitary
from .simulator import NoiseModel, ReadoutModel, ShotPlan, run_experiment
from .tomography import (
    ReconstructionConfig,
    TomographyDataset,
    mitigate_setting_errors,
    reconstruct,
    standard_settings,
)

__all__ = [
    "ErrorBudget",
    "NoiseModel",
    "ReadoutModel",
    "ReconstructionConfig",
    "ShotPlan",
    "TomographyDataset",
    "UnitaryGate",
    "choi_of_ptm",
    "decompose",
    "mitigate_setting_errors",
    "parse_gate",
    "ptm_of_choi",
    "ptm_of_unitary",
    "reconstruct",
    "run_experiment",
    "standard_settings",
]
