"""Branch-representation engine: hybrid states, homodyne readout and composite gates."""

from src.core.errors import (
    ConfigError,
    ImpossibleOutcomeError,
    InvalidInputError,
    KerrSimError,
    NumericalError,
    TrialFailure,
)
from src.core.gates import (
    Basis,
    BellLabel,
    GateConfig,
    Quadrature,
    bell_measure,
    bell_state,
    cnot,
    parity_gate,
    qnd_polarization_measure,
    qnd_presence_detect,
)
from src.core.homodyne import Parity, density, measure, project, sample, threshold_classify
from src.core.hybrid_state import (
    HybridState,
    PolLabel,
    Unitary2,
    allocate_probe,
    apply_1q,
    conditional_kerr,
    inner,
    new_product_state,
    norm,
    rotate_probe,
)

__all__ = [
    "Basis",
    "BellLabel",
    "ConfigError",
    "GateConfig",
    "HybridState",
    "ImpossibleOutcomeError",
    "InvalidInputError",
    "KerrSimError",
    "NumericalError",
    "Parity",
    "PolLabel",
    "Quadrature",
    "TrialFailure",
    "Unitary2",
    "allocate_probe",
    "apply_1q",
    "bell_measure",
    "bell_state",
    "cnot",
    "conditional_kerr",
    "density",
    "inner",
    "measure",
    "new_product_state",
    "norm",
    "parity_gate",
    "project",
    "qnd_polarization_measure",
    "qnd_presence_detect",
    "rotate_probe",
    "sample",
    "threshold_classify",
]
