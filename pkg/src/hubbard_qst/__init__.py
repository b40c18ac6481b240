"""Exact-diagonalization simulator for a Hubbard-chain quantum spin transistor."""

__version__ = "0.1.0"

from .errors import IntegrationError, ParameterError, SizeLimitError
from .fockspace import FockBasis, ModeOrder, build_basis, hop_matrix, number_matrix
from .hamiltonian import HubbardParams, PotentialLandscape, build_gate, build_total, landscape
from .evolve import Spectrum, SweepSchedule, dephase_propagate, propagate, spectral_decompose
from .states import DensityMatrix, EnsembleState, QubitState
from .measure import FidelityConvention, QuadratureSpec, average_fidelity, fidelity

__all__ = [
    "IntegrationError", "ParameterError", "SizeLimitError",
    "FockBasis", "ModeOrder", "build_basis", "hop_matrix", "number_matrix",
    "HubbardParams", "PotentialLandscape", "build_gate", "build_total", "landscape",
    "Spectrum", "SweepSchedule", "dephase_propagate", "propagate", "spectral_decompose",
    "DensityMatrix", "EnsembleState", "QubitState",
    "FidelityConvention", "QuadratureSpec", "average_fidelity", "fidelity",
]
