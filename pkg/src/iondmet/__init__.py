"""Embedding-plus-QCC simulation of a hydrogen ring on a simulated trapped-ion device."""

from .kernels import BACKEND
from .pauli import PauliString, PauliSum, expectation
from .statevector import Circuit, Gate, Histogram, NativeCircuit, NativeGate, NoiseModel, StateVector
from .qcc import AnsatzSpec, MeanFieldParams, vqe_minimize
from .dmet import FragmentProblem, IntegralSet
from .compiler import compile_circuit
from .mitigation import ConfusionModel, bootstrap, mcweeny_purify
from .data import reference

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "AnsatzSpec", "Circuit", "ConfusionModel", "FragmentProblem", "Gate", "Histogram",
    "IntegralSet", "MeanFieldParams", "NativeCircuit", "NativeGate", "NoiseModel", "PauliString",
    "PauliSum", "StateVector", "bootstrap", "compile_circuit", "expectation", "mcweeny_purify",
    "reference", "vqe_minimize",
]
