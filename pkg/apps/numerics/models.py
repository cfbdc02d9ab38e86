from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from apps.hamiltonians.models import SparseHamiltonian
from apps.lattice.models import LatticeBox


class SolverMethod(enum.Enum):
    AUTO = "auto"
    ITERATIVE = "iterative"
    DIRECT = "direct"
    DENSE = "dense"


@dataclass(frozen=True, eq=False)
class WaveState:
    """Complex amplitudes over the sites of an operator's box."""

    box: LatticeBox
    amplitudes: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True, eq=False)
class GreenColumn:
    """The column G_z(., source) of the resolvent (H - z)^-1."""

    z: complex
    source: tuple[int, ...]
    values: np.ndarray
    residual_norm: float
    method: SolverMethod

    @property
    def epsilon(self) -> float:
        return abs(self.z.imag)


@dataclass(frozen=True, eq=False)
class Eigensystem:
    hamiltonian: SparseHamiltonian
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    max_residual: float
    orthogonality_error: float

    @property
    def size(self) -> int:
        return self.eigenvalues.size
