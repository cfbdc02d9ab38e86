import numpy as np

from apps.hamiltonians.models import SparseHamiltonian


def spectrum_window(*, hamiltonian: SparseHamiltonian) -> tuple[float, float]:
    """[-2d - |V|_inf, 2d + |V|_inf], which contains every eigenvalue of H."""
    bound = hamiltonian.norm_bound
    return (-bound, bound)


def hamiltonian_trace(*, hamiltonian: SparseHamiltonian) -> float:
    return float(hamiltonian.diagonal.sum())


def boundary_distance(*, hamiltonian: SparseHamiltonian) -> np.ndarray:
    """Sup-distance of each site to the outside of the box."""
    box = hamiltonian.box
    offset = np.abs(hamiltonian.sites - np.asarray(box.center)).max(axis=1)
    return box.radius - offset
