import numpy as np

from apps.hamiltonians.models import SparseHamiltonian
from apps.hamiltonians.selectors import boundary_distance, spectrum_window
from apps.numerics.models import Eigensystem, WaveState
from apps.numerics.services import dense_eig
from apps.shared.exceptions import ConfigurationError
from config import settings


def spectral_distance(
    *,
    hamiltonian: SparseHamiltonian,
    z: complex,
    method: str = "auto",
    eigensystem: Eigensystem | None = None,
) -> float:
    """dist(z, sigma(H)).

    ``dense`` uses the exact finite-volume spectrum, ``window`` the
    conservative interval from spectrum_window, ``auto`` picks dense when the
    box is small enough.
    """
    z = complex(z)
    if method == "auto":
        dense_ok = eigensystem is not None or hamiltonian.size <= settings.DENSE_SIZE_CAP
        method = "dense" if dense_ok else "window"
    if method == "dense":
        if eigensystem is None:
            eigensystem = dense_eig(hamiltonian=hamiltonian)
        return float(np.abs(eigensystem.eigenvalues - z).min())
    if method == "window":
        lo, hi = spectrum_window(hamiltonian=hamiltonian)
        outside = max(lo - z.real, z.real - hi, 0.0)
        return float(np.hypot(outside, z.imag))
    raise ConfigurationError(f"Unknown spectral distance method {method!r}.", {"method": method})


def boundary_mass(
    *, hamiltonian: SparseHamiltonian, state: WaveState, margin: int | None = None
) -> float:
    """Probability carried by sites within ``margin`` of the box boundary."""
    margin = settings.CONTAINMENT_MARGIN if margin is None else margin
    near = boundary_distance(hamiltonian=hamiltonian) < margin
    return float(state.probabilities[near].sum())
