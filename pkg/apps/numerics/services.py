"""Time propagation, resolvent columns and dense diagonalization.

Every kernel takes an explicit tolerance that defaults to the configured
value, and reports what it achieved so callers can carry error estimates.
"""

import logging
from collections.abc import Iterator

import numpy as np
from scipy import linalg, sparse, special
from scipy.sparse import linalg as sparse_linalg

from apps.hamiltonians.models import SparseHamiltonian
from apps.hamiltonians.selectors import spectrum_window
from apps.numerics.models import Eigensystem, GreenColumn, SolverMethod, WaveState
from apps.shared.exceptions import ConfigurationError, NumericFailure, ResourceCapExceeded
from apps.shared.validators import validate_finite, validate_tolerance
from config import settings

logger = logging.getLogger(__name__)

# Sparse LU is used below this many sites, or for any one-dimensional chain.
DIRECT_SOLVE_SITES = 50_000


def basis_state(*, hamiltonian: SparseHamiltonian, site) -> WaveState:
    amplitudes = np.zeros(hamiltonian.size, dtype=complex)
    amplitudes[hamiltonian.index_of(site)] = 1.0
    return WaveState(box=hamiltonian.box, amplitudes=amplitudes)


def _check_state(*, hamiltonian: SparseHamiltonian, state: WaveState) -> np.ndarray:
    amplitudes = np.asarray(state.amplitudes, dtype=complex)
    if amplitudes.shape != (hamiltonian.size,):
        raise ConfigurationError(
            "Wave state does not match the operator.",
            {"expected": hamiltonian.size, "got": list(amplitudes.shape)},
        )
    return amplitudes


def _chebyshev_scaling(hamiltonian: SparseHamiltonian) -> tuple[float, float]:
    lo, hi = spectrum_window(hamiltonian=hamiltonian)
    center = (hi + lo) / 2
    half_width = (hi - lo) / 2 * (1 + settings.CHEBYSHEV_SPECTRAL_MARGIN)
    return center, half_width


def chebyshev_coefficients(*, argument: float, tol: float) -> np.ndarray:
    """Coefficients (2 - delta_k0)(-i)^k J_k(argument), truncated once the tail is below tol."""
    order = int(argument + 10 * max(argument, 1.0) ** (1 / 3) + 30)
    while True:
        bessel = special.jv(np.arange(order + 1), argument)
        weights = 2 * np.abs(bessel)
        weights[0] /= 2
        tail = np.cumsum(weights[::-1])[::-1]
        below = np.flatnonzero(tail < tol / 2)
        if below.size and below[0] > 0:
            cutoff = int(below[0])
            break
        order *= 2
    k = np.arange(cutoff)
    coefficients = (2.0 - (k == 0)) * (-1j) ** k * bessel[:cutoff]
    return coefficients


def _chebyshev_apply(
    *, hamiltonian: SparseHamiltonian, vector: np.ndarray, coefficients: np.ndarray,
    center: float, half_width: float, phase: complex,
) -> np.ndarray:
    matrix = hamiltonian.matrix

    def scaled(v):
        return (matrix @ v - center * v) / half_width

    previous = vector
    result = coefficients[0] * previous
    if coefficients.size == 1:
        return phase * result
    current = scaled(vector)
    result = result + coefficients[1] * current
    for coefficient in coefficients[2:]:
        previous, current = current, 2 * scaled(current) - previous
        result = result + coefficient * current
    return phase * result


def _raise_if_not_finite(amplitudes: np.ndarray, *, t: float) -> None:
    if not np.all(np.isfinite(amplitudes)):
        bad = int(np.count_nonzero(~np.isfinite(amplitudes)))
        raise NumericFailure(
            f"Propagation produced {bad} non-finite amplitudes at t={t:g}.",
            {"t": t, "non_finite": bad},
        )


def evolve(
    *, hamiltonian: SparseHamiltonian, state: WaveState, t: float, tol: float | None = None
) -> WaveState:
    """e^{-itH} applied to ``state`` with error at most tol * |state|."""
    tol = validate_tolerance(settings.PROPAGATION_TOL if tol is None else tol, name="tol")
    t = validate_finite(t, name="t")
    if t < 0:
        raise ConfigurationError("Propagation time must be nonnegative.", {"t": t})
    amplitudes = _check_state(hamiltonian=hamiltonian, state=state)
    if t == 0:
        return WaveState(box=state.box, amplitudes=amplitudes.copy())

    center, half_width = _chebyshev_scaling(hamiltonian)
    coefficients = chebyshev_coefficients(argument=half_width * t, tol=tol)
    logger.debug("evolve: t=%g with %d Chebyshev terms", t, coefficients.size)
    result = _chebyshev_apply(
        hamiltonian=hamiltonian,
        vector=amplitudes,
        coefficients=coefficients,
        center=center,
        half_width=half_width,
        phase=np.exp(-1j * center * t),
    )
    _raise_if_not_finite(result, t=t)
    return WaveState(box=state.box, amplitudes=result)


def evolve_steps(
    *, hamiltonian: SparseHamiltonian, state: WaveState, dt: float, steps: int,
    tol: float | None = None,
) -> Iterator[WaveState]:
    """Yield the state at t = 0, dt, ..., steps*dt.

    The tolerance bounds the error of the whole trajectory and is split evenly
    across steps.
    """
    tol = validate_tolerance(settings.PROPAGATION_TOL if tol is None else tol, name="tol")
    amplitudes = _check_state(hamiltonian=hamiltonian, state=state).copy()
    yield WaveState(box=state.box, amplitudes=amplitudes)
    if steps <= 0:
        return
    center, half_width = _chebyshev_scaling(hamiltonian)
    coefficients = chebyshev_coefficients(argument=half_width * dt, tol=tol / steps)
    phase = np.exp(-1j * center * dt)
    for step in range(1, steps + 1):
        amplitudes = _chebyshev_apply(
            hamiltonian=hamiltonian,
            vector=amplitudes,
            coefficients=coefficients,
            center=center,
            half_width=half_width,
            phase=phase,
        )
        if step % 64 == 0:
            _raise_if_not_finite(amplitudes, t=step * dt)
        yield WaveState(box=state.box, amplitudes=amplitudes)


def _resolve_method(hamiltonian: SparseHamiltonian, method) -> SolverMethod:
    method = SolverMethod(method or settings.SOLVER_METHOD)
    if method is not SolverMethod.AUTO:
        return method
    if hamiltonian.size <= DIRECT_SOLVE_SITES or hamiltonian.dim == 1:
        return SolverMethod.DIRECT
    return SolverMethod.ITERATIVE


def _shifted(hamiltonian: SparseHamiltonian, z: complex) -> sparse.csc_array:
    identity = sparse.eye_array(hamiltonian.size, format="csc", dtype=complex)
    return (hamiltonian.matrix.astype(complex) - z * identity).tocsc()


def _solve_dense(hamiltonian: SparseHamiltonian, z: complex, rhs: np.ndarray) -> np.ndarray:
    if hamiltonian.size > settings.DENSE_SIZE_CAP:
        raise ResourceCapExceeded(
            f"Dense solve on {hamiltonian.size} sites exceeds DENSE_SIZE_CAP.",
            {"sites": hamiltonian.size, "cap": settings.DENSE_SIZE_CAP},
        )
    dense = hamiltonian.matrix.toarray().astype(complex)
    dense[np.diag_indices_from(dense)] -= z
    return linalg.solve(dense, rhs, assume_a="sym")


def _solve_iterative(hamiltonian: SparseHamiltonian, z: complex, rhs: np.ndarray, tol: float):
    operator = _shifted(hamiltonian, z)
    values, info = sparse_linalg.gmres(
        operator,
        rhs,
        rtol=tol / 10,
        atol=0.0,
        restart=settings.GMRES_RESTART,
        maxiter=settings.GMRES_MAXITER,
    )
    return values, info


def green_column(
    *,
    hamiltonian: SparseHamiltonian,
    z: complex,
    source,
    tol: float | None = None,
    method: str | SolverMethod | None = None,
) -> GreenColumn:
    tol = validate_tolerance(settings.SOLVER_TOL if tol is None else tol, name="tol")
    z = complex(z)
    if not (np.isfinite(z.real) and np.isfinite(z.imag)):
        raise ConfigurationError("Spectral parameter must be finite.", {"z": str(z)})
    source_index = hamiltonian.index_of(source)
    rhs = np.zeros(hamiltonian.size, dtype=complex)
    rhs[source_index] = 1.0
    method = _resolve_method(hamiltonian, method)

    if method is SolverMethod.DIRECT:
        try:
            values = sparse_linalg.splu(_shifted(hamiltonian, z)).solve(rhs)
        except RuntimeError as exc:
            raise NumericFailure(
                f"Sparse factorization of H - z failed at z={z}.", {"z": str(z)}
            ) from exc
    elif method is SolverMethod.DENSE:
        values = _solve_dense(hamiltonian, z, rhs)
    else:
        values, info = _solve_iterative(hamiltonian, z, rhs, tol)
        if info != 0 or _residual(hamiltonian, z, values, rhs) > tol:
            if hamiltonian.size > settings.DENSE_SIZE_CAP:
                raise NumericFailure(
                    f"GMRES did not reach tol={tol:g} at z={z} and the box is too large "
                    "for the dense fallback.",
                    {"z": str(z), "info": int(info), "sites": hamiltonian.size},
                )
            logger.warning("GMRES stagnated at z=%s (info=%d); using dense solve", z, info)
            values = _solve_dense(hamiltonian, z, rhs)
            method = SolverMethod.DENSE

    residual = _residual(hamiltonian, z, values, rhs)
    if not np.all(np.isfinite(values)):
        raise NumericFailure(f"Resolvent column at z={z} is not finite.", {"z": str(z)})
    if residual > tol:
        raise NumericFailure(
            f"Resolvent residual {residual:.3g} exceeds tol={tol:g} at z={z}.",
            {"z": str(z), "residual": residual, "method": method.value},
        )
    return GreenColumn(
        z=z,
        source=tuple(int(c) for c in hamiltonian.sites[source_index]),
        values=values,
        residual_norm=residual,
        method=method,
    )


def _residual(hamiltonian, z, values, rhs) -> float:
    return float(np.linalg.norm(hamiltonian.matrix @ values - z * values - rhs))


def dense_eig(*, hamiltonian: SparseHamiltonian) -> Eigensystem:
    if hamiltonian.size > settings.DENSE_SIZE_CAP:
        raise ResourceCapExceeded(
            f"Operator with {hamiltonian.size} sites is above DENSE_SIZE_CAP="
            f"{settings.DENSE_SIZE_CAP}; use the propagation or resolvent routes.",
            {"sites": hamiltonian.size, "cap": settings.DENSE_SIZE_CAP},
        )
    dense = hamiltonian.matrix.toarray()
    eigenvalues, eigenvectors = linalg.eigh(dense)
    residuals = np.linalg.norm(dense @ eigenvectors - eigenvectors * eigenvalues, axis=0)
    gram = eigenvectors.T @ eigenvectors
    gram[np.diag_indices_from(gram)] -= 1.0
    system = Eigensystem(
        hamiltonian=hamiltonian,
        eigenvalues=eigenvalues,
        eigenvectors=eigenvectors,
        max_residual=float(residuals.max(initial=0.0)),
        orthogonality_error=float(np.abs(gram).max(initial=0.0)),
    )
    logger.debug(
        "dense_eig: %d sites, residual %.2e, orthogonality %.2e",
        system.size,
        system.max_residual,
        system.orthogonality_error,
    )
    return system


def green_column_spectral(*, eigensystem: Eigensystem, z: complex, source) -> np.ndarray:
    """sum_j v_j(.) v_j(source) / (lambda_j - z)."""
    source_index = eigensystem.hamiltonian.index_of(source)
    vectors = eigensystem.eigenvectors
    return vectors @ (vectors[source_index] / (eigensystem.eigenvalues - complex(z)))
