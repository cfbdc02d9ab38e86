import itertools
import logging
import math

import numpy as np
from numpy.polynomial import legendre

from apps.eigenfunctions.models import (
    BoxVectorFunction,
    PlaneWave,
    ProductSolution,
    QuadratureRule,
    TransferMatrixSolution,
    TransverseSolution,
    TrimmedEnergySet,
    TrimmedPlaneWave,
    require_k_in_range,
)
from apps.lattice.models import TrimPattern
from apps.lattice.selectors import site_indices
from apps.numerics.models import Eigensystem
from apps.shared.exceptions import ConfigurationError, DomainError
from apps.shared.validators import validate_finite, validate_int_vector, validate_positive_int

logger = logging.getLogger(__name__)

# Margin kept between |e - sum 2cos(theta_j)| and 2 on the transverse cube.
TRANSVERSE_MARGIN = 0.1
TRANSVERSE_MAX_RADIUS = math.pi / 4
MIN_RESOLUTION = 8


def make_plane_wave(*, theta, amplitude: complex = 1.0, real: bool = False) -> PlaneWave:
    theta = tuple(validate_finite(t, name="theta") for t in theta)
    if not theta:
        raise ConfigurationError("A plane wave needs at least one direction.")
    return PlaneWave(theta=theta, amplitude=amplitude, real=real)


def make_trimmed_wave(*, pattern: TrimPattern, k, kappa) -> TrimmedPlaneWave:
    k = validate_int_vector(k, name="k", dim=pattern.d1)
    kappa = tuple(validate_finite(v, name="kappa") for v in kappa)
    if len(kappa) != pattern.d2:
        raise ConfigurationError(
            f"kappa has {len(kappa)} entries, expected d2={pattern.d2}.",
            {"expected": pattern.d2, "got": len(kappa)},
        )
    require_k_in_range(k=k, rho=pattern.rho)
    return TrimmedPlaneWave(pattern=pattern, k=k, kappa=kappa)


def _transverse_cube(*, e: float, m: int) -> tuple[float, float]:
    """Center theta* on the diagonal and half-width r of the cube S_e."""
    slack = 2 * (m + 1) - abs(e)
    eta = min(TRANSVERSE_MARGIN, slack / 2)
    target = float(np.clip(e, -2 * m + eta, 2 * m - eta))
    center = float(np.arccos(target / (2 * m)))
    gap = abs(e - target)
    margin = min(TRANSVERSE_MARGIN, (2 - gap) / 2)
    radius = min(TRANSVERSE_MAX_RADIUS, (2 - margin - gap) / (2 * m))
    return center, radius


def _rule_nodes(*, rule: QuadratureRule, resolution: int, center: float, radius: float):
    if rule is QuadratureRule.MIDPOINT:
        unit = (np.arange(resolution) + 0.5) / resolution * 2 - 1
        unit_weights = np.full(resolution, 2.0 / resolution)
    else:
        unit, unit_weights = legendre.leggauss(resolution)
    return center + radius * unit, radius * unit_weights


def make_transverse_solution(
    *, e: float, m: int, resolution: int, rule: str | QuadratureRule = QuadratureRule.MIDPOINT,
    amplitude: complex = 1.0,
) -> TransverseSolution:
    e = validate_finite(e, name="e")
    m = validate_positive_int(m, name="m")
    resolution = validate_positive_int(resolution, name="resolution")
    if resolution < MIN_RESOLUTION:
        raise ConfigurationError(
            f"Transverse resolution must be at least {MIN_RESOLUTION}.", {"resolution": resolution}
        )
    if abs(e) >= 2 * (m + 1):
        raise DomainError(
            f"Energy {e} lies outside (-{2 * (m + 1)}, {2 * (m + 1)}).", {"e": e, "m": m}
        )
    rule = QuadratureRule(rule)
    center, radius = _transverse_cube(e=e, m=m)
    axis, axis_weights = _rule_nodes(rule=rule, resolution=resolution, center=center, radius=radius)
    nodes = np.array(list(itertools.product(axis, repeat=m)))
    weights = np.prod(np.array(list(itertools.product(axis_weights, repeat=m))), axis=1)
    weights = amplitude * weights / (2 * np.pi) ** m
    residual_energy = (e - 2 * np.cos(nodes).sum(axis=1)) / 2
    if np.abs(residual_energy).max() >= 1:
        raise DomainError(
            "Transverse cube leaves the region where theta_plus is defined.",
            {"e": e, "m": m, "radius": radius},
        )
    logger.debug(
        "transverse solution: e=%g m=%d center=%.4f radius=%.4f nodes=%d",
        e, m, center, radius, len(nodes),
    )
    return TransverseSolution(
        target_energy=e,
        m=m,
        nodes=nodes,
        theta_plus=np.arccos(residual_energy),
        weights=weights,
        center=center,
        radius=radius,
        rule=rule,
    )


def make_product_solution(*, factors) -> ProductSolution:
    return ProductSolution(parts=tuple(factors))


def make_trimmed_transverse_wave(
    *, pattern: TrimPattern, k, e: float, resolution: int,
    rule: str | QuadratureRule = QuadratureRule.MIDPOINT,
) -> ProductSolution:
    """Trimmed sine factors on the first d1 coordinates times a transverse solution on Z^d2."""
    if pattern.d2 < 2:
        raise ConfigurationError(
            "The transverse construction needs at least two free directions.", {"d2": pattern.d2}
        )
    sines = make_trimmed_wave(
        pattern=TrimPattern(d1=pattern.d1, d2=0, rho=pattern.rho), k=k, kappa=()
    )
    transverse = make_transverse_solution(e=e, m=pattern.d2 - 1, resolution=resolution, rule=rule)
    if pattern.d1 == 0:
        return make_product_solution(factors=[transverse])
    return make_product_solution(factors=[sines, transverse])


def make_transfer_matrix_solution(
    *, energy: float, n_range: tuple[int, int], potential: dict | None = None,
    u0: float = 1.0, u_minus1: float = 0.0,
) -> TransferMatrixSolution:
    """Solve u(n+1) + u(n-1) + V(n) u(n) = E u(n) outward from n = 0 and n = -1."""
    energy = validate_finite(energy, name="energy")
    lo, hi = (int(v) for v in n_range)
    if not lo <= -1 < 0 <= hi:
        raise ConfigurationError("n_range must contain -1 and 0.", {"n_range": [lo, hi]})
    potential = potential or {}

    def v(n):
        return potential.get((n,), 0.0)

    table = np.zeros(hi - lo + 1)
    table[0 - lo], table[-1 - lo] = u0, u_minus1
    for n in range(0, hi):
        table[n + 1 - lo] = (energy - v(n)) * table[n - lo] - table[n - 1 - lo]
    for n in range(-1, lo, -1):
        table[n - 1 - lo] = (energy - v(n)) * table[n - lo] - table[n + 1 - lo]
    if not np.all(np.isfinite(table)):
        raise ConfigurationError("Transfer-matrix recursion overflowed; shrink n_range.")
    return TransferMatrixSolution(solution_energy=energy, start=lo, table=table)


def make_eigenvector_function(*, eigensystem: Eigensystem, index: int) -> BoxVectorFunction:
    hamiltonian = eigensystem.hamiltonian
    grid = np.zeros(hamiltonian.box.site_count, dtype=complex)
    grid[site_indices(box=hamiltonian.box, sites=hamiltonian.sites)] = eigensystem.eigenvectors[:, index]
    return BoxVectorFunction(
        box=hamiltonian.box, grid=grid, vector_energy=float(eigensystem.eigenvalues[index])
    )


def trimmed_energy_set(*, pattern: TrimPattern, kappa_samples=None) -> TrimmedEnergySet:
    """Trimmed-direction energies from nodal-consistent modes versus the printed set.

    Nodal-consistent: sum_i 2cos(pi k_i / rho_i), k_i in 1..rho_i - 1.
    Printed: sum_i 2cos(pi p_i / (2 rho_i)), p_i in 1..4 rho_i - 1.
    """
    ranges = [range(1, rho) for rho in pattern.rho]
    nodal = np.unique(
        np.round(
            [sum(2 * math.cos(math.pi * k / rho) for k, rho in zip(ks, pattern.rho, strict=True))
             for ks in itertools.product(*ranges)],
            12,
        )
    )
    printed_ranges = [range(1, 4 * rho) for rho in pattern.rho]
    printed = np.unique(
        np.round(
            [sum(2 * math.cos(math.pi * p / (2 * rho)) for p, rho in zip(ps, pattern.rho, strict=True))
             for ps in itertools.product(*printed_ranges)],
            12,
        )
    )
    reproduced = np.array([np.any(np.abs(nodal - value) < 1e-9) for value in printed])
    free = np.zeros(1)
    if kappa_samples is not None:
        kappa_samples = np.asarray(kappa_samples, dtype=float).reshape(-1, pattern.d2)
        free = 2 * np.cos(kappa_samples).sum(axis=1)
    energies = np.unique(np.round((nodal[:, None] + free[None, :]).ravel(), 12))
    logger.info(
        "trimmed energies: %d nodal values reproduce %d of %d printed values",
        nodal.size, int(reproduced.sum()), printed.size,
    )
    return TrimmedEnergySet(nodal=nodal, printed=printed, reproduced=reproduced, energies=energies)

