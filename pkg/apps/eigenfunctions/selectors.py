import logging

import numpy as np

from apps.eigenfunctions.models import (
    BoundaryGrowthReport,
    BoundaryRemainder,
    ExponentialGrowthFit,
    GrowthProfile,
    LatticeFunction,
)
from apps.hamiltonians.models import SparseHamiltonian
from apps.hamiltonians.selectors import boundary_distance
from apps.lattice.models import LatticeBox, Shell, ShellKind
from apps.lattice.selectors import box_site_array, shell_site_array, sup_distance
from apps.numerics.models import GreenColumn
from apps.numerics.selectors import spectral_distance
from apps.shared.exceptions import ConfigurationError, PreconditionError
from apps.shared.validators import validate_int_vector, validate_positive_int
from apps.transport.models import GrowthWeight

logger = logging.getLogger(__name__)

NU_CEILING = 1.0 - 1e-9


def _radial_sums(*, evaluator: LatticeFunction, base, radius: int) -> tuple[np.ndarray, np.ndarray]:
    """Sums of |psi| and |psi|^2 over each sup-sphere |n - base| = r, r = 0..radius.

    Separable evaluators are summed factor by factor: the cumulative sum over
    a product box is the product of the factors' cumulative sums.
    """
    cumulative_1 = np.ones(radius + 1)
    cumulative_2 = np.ones(radius + 1)
    offset = 0
    for factor in evaluator.factors():
        block_base = tuple(base[offset : offset + factor.dim])
        block = LatticeBox(dim=factor.dim, center=block_base, radius=radius)
        sites = box_site_array(box=block)
        magnitudes = np.abs(factor(sites))
        rings = sup_distance(sites=sites, origin=block_base)
        cumulative_1 *= np.cumsum(np.bincount(rings, weights=magnitudes, minlength=radius + 1))
        cumulative_2 *= np.cumsum(np.bincount(rings, weights=magnitudes**2, minlength=radius + 1))
        offset += factor.dim
    return np.diff(cumulative_1, prepend=0.0), np.diff(cumulative_2, prepend=0.0)


def _weighted_radial_sums(
    *, evaluator: LatticeFunction, weight: GrowthWeight, base, radius: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if weight.radial and (not weight.base or tuple(weight.base) == tuple(base)):
        rings_1, rings_2 = _radial_sums(evaluator=evaluator, base=base, radius=radius)
        phi = weight.radial_values(np.arange(radius + 1))
        return rings_1, rings_2, rings_2 / phi
    box = LatticeBox(dim=evaluator.dim, center=tuple(base), radius=radius)
    sites = box_site_array(box=box)
    magnitudes = np.abs(evaluator(sites))
    phi = weight.values(sites)
    if np.any(phi <= 0):
        raise ConfigurationError(
            "Growth profiles divide by the weight, which must be positive on the box.",
            {"radius": radius},
        )
    rings = sup_distance(sites=sites, origin=base)
    count = radius + 1
    return (
        np.bincount(rings, weights=magnitudes, minlength=count),
        np.bincount(rings, weights=magnitudes**2, minlength=count),
        np.bincount(rings, weights=magnitudes**2 / phi, minlength=count),
    )


def _fit_power_law(radii: np.ndarray, sums: np.ndarray) -> tuple[float, float, float]:
    """Slope of log(W(L) - W(L // 2)) against log L on the largest decade of L.

    The dyadic increment of a L^nu + B is a (1 - 2^-nu) L^nu, so additive
    constants from small L drop out of the fit.
    """
    lookup = np.concatenate([[0.0], sums])
    increments = lookup[radii] - lookup[radii // 2]
    window = (radii >= max(2, radii.max() / 10)) & (increments > 0)
    if window.sum() < 2:
        raise PreconditionError(
            "The lattice function vanishes on the fitting window; choose another base site.",
            {"max_radius": int(radii.max())},
        )
    x, y = np.log(radii[window]), np.log(increments[window])
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return float(slope), float(intercept), residual


def growth_profile(
    *, evaluator: LatticeFunction, weight: GrowthWeight, base_site, max_radius: int
) -> GrowthProfile:
    base = validate_int_vector(base_site, name="base_site", dim=evaluator.dim)
    max_radius = validate_positive_int(max_radius, name="max_radius")
    rings_1, rings_2, weighted = _weighted_radial_sums(
        evaluator=evaluator, weight=weight, base=base, radius=max_radius + 1
    )
    radii = np.arange(1, max_radius + 1)
    weighted_sums = np.cumsum(weighted)[radii]
    box_norms = np.cumsum(rings_2)[radii]
    shell_sums = rings_1[radii] + rings_1[radii + 1]

    slope, intercept, residual = _fit_power_law(radii, weighted_sums)
    nu = float(np.clip(slope, 0.0, NU_CEILING))
    amplitude = float(np.max(weighted_sums / radii.astype(float) ** nu))
    logger.debug("growth profile at %s: slope %.4f, nu %.4f, A %.4g", base, slope, nu, amplitude)
    return GrowthProfile(
        base_site=base,
        weight=weight,
        radii=radii,
        shell_sums=shell_sums,
        weighted_sums=weighted_sums,
        box_norms=box_norms,
        amplitude=amplitude,
        nu=nu,
        raw_slope=slope,
        intercept=intercept,
        fit_residual=residual,
    )


def validate_generalized_eigenfunction(
    *, hamiltonian: SparseHamiltonian, evaluator: LatticeFunction, energy: float
) -> float:
    """max |(H psi)(n) - E psi(n)| over sites whose neighbors all lie in the box."""
    if hamiltonian.restricted:
        raise ConfigurationError("Residuals are defined on full boxes only.")
    psi = evaluator(hamiltonian.sites)
    residual = np.abs(hamiltonian.matvec(psi) - energy * psi)
    interior = boundary_distance(hamiltonian=hamiltonian) >= 1
    return float(residual[interior].max(initial=0.0))


def commutator_remainder(*, evaluator: LatticeFunction, box: LatticeBox) -> BoundaryRemainder:
    grown = box.grown(1)
    sites = box_site_array(box=grown)
    psi = evaluator(sites).reshape(grown.shape)
    chi = (sup_distance(sites=sites, origin=box.center) <= box.radius).reshape(grown.shape)
    chi = chi.astype(float)
    remainder = np.zeros(grown.shape, dtype=complex)
    for axis in range(box.dim):
        for step in (1, -1):
            neighbor_psi = np.zeros_like(psi)
            neighbor_chi = np.zeros_like(chi)
            target = [slice(None)] * box.dim
            source = [slice(None)] * box.dim
            target[axis] = slice(0, -1) if step == 1 else slice(1, None)
            source[axis] = slice(1, None) if step == 1 else slice(0, -1)
            neighbor_psi[tuple(target)] = psi[tuple(source)]
            neighbor_chi[tuple(target)] = chi[tuple(source)]
            remainder += (neighbor_chi - chi) * neighbor_psi
    remainder = remainder.ravel()
    enlarged = sup_distance(sites=sites, origin=box.center) >= box.radius
    return BoundaryRemainder(box=box, sites=sites[enlarged], values=remainder[enlarged])


def eigen_relation_terms(
    *,
    hamiltonian: SparseHamiltonian,
    evaluator: LatticeFunction,
    energy: float,
    radius: int,
    column: GreenColumn,
    center=None,
) -> tuple[complex, complex]:
    """The two terms of psi(n) = (E - z)[G chi_L psi](n) + [G R_L](n) at n = column.source.

    chi_L is the box of ``radius`` about ``center`` (default: the working box
    center). Exact on the finite box when Lambda_{L+1} lies inside it.
    """
    box = hamiltonian.box
    center = box.center if center is None else validate_int_vector(center, name="center", dim=box.dim)
    inner = LatticeBox(dim=box.dim, center=center, radius=radius)
    offset = max((abs(a - b) for a, b in zip(center, box.center, strict=True)), default=0)
    if offset + radius + 1 > box.radius:
        raise PreconditionError(
            f"Lambda_{radius + 1} does not fit in the working box of radius {box.radius}.",
            {"radius": radius, "center": list(center), "box_radius": box.radius},
        )
    psi = evaluator(hamiltonian.sites)
    chi = sup_distance(sites=hamiltonian.sites, origin=center) <= radius
    near = (energy - column.z) * np.dot(column.values[chi], psi[chi])
    remainder = commutator_remainder(evaluator=evaluator, box=inner)
    rows = [hamiltonian.index_of(site) for site in remainder.sites]
    far = np.dot(column.values[rows], remainder.values)
    return complex(near), complex(far)


def nonzero_base_site(*, evaluator: LatticeFunction, box: LatticeBox, threshold: float = 1e-8):
    """The site closest to the box center (sup-norm, then lexicographic) with |psi| > threshold."""
    sites = box_site_array(box=box)
    distance = sup_distance(sites=sites, origin=box.center)
    order = np.lexsort((*sites.T[::-1], distance))
    magnitudes = np.abs(evaluator(sites[order]))
    hits = np.flatnonzero(magnitudes > threshold)
    if not hits.size:
        raise PreconditionError("The lattice function vanishes on the whole box.", {"threshold": threshold})
    return tuple(int(c) for c in sites[order[hits[0]]])


def _require_off_spectrum(*, hamiltonian, energy, method) -> float:
    delta = spectral_distance(hamiltonian=hamiltonian, z=energy, method=method)
    if delta <= 1e-12:
        raise PreconditionError(
            f"E={energy} lies in the spectrum of H; the exponential growth bound does not apply.",
            {"energy": energy, "delta": delta},
        )
    return delta


def combes_thomas_constant(*, dim: int, delta: float) -> float:
    """c = 1/(12 d) for delta <= 1 and 1/(12 d alpha) for delta <= alpha."""
    return 1.0 / (12 * dim * max(1.0, delta))


def boundary_growth_check(
    *,
    evaluator: LatticeFunction,
    energy: float,
    hamiltonian: SparseHamiltonian,
    radii,
    base_site=None,
    distance_method: str = "auto",
) -> BoundaryGrowthReport:
    base = validate_int_vector(
        hamiltonian.box.center if base_site is None else base_site, name="base_site", dim=evaluator.dim
    )
    delta = _require_off_spectrum(hamiltonian=hamiltonian, energy=energy, method=distance_method)
    radii = np.asarray(sorted(int(L) for L in radii))
    c = combes_thomas_constant(dim=evaluator.dim, delta=delta)
    rings_1, _ = _radial_sums(evaluator=evaluator, base=base, radius=int(radii.max()) + 1)
    psi_at_base = complex(evaluator(np.asarray([base]))[0])
    if psi_at_base == 0:
        logger.warning("psi vanishes at %s; boundary growth ratios are undefined", base)
    return BoundaryGrowthReport(
        energy=float(energy),
        base_site=base,
        delta=delta,
        decay_constant=c,
        psi_at_base=psi_at_base,
        radii=radii,
        shell_sums=rings_1[radii] + rings_1[radii + 1],
        thresholds=delta / (2 * evaluator.dim) * np.exp(c * delta * radii),
    )


def exponential_growth_sites(
    *,
    evaluator: LatticeFunction,
    energy: float,
    hamiltonian: SparseHamiltonian,
    radii,
    base_site=None,
    distance_method: str = "auto",
) -> ExponentialGrowthFit:
    base = validate_int_vector(
        hamiltonian.box.center if base_site is None else base_site, name="base_site", dim=evaluator.dim
    )
    _require_off_spectrum(hamiltonian=hamiltonian, energy=energy, method=distance_method)
    radii = np.asarray(sorted(int(L) for L in radii))
    chosen, magnitudes = [], []
    for L in radii:
        shell = Shell(box=LatticeBox(dim=evaluator.dim, center=base, radius=int(L)), kind=ShellKind.ENLARGED)
        sites = shell_site_array(shell=shell)
        values = np.abs(evaluator(sites))
        best = int(np.argmax(values))
        chosen.append(sites[best])
        magnitudes.append(values[best])
    chosen, magnitudes = np.asarray(chosen), np.asarray(magnitudes)
    distance = sup_distance(sites=chosen, origin=base).astype(float)
    c2, _ = np.polyfit(distance, np.log(magnitudes), 1)
    c1 = float(np.min(magnitudes * np.exp(-c2 * distance)))
    return ExponentialGrowthFit(radii=radii, sites=chosen, magnitudes=magnitudes, c1=c1, c2=float(c2))
