"""Inequality checks tying resolvent behavior to decay, growth and transport.

Every check computes the finite-box quantities exactly (up to solver
tolerance) and reports them next to the bound they are compared with.
Printed forms that drop boundary terms are reported; only the forms that hold
on a finite box are treated as pass/fail.
"""

import logging
import math
from pathlib import Path

import numpy as np

from apps.analysis.models import (
    BorelScalingReport,
    CombesThomasReport,
    ContrastReport,
    ContrastRow,
    EigenvectorResolventReport,
    HerglotzReport,
    ModelConfig,
)
from apps.eigenfunctions.models import LatticeFunction
from apps.eigenfunctions.selectors import combes_thomas_constant, eigen_relation_terms
from apps.hamiltonians.models import SparseHamiltonian
from apps.hamiltonians.selectors import boundary_distance
from apps.hamiltonians.services import assemble
from apps.lattice.selectors import sup_distance
from apps.numerics.models import Eigensystem
from apps.numerics.selectors import spectral_distance
from apps.numerics.services import green_column, green_column_spectral
from apps.shared.exceptions import ConfigurationError, NumericFailure, PreconditionError
from apps.shared.exporters import csv_write, svg_plot
from apps.shared.pool import parallel_map
from apps.shared.validators import validate_finite, validate_int_vector
from apps.transport.models import GrowthWeight
from apps.transport.selectors import fit_transport_exponent
from apps.transport.services import moment_series
from config import settings

logger = logging.getLogger(__name__)


def _positive_grid(values, *, name: str) -> np.ndarray:
    grid = np.atleast_1d(np.asarray(values, dtype=float))
    if grid.size == 0 or np.any(~np.isfinite(grid)) or np.any(grid <= 0):
        raise ConfigurationError(f"{name} must be positive and finite.", {name: grid.tolist()})
    return grid


def combes_thomas_check(
    *,
    hamiltonian: SparseHamiltonian,
    z: complex,
    source,
    max_distance: int | None = None,
    distance_method: str = "auto",
    solve_tol: float | None = None,
) -> CombesThomasReport:
    """|G_z(n0, m)| <= (2/delta) e^{-c delta |n0 - m|} at sites at least INTERIOR_MARGIN from the boundary."""
    z = complex(z)
    source = validate_int_vector(source, name="source", dim=hamiltonian.dim)
    delta = spectral_distance(hamiltonian=hamiltonian, z=z, method=distance_method)
    if delta <= 0:
        raise PreconditionError(f"z={z} lies in the spectrum; Combes-Thomas needs delta > 0.", {"z": str(z)})
    c = combes_thomas_constant(dim=hamiltonian.dim, delta=delta)
    column = green_column(hamiltonian=hamiltonian, z=z, source=source, tol=solve_tol)

    interior = boundary_distance(hamiltonian=hamiltonian) >= settings.INTERIOR_MARGIN
    distance = sup_distance(sites=hamiltonian.sites, origin=source)[interior]
    magnitudes = np.abs(column.values[interior])
    if max_distance is not None:
        keep = distance <= max_distance
        distance, magnitudes = distance[keep], magnitudes[keep]
    if distance.size == 0:
        raise PreconditionError("No interior sites to test; enlarge the box.", {"source": list(source)})
    distances = np.unique(distance)
    maxima = np.zeros(distances.size)
    np.maximum.at(maxima, np.searchsorted(distances, distance), magnitudes)
    thresholds = 2 / delta * np.exp(-c * delta * distances)

    usable = (distances >= 1) & (maxima > 0)
    fitted_rate = math.nan
    if usable.sum() >= 2:
        slope, _ = np.polyfit(distances[usable], np.log(maxima[usable]), 1)
        fitted_rate = float(-slope)
    report = CombesThomasReport(
        z=z,
        source=source,
        delta=delta,
        decay_constant=c,
        distances=distances,
        max_green=maxima,
        thresholds=thresholds,
        fitted_rate=fitted_rate,
    )
    logger.info(
        "Combes-Thomas at z=%s: delta=%.4g, bound rate %.4g, fitted rate %.4g, %d violations",
        z, delta, report.bound_rate, fitted_rate, report.violations.size,
    )
    return report


def _borel_remainder(
    *, hamiltonian: SparseHamiltonian, evaluator: LatticeFunction, energy: float, column, radius: int, site
) -> float:
    """|psi(n) - (E - z)[G chi psi](n)| split off exactly on the finite box."""
    box = hamiltonian.box
    offset = max(abs(a - b) for a, b in zip(site, box.center, strict=True))
    if offset + radius + 1 <= box.radius:
        _, far = eigen_relation_terms(
            hamiltonian=hamiltonian, evaluator=evaluator, energy=energy,
            radius=radius, column=column, center=site,
        )
        return abs(far)
    if radius >= offset + box.radius:
        # The window covers the box: the remainder is G applied to the box residual (H - E) psi.
        psi = evaluator(hamiltonian.sites)
        residual = hamiltonian.matvec(psi) - energy * psi
        return abs(complex(np.dot(column.values, residual)))
    raise PreconditionError(
        f"Lambda_{radius}({site}) neither fits inside nor covers the working box.",
        {"radius": radius, "site": list(site), "box_radius": box.radius},
    )


def borel_scaling_check(
    *,
    hamiltonian: SparseHamiltonian,
    evaluator: LatticeFunction,
    energy: float,
    site,
    gammas,
    alphas,
    epsilons,
    solve_tol: float | None = None,
    threads: int | None = None,
) -> BorelScalingReport:
    """Product inequality with L = floor(eps^-alpha) for every (gamma, alpha, eps)."""
    site = validate_int_vector(site, name="site", dim=hamiltonian.dim)
    energy = validate_finite(energy, name="energy")
    gammas = np.atleast_1d(np.asarray(gammas, dtype=float))
    alphas = _positive_grid(alphas, name="alphas")
    epsilons = _positive_grid(epsilons, name="epsilons")
    psi_at_site = abs(complex(evaluator(np.asarray([site]))[0]))
    if psi_at_site == 0:
        raise PreconditionError(f"psi vanishes at {site}.", {"site": list(site)})

    psi = evaluator(hamiltonian.sites)
    distance = sup_distance(sites=hamiltonian.sites, origin=site)
    index = hamiltonian.index_of(site)
    radii = np.array([[math.floor(eps**-alpha * (1 + 1e-12)) for eps in epsilons] for alpha in alphas])

    def per_epsilon(position: int):
        eps = epsilons[position]
        column = green_column(hamiltonian=hamiltonian, z=complex(energy, eps), source=site, tol=solve_tol)
        sums, remainders = [], []
        for radius in radii[:, position]:
            radius = int(radius)
            sums.append(float(np.sum(np.abs(psi[distance <= radius]) ** 2)))
            remainders.append(
                _borel_remainder(
                    hamiltonian=hamiltonian, evaluator=evaluator, energy=energy,
                    column=column, radius=radius, site=site,
                )
            )
        return float(column.values[index].imag), sums, remainders

    results = parallel_map(per_epsilon, range(epsilons.size), threads=threads)
    imag_green = np.array([r[0] for r in results])
    if np.any(imag_green <= 0):
        raise NumericFailure(
            "Im G(n, n) is not positive; the resolvent solve is unreliable.",
            {"epsilons": epsilons[imag_green <= 0].tolist()},
        )
    box_sums = np.array([r[1] for r in results]).T
    remainders = np.array([r[2] for r in results]).T
    return BorelScalingReport(
        site=site,
        energy=energy,
        psi_at_site=psi_at_site,
        gammas=gammas,
        alphas=alphas,
        epsilons=epsilons,
        imag_green=imag_green,
        radii=radii,
        box_sums=box_sums,
        remainders=remainders,
    )


def herglotz_check(
    *,
    hamiltonian: SparseHamiltonian,
    site,
    energy: float,
    epsilons,
    solve_tol: float | None = None,
) -> HerglotzReport:
    site = validate_int_vector(site, name="site", dim=hamiltonian.dim)
    energy = validate_finite(energy, name="energy")
    epsilons = _positive_grid(epsilons, name="epsilons")
    index = hamiltonian.index_of(site)
    imag_green = np.array([
        green_column(hamiltonian=hamiltonian, z=complex(energy, eps), source=site, tol=solve_tol)
        .values[index]
        .imag
        for eps in epsilons
    ])
    if np.any(imag_green <= 0):
        raise NumericFailure(
            f"Im G({site}, {site}) is not positive at E={energy:g}.",
            {"epsilons": epsilons[imag_green <= 0].tolist()},
        )
    # Im G decreases in eps once eps exceeds every |lambda - E|.
    monotone_from = hamiltonian.norm_bound + abs(energy)
    report = HerglotzReport(
        site=site, energy=energy, epsilons=epsilons, imag_green=imag_green, monotone_from=monotone_from
    )
    if report.monotonicity_flags.size:
        logger.info("Im G rises with eps at %s", report.monotonicity_flags.tolist())
    return report


def eigenvector_resolvent_check(
    *,
    eigensystem: Eigensystem,
    index: int,
    base_site,
    epsilons,
    weight: GrowthWeight | None = None,
) -> EigenvectorResolventReport:
    """eps^2 |G(n0, .)|^2 >= |v(n0)|^2 and eps sum phi |G|^2 >= C' / eps at z = lambda_j + i eps.

    C' = |v(n0)|^2 / sum_n |v(n)|^2 / phi(n).
    """
    hamiltonian = eigensystem.hamiltonian
    base = validate_int_vector(base_site, name="base_site", dim=hamiltonian.dim)
    epsilons = _positive_grid(epsilons, name="epsilons")
    weight = weight or GrowthWeight.power(q=2.0, base=base)
    eigenvalue = float(eigensystem.eigenvalues[index])
    vector = eigensystem.eigenvectors[:, index]
    psi_at_base = abs(float(vector[hamiltonian.index_of(base)]))
    phi = weight.values(hamiltonian.sites)
    if np.any(phi <= 0):
        raise ConfigurationError("The weight must be positive on the box.", {"weight": weight.label()})
    constant = psi_at_base**2 / float(np.sum(vector**2 / phi))

    norms, weighted = [], []
    for eps in epsilons:
        column = green_column_spectral(eigensystem=eigensystem, z=complex(eigenvalue, eps), source=base)
        magnitudes = np.abs(column) ** 2
        norms.append(eps**2 * float(magnitudes.sum()))
        weighted.append(eps * float(np.dot(phi, magnitudes)))
    return EigenvectorResolventReport(
        eigenvalue=eigenvalue,
        base_site=base,
        psi_at_base=psi_at_base,
        epsilons=epsilons,
        resolvent_norms=np.array(norms),
        weighted=np.array(weighted),
        weighted_bounds=constant / epsilons,
    )


def localization_contrast_report(
    *,
    models: list[ModelConfig],
    q: float,
    times,
    realizations: int,
    route: str = "abel",
    time_tol: float | None = None,
    containment: str | None = None,
    threads: int | None = None,
) -> ContrastReport:
    """Fitted moment exponents per model and realization, each from the box center."""
    if realizations < 1:
        raise ConfigurationError("At least one realization is required.", {"realizations": realizations})
    times = _positive_grid(times, name="times")
    work = [(model, realization) for model in models for realization in range(realizations)]

    def fit(item):
        model, realization = item
        hamiltonian = assemble(box=model.box, spec=model.spec.with_realization(realization))
        series = moment_series(
            hamiltonian=hamiltonian,
            weight=GrowthWeight.power(q=q, base=model.box.center),
            base_site=model.box.center,
            times=times,
            route=route,
            time_tol=time_tol,
            containment=containment,
        )
        result = fit_transport_exponent(series=series)
        logger.info("%s realization %d: slope %.3f", model.label, realization, result.slope)
        return ContrastRow(
            label=model.label,
            realization=realization,
            slope=result.slope,
            intercept=result.intercept,
            fit_residual=result.fit_residual,
        )

    rows = parallel_map(fit, work, threads=threads)
    return ContrastReport(q=q, times=times, rows=rows)


def combes_thomas_export(*, report: CombesThomasReport, directory: Path) -> list[Path]:
    directory = Path(directory)
    csv_path = csv_write(
        directory / "combes_thomas.csv",
        header=("distance", "max_abs_green", "threshold"),
        rows=report.rows(),
    )
    svg_path = svg_plot(
        directory / "combes_thomas.svg",
        series=[
            ("max |G(n0, m)|", report.distances, report.max_green),
            ("(2/delta) exp(-c delta r)", report.distances, report.thresholds),
        ],
        xlabel="sup-distance r",
        ylabel="|G|",
        title=f"z = {report.z:.4g}, delta = {report.delta:.4g}",
        logy=True,
        styles=["o", "-"],
    )
    return [csv_path, svg_path]


def borel_scaling_export(*, report: BorelScalingReport, directory: Path) -> list[Path]:
    directory = Path(directory)
    csv_path = csv_write(
        directory / "borel_scaling.csv",
        header=(
            "gamma", "alpha", "eps", "L", "lhs", "rhs", "margin", "remainder",
            "printed_holds", "corrected_holds",
        ),
        rows=report.rows(),
    )
    series = []
    for gi, gamma in enumerate(report.gammas):
        series.append((f"lhs gamma={gamma:g}", report.epsilons, report.lhs[gi]))
        for ai, alpha in enumerate(report.alphas):
            series.append((f"rhs gamma={gamma:g} alpha={alpha:g}", report.epsilons, report.rhs[gi, ai]))
    svg_path = svg_plot(
        directory / "borel_scaling.svg",
        series=series,
        xlabel="eps",
        ylabel="factor",
        title=f"E = {report.energy:g}, n = {report.site}",
        logx=True,
        logy=True,
    )
    return [csv_path, svg_path]


def contrast_export(*, report: ContrastReport, directory: Path) -> list[Path]:
    directory = Path(directory)
    csv_path = csv_write(
        directory / "contrast.csv",
        header=("model", "realization", "slope", "intercept", "fit_residual"),
        rows=(
            (row.label, row.realization, row.slope, row.intercept, row.fit_residual)
            for row in report.rows
        ),
    )
    return [csv_path]
