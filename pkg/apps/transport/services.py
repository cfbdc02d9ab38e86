"""Transport moments by time averaging, by the resolvent identity and by eigen-decomposition.

The Abel and Cesaro routes sample f(t) = <psi_t, phi psi_t> along one
Chebyshev trajectory and integrate with Romberg panels. The resolvent route
integrates eps * sum phi |G_{E+i eps}|^2 / pi over the real line with
Gauss-Legendre panels, mapping the two tails to finite intervals.
"""

import logging
import math
import time

import numpy as np
from numpy.polynomial import legendre
from scipy import integrate

from apps.eigenfunctions.models import GrowthProfile, LatticeFunction
from apps.eigenfunctions.selectors import eigen_relation_terms, growth_profile
from apps.hamiltonians.models import PotentialSpec, SparseHamiltonian
from apps.hamiltonians.selectors import spectrum_window
from apps.hamiltonians.services import assemble
from apps.lattice.models import LatticeBox
from apps.lattice.selectors import sup_distance
from apps.numerics.models import Eigensystem
from apps.numerics.selectors import boundary_mass
from apps.numerics.services import basis_state, dense_eig, evolve, evolve_steps, green_column
from apps.shared.exceptions import (
    ConfigurationError,
    ContainmentError,
    NumericFailure,
    ResourceCapExceeded,
)
from apps.shared.exporters import csv_write
from apps.shared.pool import parallel_map
from apps.shared.validators import validate_finite, validate_int_vector, validate_positive_int, validate_tolerance
from apps.transport.models import (
    ComparisonReport,
    ContainmentPolicy,
    GrowthWeight,
    MomentEstimate,
    MomentRoute,
    MomentSeries,
    ResolventBoundReport,
)
from config import settings

logger = logging.getLogger(__name__)

# Geometric panel levels added below the coarsest scale of each mapped energy tail.
TAIL_REFINEMENT = 12

SERIES_HEADER = ("T", "value", "err", "route")


def _time_grid(times) -> np.ndarray:
    grid = np.atleast_1d(np.asarray(times, dtype=float))
    if grid.size == 0 or np.any(~np.isfinite(grid)) or np.any(grid <= 0):
        raise ConfigurationError("T values must be positive and finite.", {"times": grid.tolist()})
    if np.any(np.diff(grid) <= 0):
        raise ConfigurationError("T grid must be strictly ascending.", {"times": grid.tolist()})
    return grid


def _observable(phi: np.ndarray, amplitudes: np.ndarray) -> float:
    return float(np.dot(phi, np.abs(amplitudes) ** 2))


def _min_safe_radius(*, hamiltonian: SparseHamiltonian, base, horizon: float, elapsed: float | None = None) -> int:
    """Box radius keeping the wavefront off the boundary band up to ``horizon``.

    With ``elapsed`` set, the front speed is measured as the distance from the
    base site to the boundary band over the time the band took to cross the
    tolerance. The worst-case speed 2d bounds the estimate from above.
    """
    box = hamiltonian.box
    margin = settings.CONTAINMENT_MARGIN
    offset = max(abs(a - b) for a, b in zip(base, box.center, strict=True))
    worst = math.ceil(2 * box.dim * horizon) + margin + offset
    if elapsed is None or elapsed <= 0:
        return worst
    reach = max(box.radius - margin + 1 - offset, 1)
    measured = math.ceil(reach / elapsed * horizon) + margin + offset
    return max(box.radius + 1, min(measured, worst))



def _time_averages(
    *,
    hamiltonian: SparseHamiltonian,
    weight: GrowthWeight,
    base_site,
    times,
    kinds: tuple[MomentRoute, ...],
    time_tol: float | None = None,
    containment: str | None = None,
) -> dict[MomentRoute, list[MomentEstimate]]:
    """Abel and Cesaro averages for every T on one shared trajectory."""
    tol = validate_tolerance(settings.PROPAGATION_TOL if time_tol is None else time_tol, name="time_tol")
    grid = _time_grid(times)
    base = validate_int_vector(base_site, name="base_site", dim=hamiltonian.dim)
    policy = ContainmentPolicy(containment or settings.CONTAINMENT_POLICY)
    if hamiltonian.restricted:
        policy = ContainmentPolicy.OFF

    phi = weight.values(hamiltonian.sites)
    phi_max = float(phi.max(initial=0.0))
    lo, hi = spectrum_window(hamiltonian=hamiltonian)
    half_width = (hi - lo) / 2 * (1 + settings.CHEBYSHEV_SPECTRAL_MARGIN)
    # Differences of eigenvalues stay below 2 * half_width; keep them under a quarter turn per step.
    step = min(settings.TIME_STEP, math.pi / (4 * half_width))
    panel = 2**settings.ROMBERG_LEVEL
    panel_length = panel * step

    abel_panels = {
        T: max(1, math.ceil(T * math.log(1 / tol) / panel_length)) for T in grid
    }
    cesaro_panels = {T: int(math.floor(T / panel_length)) for T in grid}
    total_panels = 0
    if MomentRoute.ABEL in kinds:
        total_panels = max(total_panels, *abel_panels.values())
    if MomentRoute.CESARO in kinds:
        total_panels = max(total_panels, *cesaro_panels.values())
    steps = total_panels * panel
    horizon = steps * step
    propagation_tol = tol / 10

    remainders_at: dict[int, list[float]] = {}
    if MomentRoute.CESARO in kinds:
        for T in grid:
            remainders_at.setdefault(cesaro_panels[T] * panel, []).append(T)
    remainder_integrals: dict[float, float] = {}

    logger.info(
        "time averages: %d T values, step %.4g, horizon %.4g, %d sites",
        grid.size, step, horizon, hamiltonian.size,
    )
    samples = np.empty(steps + 1)
    violation = None
    worst_mass = 0.0
    started = time.monotonic()
    initial = basis_state(hamiltonian=hamiltonian, site=base)
    trajectory = evolve_steps(
        hamiltonian=hamiltonian, state=initial, dt=step, steps=steps, tol=propagation_tol
    )
    for index, state in enumerate(trajectory):
        t = index * step
        samples[index] = _observable(phi, state.amplitudes)
        if policy is not ContainmentPolicy.OFF:
            mass = boundary_mass(hamiltonian=hamiltonian, state=state)
            worst_mass = max(worst_mass, mass)
            if mass > tol and violation is None:
                violation = {
                    "t": t,
                    "mass": mass,
                    "horizon": horizon,
                    "min_safe_L": _min_safe_radius(
                        hamiltonian=hamiltonian, base=base, horizon=horizon, elapsed=t
                    ),
                }
                if policy is ContainmentPolicy.ERROR:
                    raise ContainmentError(
                        f"Boundary mass {mass:.3g} exceeds {tol:g} at t={t:g}; "
                        f"use a box of radius at least {violation['min_safe_L']}.",
                        violation,
                    )
                logger.warning("containment violated at t=%g (mass %.3g)", t, mass)
        for T in remainders_at.get(index, ()):
            remainder_integrals[T] = _remainder_integral(
                hamiltonian=hamiltonian, state=state, phi=phi, start=t, end=T,
                half_width=half_width, tol=propagation_tol,
            )
        if index % panel == 0 and time.monotonic() - started > settings.MAX_WALL_SECONDS:
            raise ResourceCapExceeded(
                f"Time averaging exceeded {settings.MAX_WALL_SECONDS:g} s at t={t:g}.",
                {"t": t, "horizon": horizon},
            )

    def panel_integrals(values: np.ndarray, count: int) -> tuple[float, float]:
        if count == 0:
            return 0.0, 0.0
        rows = np.arange(count)[:, None] * panel + np.arange(panel + 1)[None, :]
        stacked = values[rows]
        fine = integrate.romb(stacked, dx=step, axis=-1)
        coarse = integrate.romb(stacked[:, ::2], dx=2 * step, axis=-1)
        return float(fine.sum()), float(np.abs(fine - coarse).sum())

    propagation_error = 3 * phi_max * propagation_tol
    sample_times = np.arange(steps + 1) * step
    results: dict[MomentRoute, list[MomentEstimate]] = {}
    metadata = {
        "time_step": step,
        "panel_steps": panel,
        "containment": policy.value,
        "boundary_mass_max": worst_mass,
    }
    if violation is not None:
        metadata["containment_violation"] = violation
    if MomentRoute.ABEL in kinds:
        results[MomentRoute.ABEL] = []
        for T in grid:
            count = abel_panels[T]
            damped = np.exp(-sample_times / T) * samples / T
            value, quadrature_error = panel_integrals(damped, count)
            end = count * panel_length
            tail = phi_max * math.exp(-end / T)
            results[MomentRoute.ABEL].append(
                MomentEstimate(
                    value=value,
                    error=quadrature_error + tail + propagation_error,
                    route=MomentRoute.ABEL,
                    metadata={
                        **metadata, "T": float(T), "horizon": end,
                        "quadrature_error": quadrature_error, "tail_bound": tail,
                    },
                )
            )
    if MomentRoute.CESARO in kinds:
        results[MomentRoute.CESARO] = []
        for T in grid:
            count = cesaro_panels[T]
            value, quadrature_error = panel_integrals(samples, count)
            value = (value + remainder_integrals[T]) / T
            quadrature_error /= T
            results[MomentRoute.CESARO].append(
                MomentEstimate(
                    value=value,
                    error=quadrature_error + propagation_error,
                    route=MomentRoute.CESARO,
                    metadata={**metadata, "T": float(T), "horizon": float(T), "quadrature_error": quadrature_error},
                )
            )
    return results


def _remainder_integral(
    *, hamiltonian, state, phi, start: float, end: float, half_width: float, tol: float
) -> float:
    """Integral of f over [start, end] with a Gauss rule resolving every frequency below 2 * half_width."""
    length = end - start
    if length <= 1e-12 * max(end, 1.0):
        return 0.0
    order = math.ceil(half_width * length) + 12
    nodes, weights = legendre.leggauss(order)
    offsets = (nodes + 1) * length / 2
    values = np.empty(order)
    current, elapsed = state, 0.0
    for i, offset in enumerate(offsets):
        current = evolve(hamiltonian=hamiltonian, state=current, t=offset - elapsed, tol=tol / order)
        elapsed = offset
        values[i] = _observable(phi, current.amplitudes)
    return float(np.dot(weights, values) * length / 2)


def abel_moment(
    *,
    hamiltonian: SparseHamiltonian,
    weight: GrowthWeight,
    base_site,
    T: float,
    time_tol: float | None = None,
    containment: str | None = None,
) -> MomentEstimate:
    """(1/T) int_0^inf e^{-t/T} <delta_k, e^{iHt} phi e^{-iHt} delta_k> dt."""
    averages = _time_averages(
        hamiltonian=hamiltonian, weight=weight, base_site=base_site, times=[T],
        kinds=(MomentRoute.ABEL,), time_tol=time_tol, containment=containment,
    )
    return averages[MomentRoute.ABEL][0]


def cesaro_moment(
    *,
    hamiltonian: SparseHamiltonian,
    weight: GrowthWeight,
    base_site,
    T: float,
    time_tol: float | None = None,
    containment: str | None = None,
) -> MomentEstimate:
    """(1/T) int_0^T <delta_k, e^{iHt} phi e^{-iHt} delta_k> dt."""
    averages = _time_averages(
        hamiltonian=hamiltonian, weight=weight, base_site=base_site, times=[T],
        kinds=(MomentRoute.CESARO,), time_tol=time_tol, containment=containment,
    )
    return averages[MomentRoute.CESARO][0]


def _gauss_panels(edges: np.ndarray, x: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mids, halves = (edges[1:] + edges[:-1]) / 2, np.diff(edges) / 2
    return (
        (mids[:, None] + halves[:, None] * x[None, :]).ravel(),
        (halves[:, None] * w[None, :]).ravel(),
    )


def _energy_rule(*, lo: float, hi: float, eps: float, pad: float, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights over the whole real line for integrands with resonance width eps.

    [lo, hi] is covered by panels of width eps / ENERGY_PANELS_PER_WIDTH. Each
    tail beyond the window is mapped by E = edge +- pad (1/v - 1) onto v in (0, 1],
    with panels graded geometrically towards v = 0.
    """
    x, w = legendre.leggauss(order)
    count = max(1, math.ceil((hi - lo) * settings.ENERGY_PANELS_PER_WIDTH / eps))
    central_nodes, central_weights = _gauss_panels(np.linspace(lo, hi, count + 1), x, w)

    levels = math.ceil(math.log2((hi - lo) / pad + 1)) + TAIL_REFINEMENT
    v_edges = np.concatenate([[0.0], 2.0 ** -np.arange(levels, -1, -1)])
    v, v_weights = _gauss_panels(v_edges, x, w)
    tail_offsets = pad / v - pad
    tail_weights = v_weights * pad / v**2

    nodes = np.concatenate([lo - tail_offsets, central_nodes, hi + tail_offsets])
    weights = np.concatenate([tail_weights, central_weights, tail_weights])
    return nodes, weights


def moment_via_resolvent(
    *,
    hamiltonian: SparseHamiltonian,
    weight: GrowthWeight,
    base_site,
    T: float,
    solve_tol: float | None = None,
    threads: int | None = None,
) -> MomentEstimate:
    """(1/2 pi T) int sum_n phi(n) |G_{E + i/(2T)}(n, n0)|^2 dE.

    The error estimate compares the panel rule of order p with order p/2 and
    adds the propagated solver residuals.
    """
    T = validate_finite(T, name="T")
    if T <= 0:
        raise ConfigurationError("T must be positive.", {"T": T})
    base = validate_int_vector(base_site, name="base_site", dim=hamiltonian.dim)
    eps = 1 / (2 * T)
    phi = weight.values(hamiltonian.sites)
    phi_max = float(phi.max(initial=0.0))
    lo, hi = spectrum_window(hamiltonian=hamiltonian)
    pad = settings.ENERGY_WINDOW_PADDING * eps
    order = settings.ENERGY_PANEL_ORDER
    rules = [
        _energy_rule(lo=lo - pad, hi=hi + pad, eps=eps, pad=pad, order=order),
        _energy_rule(lo=lo - pad, hi=hi + pad, eps=eps, pad=pad, order=max(order // 2, 1)),
    ]
    nodes = np.concatenate([rule[0] for rule in rules])

    def integrand(energy: float) -> tuple[float, float]:
        try:
            column = green_column(
                hamiltonian=hamiltonian, z=complex(energy, eps), source=base, tol=solve_tol
            )
        except NumericFailure as exc:
            raise NumericFailure(
                f"Energy quadrature failed at E={energy:.6g}: {exc.message}",
                {**exc.extra, "energy": float(energy)},
            ) from exc
        values = np.abs(column.values) ** 2
        solve_error = phi_max * (2 * column.residual_norm / eps**2 + (column.residual_norm / eps) ** 2)
        return float(np.dot(phi, values)), solve_error

    logger.info("resolvent route: T=%g, eps=%.4g, %d energy nodes", T, eps, nodes.size)
    evaluated = parallel_map(integrand, nodes, threads=threads)
    samples = np.array([value for value, _ in evaluated])
    solve_errors = np.array([error for _, error in evaluated])

    split = rules[0][0].size
    fine = eps / math.pi * float(np.dot(rules[0][1], samples[:split]))
    coarse = eps / math.pi * float(np.dot(rules[1][1], samples[split:]))
    solve_error = eps / math.pi * float(np.dot(np.abs(rules[0][1]), solve_errors[:split]))
    # Lorentzian bound on the part of ``fine`` coming from outside the padded window.
    tail_bound = 2 * phi_max / math.pi * (math.pi / 2 - math.atan(pad / eps))
    return MomentEstimate(
        value=fine,
        error=abs(fine - coarse) + solve_error,
        route=MomentRoute.RESOLVENT,
        metadata={
            "T": T,
            "eps": eps,
            "window": (lo - pad, hi + pad),
            "nodes": int(split),
            "quadrature_error": abs(fine - coarse),
            "solve_error": solve_error,
            "tail_bound": tail_bound,
        },
    )


def _weighted_overlaps(*, eigensystem: Eigensystem, weight: GrowthWeight, base) -> np.ndarray:
    """C_jl = c_j c_l <v_j, phi v_l> with c = the eigenvector components at the base site."""
    hamiltonian = eigensystem.hamiltonian
    vectors = eigensystem.eigenvectors
    c = vectors[hamiltonian.index_of(base)]
    phi = weight.values(hamiltonian.sites)
    overlaps = vectors.T @ (phi[:, None] * vectors)
    return c[:, None] * overlaps * c[None, :]


def _spectral_average(
    *, coefficients: np.ndarray, eigenvalues: np.ndarray, T: float, kind: MomentRoute
) -> float:
    omega = eigenvalues[:, None] - eigenvalues[None, :]
    if kind is MomentRoute.ABEL:
        kernel = 1 / (1 + (omega * T) ** 2)
    elif kind is MomentRoute.CESARO:
        kernel = np.sinc(omega * T / math.pi)
    else:
        raise ConfigurationError(f"Spectral averages are abel or cesaro, not {kind.value}.")
    return float(np.sum(coefficients * kernel))


def moment_via_spectrum(
    *,
    eigensystem: Eigensystem,
    weight: GrowthWeight,
    base_site,
    T: float,
    kind: MomentRoute = MomentRoute.ABEL,
) -> MomentEstimate:
    """Exact Abel or Cesaro average from the eigen-decomposition of a dense-capable box.

    Only the real parts of the kernels 1/(1 + i w T) and (1 - e^{-i w T})/(i w T)
    survive the symmetric sum over eigenvalue pairs.
    """
    base = validate_int_vector(base_site, name="base_site", dim=eigensystem.hamiltonian.dim)
    kind = MomentRoute(kind)
    coefficients = _weighted_overlaps(eigensystem=eigensystem, weight=weight, base=base)
    value = _spectral_average(
        coefficients=coefficients, eigenvalues=eigensystem.eigenvalues, T=T, kind=kind
    )
    error = 10 * eigensystem.max_residual * float(np.abs(coefficients).sum())
    return MomentEstimate(
        value=value, error=error, route=MomentRoute.SPECTRAL, metadata={"T": float(T), "kind": kind.value}
    )


def moment_series(
    *,
    hamiltonian: SparseHamiltonian,
    weight: GrowthWeight,
    base_site,
    times,
    route: MomentRoute | str = MomentRoute.ABEL,
    time_tol: float | None = None,
    solve_tol: float | None = None,
    containment: str | None = None,
    threads: int | None = None,
    kind: MomentRoute | str = MomentRoute.ABEL,
) -> MomentSeries:
    """Moments over a whole T grid.

    ``kind`` picks the average computed by the spectral route.
    """
    route = MomentRoute(route)
    grid = _time_grid(times)
    base = validate_int_vector(base_site, name="base_site", dim=hamiltonian.dim)
    if route in (MomentRoute.ABEL, MomentRoute.CESARO):
        estimates = _time_averages(
            hamiltonian=hamiltonian, weight=weight, base_site=base, times=grid,
            kinds=(route,), time_tol=time_tol, containment=containment,
        )[route]
    elif route is MomentRoute.RESOLVENT:
        estimates = [
            moment_via_resolvent(
                hamiltonian=hamiltonian, weight=weight, base_site=base, T=T,
                solve_tol=solve_tol, threads=threads,
            )
            for T in grid
        ]
    else:
        kind = MomentRoute(kind)
        eigensystem = dense_eig(hamiltonian=hamiltonian)
        coefficients = _weighted_overlaps(eigensystem=eigensystem, weight=weight, base=base)
        error = 10 * eigensystem.max_residual * float(np.abs(coefficients).sum())
        estimates = [
            MomentEstimate(
                value=_spectral_average(
                    coefficients=coefficients, eigenvalues=eigensystem.eigenvalues, T=T, kind=kind
                ),
                error=error,
                route=MomentRoute.SPECTRAL,
                metadata={"T": float(T), "kind": kind.value},
            )
            for T in grid
        ]
    return MomentSeries(
        base_site=base,
        weight=weight,
        times=grid,
        values=np.array([e.value for e in estimates]),
        errors=np.array([e.error for e in estimates]),
        route=route,
        metadata={
            "weight": weight.label(),
            "sites": hamiltonian.size,
            "points": [e.metadata for e in estimates],
        },
    )


def contained_moment_series(
    *,
    box: LatticeBox,
    spec: PotentialSpec,
    weight: GrowthWeight,
    base_site,
    times,
    route: MomentRoute | str = MomentRoute.CESARO,
    time_tol: float | None = None,
    max_attempts: int = 8,
) -> MomentSeries:
    """Time-averaged moments on the smallest tried box that keeps the wavefront contained.

    Starts from ``box`` and regrows around the same center after every
    containment failure, to the reported safe radius but by at least a quarter
    and at most double the current radius. Growing a box keeps the potential
    already sampled on it. assemble enforces MAX_SITES.
    """
    route = MomentRoute(route)
    if route not in (MomentRoute.ABEL, MomentRoute.CESARO):
        raise ConfigurationError(
            f"Contained series are abel or cesaro averages, not {route.value}.", {"route": route.value}
        )
    max_attempts = validate_positive_int(max_attempts, name="max_attempts")
    attempts = []
    for _ in range(max_attempts):
        hamiltonian = assemble(box=box, spec=spec)
        try:
            series = moment_series(
                hamiltonian=hamiltonian, weight=weight, base_site=base_site, times=times,
                route=route, time_tol=time_tol, containment=ContainmentPolicy.ERROR.value,
            )
        except ContainmentError as exc:
            attempts.append({"radius": box.radius, "t": exc.extra["t"], "min_safe_L": exc.extra["min_safe_L"]})
            target = min(max(exc.extra["min_safe_L"], math.ceil(1.25 * box.radius)), 2 * box.radius)
            target = max(target, box.radius + 1)
            logger.info(
                "radius %d not contained (t=%.4g); growing to %d", box.radius, exc.extra["t"], target
            )
            box = box.grown(target - box.radius)
            continue
        series.metadata["radius"] = box.radius
        series.metadata["attempts"] = attempts
        return series
    raise ResourceCapExceeded(
        f"No contained box after {max_attempts} attempts; last tried radius {attempts[-1]['radius']}.",
        {"radius": attempts[-1]["radius"], "attempts": attempts},
    )


def abel_cesaro_comparison(
    *,
    hamiltonian: SparseHamiltonian,
    weight: GrowthWeight,
    base_site,
    times,
    time_tol: float | None = None,
    containment: str | None = None,
) -> ComparisonReport:
    averages = _time_averages(
        hamiltonian=hamiltonian, weight=weight, base_site=base_site, times=times,
        kinds=(MomentRoute.ABEL, MomentRoute.CESARO), time_tol=time_tol, containment=containment,
    )
    abel, cesaro = averages[MomentRoute.ABEL], averages[MomentRoute.CESARO]
    report = ComparisonReport(
        times=_time_grid(times),
        abel=np.array([e.value for e in abel]),
        cesaro=np.array([e.value for e in cesaro]),
        abel_errors=np.array([e.error for e in abel]),
        cesaro_errors=np.array([e.error for e in cesaro]),
    )
    if not report.holds:
        logger.warning("Cesaro average exceeds e times the Abel average somewhere on the grid")
    violations = report.printed_form_violations
    if violations.size:
        logger.info("M <= Abel/e fails at %d of %d T values", violations.size, report.times.size)
    return report


def resolvent_lower_bound_check(
    *,
    hamiltonian: SparseHamiltonian,
    evaluator: LatticeFunction,
    energy: float,
    weight: GrowthWeight,
    base_site,
    epsilons,
    alpha: float | None = None,
    profile: GrowthProfile | None = None,
    solve_tol: float | None = None,
    threads: int | None = None,
) -> ResolventBoundReport:
    """eps * sum phi |G_{E+i eps}(n0, .)|^2 against the printed and remainder-corrected lower bounds.

    L = floor(eps^-alpha); the box Lambda_{L+1}(n0) must fit in the working box.
    """
    alpha = settings.CERTIFICATE_ALPHA if alpha is None else validate_finite(alpha, name="alpha")
    if alpha <= 1:
        raise ConfigurationError("The certificate exponent alpha must exceed 1.", {"alpha": alpha})
    base = validate_int_vector(base_site, name="base_site", dim=hamiltonian.dim)
    energy = validate_finite(energy, name="energy")
    epsilons = np.asarray(epsilons, dtype=float)
    if epsilons.size == 0 or np.any(epsilons <= 0):
        raise ConfigurationError("epsilons must be positive.", {"epsilons": epsilons.tolist()})
    radii = np.array([math.floor(eps**-alpha * (1 + 1e-12)) for eps in epsilons])
    if profile is None:
        profile = growth_profile(
            evaluator=evaluator, weight=weight, base_site=base, max_radius=max(int(radii.max()), 2)
        )
    psi_at_base = abs(complex(evaluator(np.asarray([base]))[0]))
    psi = evaluator(hamiltonian.sites)
    phi = weight.values(hamiltonian.sites)
    distance = sup_distance(sites=hamiltonian.sites, origin=base)

    def terms(item):
        eps, radius = item
        column = green_column(hamiltonian=hamiltonian, z=complex(energy, eps), source=base, tol=solve_tol)
        near, far = eigen_relation_terms(
            hamiltonian=hamiltonian, evaluator=evaluator, energy=energy,
            radius=int(radius), column=column, center=base,
        )
        inside = distance <= radius
        if np.any(phi[inside] <= 0):
            raise ConfigurationError("The weight must be positive on Lambda_L.", {"radius": int(radius)})
        box_sum = float(np.sum(np.abs(psi[inside]) ** 2 / phi[inside]))
        measured = eps * float(np.dot(phi, np.abs(column.values) ** 2))
        return abs(near), abs(far), measured, box_sum

    logger.info("resolvent lower bound at E=%g for %d values of eps", energy, epsilons.size)
    rows = np.array(parallel_map(terms, list(zip(epsilons, radii, strict=True)), threads=threads))
    near, far, measured, box_sums = rows.T
    printed = epsilons ** (alpha * profile.nu - 1) * psi_at_base**2 / (4 * profile.amplitude)
    corrected = np.clip(psi_at_base - far, 0.0, None) ** 2 / (epsilons * box_sums)
    return ResolventBoundReport(
        energy=energy,
        base_site=base,
        alpha=alpha,
        nu=profile.nu,
        amplitude=profile.amplitude,
        psi_at_base=psi_at_base,
        epsilons=epsilons,
        radii=radii,
        near_terms=near,
        remainder_terms=far,
        measured=measured,
        printed_bound=printed,
        corrected_bound=corrected,
        box_weighted_sums=box_sums,
    )


def moment_series_export(*, series: MomentSeries, path):
    return csv_write(path, header=SERIES_HEADER, rows=series.rows())
