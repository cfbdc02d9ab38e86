"""Subcommand handlers.

Each view validates the blocks it needs, runs its jobs through the services,
writes CSV (and optionally SVG) artifacts into the run directory and returns
a JSON-ready summary for the manifest.
"""

import logging

import numpy as np

from apps.analysis.models import ModelConfig
from apps.analysis.services import (
    borel_scaling_check,
    borel_scaling_export,
    combes_thomas_check,
    combes_thomas_export,
    contrast_export,
    localization_contrast_report,
)
from apps.cli.forms import (
    build_base_site,
    build_box,
    build_evaluator,
    build_hamiltonians,
    build_pattern,
    build_realizations,
    build_spec,
    build_times,
    build_weight,
    require_blocks,
)
from apps.cli.models import RunContext
from apps.eigenfunctions.selectors import growth_profile, validate_generalized_eigenfunction
from apps.hamiltonians.selectors import spectrum_window
from apps.hamiltonians.services import assemble
from apps.lattice.selectors import gamma_mask, sup_distance
from apps.numerics.selectors import boundary_mass
from apps.numerics.services import basis_state, dense_eig, evolve, green_column
from apps.shared.exceptions import ConfigurationError
from apps.shared.exporters import csv_write, svg_plot
from apps.shared.pool import parallel_map
from apps.transport.models import MomentRoute
from apps.transport.selectors import MIN_FIT_POINTS, delocalization_certificate, fit_transport_exponent
from apps.transport.services import SERIES_HEADER, contained_moment_series, moment_series
from config import settings

logger = logging.getLogger(__name__)

ALL_ROUTES = (MomentRoute.ABEL, MomentRoute.CESARO, MomentRoute.RESOLVENT)


def _site_columns(dim: int) -> list[str]:
    return [f"n{i + 1}" for i in range(dim)]


def _shell_maxima(values: np.ndarray, distances: np.ndarray) -> np.ndarray:
    maxima = np.zeros(int(distances.max()) + 1)
    np.maximum.at(maxima, distances, values)
    return maxima


class ExperimentView:
    """Base handler: subclasses set the metadata and implement ``handle``."""

    name = ""
    help = ""
    columns = ""
    requires: tuple[str, ...] = ("model",)

    def __init__(self, *, config: dict, context: RunContext):
        self.config = config
        self.context = context

    @property
    def tolerances(self) -> dict:
        return self.config["tolerances"]

    def dispatch(self) -> dict:
        require_blocks(self.config, self.requires)
        logger.info("running %s into %s", self.name, self.context.out_dir)
        return self.handle()

    def handle(self) -> dict:
        raise NotImplementedError

    def base_site(self) -> tuple[int, ...]:
        return build_base_site(self.config["observable"], box=build_box(self.config["model"]))

    def first_hamiltonian(self):
        model = dict(self.config["model"], realizations=1)
        return next(build_hamiltonians(model))[1]

    def plot(self, name: str, **kwargs) -> None:
        if self.context.plots:
            self.context.record(svg_plot(self.context.path(name), **kwargs))


class SpectrumView(ExperimentView):
    name = "spectrum"
    help = "Dense eigenvalues of H on the box, optionally restricted to an energy window."
    columns = (
        "spectrum.csv: realization, index, eigenvalue, err\n"
        "  err is the largest eigenpair residual |H v - lambda v| of the decomposition."
    )

    def handle(self) -> dict:
        window = self.config["spectrum"]["window"]
        rows, summary, curves = [], {}, []
        for realization, hamiltonian in build_hamiltonians(self.config["model"]):
            with self.context.timed(f"spectrum r{realization}"):
                system = dense_eig(hamiltonian=hamiltonian)
            values = system.eigenvalues
            keep = np.ones(values.size, dtype=bool)
            if window is not None:
                keep = (values >= window[0]) & (values <= window[1])
            rows.extend(
                (realization, int(i), float(values[i]), system.max_residual) for i in np.flatnonzero(keep)
            )
            summary[str(realization)] = {
                "eigenvalues": int(keep.sum()),
                "spectrum_window": list(spectrum_window(hamiltonian=hamiltonian)),
                "max_residual": system.max_residual,
                "orthogonality_error": system.orthogonality_error,
            }
            curves.append((f"r{realization}", values, np.arange(1, values.size + 1) / values.size))
        self.context.record(
            csv_write(
                self.context.path("spectrum.csv"),
                header=("realization", "index", "eigenvalue", "err"),
                rows=rows,
            )
        )
        self.plot(
            "spectrum.svg", series=curves, xlabel="E", ylabel="N(E) / |box|", title="integrated density of states"
        )
        return summary


class EvolveView(ExperimentView):
    name = "evolve"
    help = "Snapshots of |psi_t|^2 for the walk started at the base site."
    columns = (
        "evolve.csv: realization, t, n1..nd, probability, err\n"
        "evolve_summary.csv: realization, t, norm, boundary_mass, err\n"
        "  err is the propagation tolerance, an absolute bound on the amplitude error."
    )
    requires = ("model", "evolve")

    def handle(self) -> dict:
        block = self.config["evolve"]
        times = sorted(block["times"])
        tol = self.tolerances["time_tol"] or settings.PROPAGATION_TOL
        base = self.base_site()
        dim = self.config["model"]["dim"]
        rows, summary_rows, curves = [], [], []
        for realization, hamiltonian in build_hamiltonians(self.config["model"]):
            state = basis_state(hamiltonian=hamiltonian, site=base)

            def step(t, hamiltonian=hamiltonian, state=state):
                return evolve(hamiltonian=hamiltonian, state=state, t=t, tol=tol)

            with self.context.timed(f"evolve r{realization}"):
                snapshots = parallel_map(step, times, threads=self.context.threads)
            distances = sup_distance(sites=hamiltonian.sites, origin=base)
            for t, snapshot in zip(times, snapshots, strict=True):
                probabilities = snapshot.probabilities
                for index in np.flatnonzero(probabilities >= block["min_probability"]):
                    site = hamiltonian.sites[index]
                    rows.append((realization, t, *site, float(probabilities[index]), tol))
                mass = boundary_mass(hamiltonian=hamiltonian, state=snapshot)
                summary_rows.append((realization, t, snapshot.norm, mass, tol))
                if realization == self.config["model"]["realization"]:
                    radial = np.bincount(distances, weights=probabilities)
                    curves.append((f"t={t:g}", np.arange(radial.size), radial))
        header = ("realization", "t", *_site_columns(dim), "probability", "err")
        self.context.record(
            csv_write(self.context.path("evolve.csv"), header=header, rows=rows),
            csv_write(
                self.context.path("evolve_summary.csv"),
                header=("realization", "t", "norm", "boundary_mass", "err"),
                rows=summary_rows,
            ),
        )
        self.plot(
            "evolve.svg", series=curves, xlabel="sup-distance r", ylabel="shell probability", logy=True
        )
        return {"snapshots": len(summary_rows), "max_boundary_mass": max(row[3] for row in summary_rows)}


class MomentsView(ExperimentView):
    name = "moments"
    help = "Transport moment series over the T grid by the selected route(s)."
    columns = (
        "moments_<route>.csv: realization, T, value, err, route\n"
        "  route is abel, cesaro, resolvent or spectral; err is the quadrature plus\n"
        "  propagation (time routes) or solver (resolvent route) error estimate."
    )

    def routes(self) -> tuple[MomentRoute, ...]:
        name = self.config["route"]["name"]
        return ALL_ROUTES if name == "all" else (MomentRoute(name),)

    def series(self, *, route: MomentRoute, box, spec, weight, base, times):
        if self.config["model"]["grow"] and route in (MomentRoute.ABEL, MomentRoute.CESARO):
            return contained_moment_series(
                box=box, spec=spec, weight=weight, base_site=base, times=times,
                route=route, time_tol=self.tolerances["time_tol"],
            )
        return moment_series(
            hamiltonian=assemble(box=box, spec=spec),
            weight=weight,
            base_site=base,
            times=times,
            route=route,
            time_tol=self.tolerances["time_tol"],
            solve_tol=self.tolerances["solve_tol"],
            containment=self.tolerances["containment"],
            threads=self.context.threads,
            kind=self.config["route"]["kind"],
        )

    def handle(self) -> dict:
        observable, route_block = self.config["observable"], self.config["route"]
        base = self.base_site()
        weight = build_weight(observable, base=base)
        times = build_times(observable)
        results, curves, by_route = {}, [], {}
        for route in self.routes():
            rows, fits, metadata = [], {}, {}
            for realization, box, spec in build_realizations(self.config["model"]):
                with self.context.timed(f"moments {route.value} r{realization}"):
                    series = self.series(route=route, box=box, spec=spec, weight=weight, base=base, times=times)
                rows.extend((realization, *row) for row in series.rows())
                metadata[str(realization)] = series.metadata
                by_route.setdefault(route, []).append(series)
                curves.append((f"{route.value} r{realization}", series.times, series.values))
                window = route_block["fit_window"]
                if window is not None or series.times.size >= MIN_FIT_POINTS:
                    fit = fit_transport_exponent(series=series, window=tuple(window) if window else None)
                    fits[str(realization)] = {"slope": fit.slope, "fit_residual": fit.fit_residual}
            self.context.record(
                csv_write(
                    self.context.path(f"moments_{route.value}.csv"),
                    header=("realization", *SERIES_HEADER),
                    rows=rows,
                )
            )
            results[route.value] = {"fits": fits, "metadata": metadata}
        if MomentRoute.ABEL in by_route and MomentRoute.RESOLVENT in by_route:
            gaps = [
                float(np.max(np.abs(a.values - r.values) / (a.errors + r.errors + 1e-300)))
                for a, r in zip(by_route[MomentRoute.ABEL], by_route[MomentRoute.RESOLVENT], strict=True)
            ]
            results["abel_resolvent_gap_in_errors"] = max(gaps)
            if max(gaps) > 1:
                logger.warning("Abel and resolvent routes differ by %.2f combined error estimates", max(gaps))
        self.plot("moments.svg", series=curves, xlabel="T", ylabel=weight.label(), logx=True, logy=True)
        return results


class GreenView(ExperimentView):
    name = "green"
    help = "Green's function columns G_{E+i eps}(., n0) at each requested energy."
    columns = (
        "green.csv: realization, E, eps, n1..nd, re, im, err\n"
        "  err is the solver residual |(H - z) g - delta_n0| of the column."
    )
    requires = ("model", "green")

    def handle(self) -> dict:
        block = self.config["green"]
        box = build_box(self.config["model"])
        if block["source"] is None:
            source = self.base_site()
        else:
            source = build_base_site({"base_site": block["source"]}, box=box)
        eps, dim = block["epsilon"], box.dim
        rows, curves, residuals = [], [], {}
        for realization, hamiltonian in build_hamiltonians(self.config["model"]):

            def solve(energy, hamiltonian=hamiltonian):
                return green_column(
                    hamiltonian=hamiltonian, z=complex(energy, eps), source=source,
                    tol=self.tolerances["solve_tol"],
                )

            with self.context.timed(f"green r{realization}"):
                columns = parallel_map(solve, block["energies"], threads=self.context.threads)
            distances = sup_distance(sites=hamiltonian.sites, origin=source)
            for energy, column in zip(block["energies"], columns, strict=True):
                for site, value in zip(hamiltonian.sites, column.values, strict=True):
                    rows.append((realization, energy, eps, *site, value.real, value.imag, column.residual_norm))
                if realization == self.config["model"]["realization"]:
                    maxima = _shell_maxima(np.abs(column.values), distances)
                    curves.append((f"E={energy:g}", np.arange(maxima.size), maxima))
            residuals[str(realization)] = max(column.residual_norm for column in columns)
        header = ("realization", "E", "eps", *_site_columns(dim), "re", "im", "err")
        self.context.record(csv_write(self.context.path("green.csv"), header=header, rows=rows))
        self.plot("green.svg", series=curves, xlabel="sup-distance r", ylabel="max |G|", logy=True)
        return {"max_residual": residuals}


class EigenfunctionView(ExperimentView):
    name = "eigenfun"
    help = "Construct a generalized eigenfunction, validate it on the box and profile its growth."
    columns = (
        "eigenfun_report.csv: quantity, value\n"
        "  residual, gamma_sup, energy, nu, amplitude, raw_slope, fit_residual.\n"
        "eigenfun_profile.csv: L, weighted_sum, box_norm, shell_sum, bound\n"
        "  bound is A L^nu, which dominates weighted_sum at every L."
    )
    requires = ("model", "eigenfunction")

    def handle(self) -> dict:
        model, block = self.config["model"], self.config["eigenfunction"]
        hamiltonian = self.first_hamiltonian()
        base = self.base_site()
        with self.context.timed("eigenfun construct"):
            evaluator = build_evaluator(block, model=model, hamiltonian=hamiltonian, base=base)
            residual = validate_generalized_eigenfunction(
                hamiltonian=hamiltonian, evaluator=evaluator, energy=evaluator.energy
            )
            on_gamma = gamma_mask(pattern=build_pattern(model), sites=hamiltonian.sites)
            psi = evaluator(hamiltonian.sites)
            gamma_sup = float(np.abs(psi[on_gamma]).max(initial=0.0))
        with self.context.timed("eigenfun profile"):
            profile = growth_profile(
                evaluator=evaluator,
                weight=build_weight(self.config["observable"], base=base),
                base_site=base,
                max_radius=block["max_radius"],
            )
        report = {
            "residual": residual,
            "gamma_sup": gamma_sup,
            "energy": float(evaluator.energy),
            "nu": profile.nu,
            "amplitude": profile.amplitude,
            "raw_slope": profile.raw_slope,
            "fit_residual": profile.fit_residual,
        }
        bound = profile.bound(profile.radii)
        self.context.record(
            csv_write(self.context.path("eigenfun_report.csv"), header=("quantity", "value"), rows=report.items()),
            csv_write(
                self.context.path("eigenfun_profile.csv"),
                header=("L", "weighted_sum", "box_norm", "shell_sum", "bound"),
                rows=zip(
                    profile.radii.tolist(), profile.weighted_sums, profile.box_norms, profile.shell_sums, bound,
                    strict=True,
                ),
            ),
        )
        self.plot(
            "eigenfun_profile.svg",
            series=[("W(L)", profile.radii, profile.weighted_sums), ("A L^nu", profile.radii, bound)],
            xlabel="L",
            ylabel="weighted box sum",
            logx=True,
            logy=True,
        )
        return report


class CombesThomasView(ExperimentView):
    name = "ct-check"
    help = "Off-spectrum Green's function decay against the exponential bound."
    columns = (
        "combes_thomas.csv: distance, max_abs_green, threshold\n"
        "  maxima over interior sites at each sup-distance from the source."
    )
    requires = ("model", "combes_thomas")

    def handle(self) -> dict:
        block = self.config["combes_thomas"]
        box = build_box(self.config["model"])
        source = self.base_site() if block["source"] is None else build_base_site(
            {"base_site": block["source"]}, box=box
        )
        with self.context.timed("ct-check"):
            report = combes_thomas_check(
                hamiltonian=self.first_hamiltonian(),
                z=complex(block["z_real"], block["z_imag"]),
                source=source,
                max_distance=block["max_distance"],
                distance_method=block["distance_method"],
                solve_tol=self.tolerances["solve_tol"],
            )
        self.context.record(*combes_thomas_export(report=report, directory=self.context.out_dir))
        if not report.holds:
            logger.warning("Combes-Thomas bound fails at distances %s", report.violations.tolist())
        return {
            "holds": report.holds,
            "delta": report.delta,
            "fitted_rate": report.fitted_rate,
            "bound_rate": report.bound_rate,
        }


class BorelView(ExperimentView):
    name = "borel"
    help = "Borel-transform scaling: eps^g Im G(n,n) against eps^(1-g) box sums of |psi|^2."
    columns = (
        "borel_scaling.csv: gamma, alpha, eps, L, lhs, rhs, margin, remainder,\n"
        "  printed_holds, corrected_holds; remainder is the boundary term the printed form drops."
    )
    requires = ("model", "eigenfunction", "borel")

    def handle(self) -> dict:
        block = self.config["borel"]
        hamiltonian = self.first_hamiltonian()
        base = self.base_site()
        evaluator = build_evaluator(
            self.config["eigenfunction"], model=self.config["model"], hamiltonian=hamiltonian, base=base
        )
        site = base if block["site"] is None else build_base_site(
            {"base_site": block["site"]}, box=hamiltonian.box
        )
        with self.context.timed("borel"):
            report = borel_scaling_check(
                hamiltonian=hamiltonian,
                evaluator=evaluator,
                energy=evaluator.energy if block["energy"] is None else block["energy"],
                site=site,
                gammas=block["gammas"],
                alphas=block["alphas"],
                epsilons=block["epsilons"],
                solve_tol=self.tolerances["solve_tol"],
                threads=self.context.threads,
            )
        self.context.record(*borel_scaling_export(report=report, directory=self.context.out_dir))
        return {
            "herglotz": report.herglotz,
            "corrected_holds": bool(np.all(report.corrected_holds)),
            "printed_holds": bool(np.all(report.printed_holds)),
            "min_margin": float(report.margins.min()),
        }


class ContrastView(ExperimentView):
    name = "contrast"
    help = "Fitted moment exponents per model and realization: delocalized versus localized."
    columns = (
        "contrast.csv: model, realization, slope, intercept, fit_residual\n"
        "  fit_residual is the RMS deviation of the log-log fit."
    )
    requires = ("contrast",)

    def handle(self) -> dict:
        block = self.config["contrast"]
        models = [
            ModelConfig(label=model["label"], box=build_box(model), spec=build_spec(model))
            for model in block["models"]
        ]
        q = self.config["observable"]["q"]
        with self.context.timed("contrast"):
            report = localization_contrast_report(
                models=models,
                q=q,
                times=build_times(self.config["observable"]),
                realizations=block["realizations"],
                route=block["route"],
                time_tol=self.tolerances["time_tol"],
                containment=self.tolerances["containment"],
                threads=self.context.threads,
            )
        self.context.record(*contrast_export(report=report, directory=self.context.out_dir))
        results = {"summary": {label: list(values) for label, values in report.summary().items()}}
        if block["trimmed"] and block["reference"]:
            results["delocalized"] = report.delocalized(trimmed=block["trimmed"], contrast=block["reference"])
        return results


class CertifyView(ExperimentView):
    name = "certify"
    help = "Delocalization lower bound from an eigenfunction growth profile against measured moments."
    columns = (
        "certify.csv: realization, T, measured, err, bound, ratio\n"
        "  bound is (2T)^(1 - alpha nu) |psi(n0)|^2 / (4A); ratio is measured / bound."
    )
    requires = ("model", "eigenfunction")

    def handle(self) -> dict:
        model, block = self.config["model"], self.config["eigenfunction"]
        route = self.config["route"]["name"]
        if route == "all":
            raise ConfigurationError(
                "certify compares against one route.", {"fields": {"route.name": ["all is not allowed here."]}}
            )
        base = self.base_site()
        weight = build_weight(self.config["observable"], base=base)
        times = build_times(self.config["observable"])
        evaluator = build_evaluator(block, model=model, hamiltonian=self.first_hamiltonian(), base=base)
        with self.context.timed("certify profile"):
            profile = growth_profile(
                evaluator=evaluator, weight=weight, base_site=base, max_radius=block["max_radius"]
            )
        certificate = delocalization_certificate(
            profile=profile,
            psi_at_base=complex(evaluator(np.asarray([base]))[0]),
            times=times,
            alpha=self.config["certify"]["alpha"],
        )
        rows, results = [], {"exponent": certificate.exponent, "nu": profile.nu, "amplitude": profile.amplitude}
        for realization, hamiltonian in build_hamiltonians(model):
            with self.context.timed(f"certify r{realization}"):
                series = moment_series(
                    hamiltonian=hamiltonian,
                    weight=weight,
                    base_site=base,
                    times=times,
                    route=route,
                    time_tol=self.tolerances["time_tol"],
                    solve_tol=self.tolerances["solve_tol"],
                    containment=self.tolerances["containment"],
                    threads=self.context.threads,
                    kind=self.config["route"]["kind"],
                )
            ratio = series.values / certificate.bound
            rows.extend(
                zip(
                    [realization] * len(series), series.times, series.values, series.errors,
                    certificate.bound, ratio, strict=True,
                )
            )
            holds = bool(np.all(series.values + series.errors >= certificate.bound))
            if not holds:
                logger.warning("realization %d falls below the certified lower bound", realization)
            entry = {"holds": holds, "min_ratio": float(ratio.min())}
            if len(series) >= MIN_FIT_POINTS:
                entry["slope"] = fit_transport_exponent(series=series).slope
            results[str(realization)] = entry
        self.context.record(
            csv_write(
                self.context.path("certify.csv"),
                header=("realization", "T", "measured", "err", "bound", "ratio"),
                rows=rows,
            )
        )
        self.plot(
            "certify.svg",
            series=[("bound", times, certificate.bound)]
            + [(f"r{r}", times, [row[2] for row in rows if row[0] == r]) for r in sorted({row[0] for row in rows})],
            xlabel="T",
            ylabel=weight.label(),
            logx=True,
            logy=True,
        )
        return results
