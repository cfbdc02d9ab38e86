import math
import tempfile
from pathlib import Path
from unittest import TestCase, skipUnless
from unittest.mock import patch

import numpy as np

from apps.eigenfunctions.selectors import nonzero_base_site
from apps.eigenfunctions.services import make_trimmed_wave
from apps.hamiltonians.models import PotentialSpec
from apps.hamiltonians.services import assemble, two_site_chain
from apps.lattice.models import LatticeBox, TrimPattern
from apps.numerics.services import dense_eig
from apps.numerics.tests.factories import RandomHamiltonianFactory
from apps.shared.exceptions import (
    ConfigurationError,
    ContainmentError,
    NumericFailure,
    PreconditionError,
    ResourceCapExceeded,
)
from apps.shared.exporters import csv_read
from apps.transport.models import GrowthWeight, MomentRoute
from apps.transport.selectors import fit_transport_exponent
from apps.transport.services import (
    abel_cesaro_comparison,
    abel_moment,
    cesaro_moment,
    contained_moment_series,
    moment_series,
    moment_series_export,
    moment_via_resolvent,
    moment_via_spectrum,
    resolvent_lower_bound_check,
)
from apps.transport.tests.factories import PowerWeightFactory, two_site_weight
from config import override_settings, settings


def free_chain(radius: int):
    return assemble(box=LatticeBox.centered(dim=1, radius=radius), spec=PotentialSpec.zero(1))


class TwoSiteOracleTests(TestCase):
    def test_abel_average_of_sin_squared(self):
        H = two_site_chain()
        for T in [0.5, 2.0, 7.3]:
            estimate = abel_moment(
                hamiltonian=H, weight=two_site_weight(), base_site=(0,), T=T, time_tol=1e-8
            )
            exact = 2 * T**2 / (1 + 4 * T**2)
            self.assertLess(abs(estimate.value - exact), 1e-6)
            self.assertLessEqual(abs(estimate.value - exact), estimate.error + 1e-12)

    def test_cesaro_average_of_sin_squared(self):
        H = two_site_chain()
        for T in [0.3, 3.0, 10.7, 25.0]:
            estimate = cesaro_moment(
                hamiltonian=H, weight=two_site_weight(), base_site=(0,), T=T, time_tol=1e-8
            )
            exact = 0.5 - math.sin(2 * T) / (4 * T)
            self.assertAlmostEqual(estimate.value, exact, delta=1e-7)

    def test_spectral_route_matches_both_oracles(self):
        eigensystem = dense_eig(hamiltonian=two_site_chain())
        T = 4.2
        abel = moment_via_spectrum(
            eigensystem=eigensystem, weight=two_site_weight(), base_site=(0,), T=T, kind=MomentRoute.ABEL
        )
        cesaro = moment_via_spectrum(
            eigensystem=eigensystem, weight=two_site_weight(), base_site=(0,), T=T, kind="cesaro"
        )
        self.assertAlmostEqual(abel.value, 2 * T**2 / (1 + 4 * T**2), places=12)
        self.assertAlmostEqual(cesaro.value, 0.5 - math.sin(2 * T) / (4 * T), places=12)
        self.assertIs(abel.route, MomentRoute.SPECTRAL)

    def test_resolvent_route_matches_abel_oracle(self):
        T = 1.5
        estimate = moment_via_resolvent(hamiltonian=two_site_chain(), weight=two_site_weight(), base_site=(0,), T=T)
        self.assertAlmostEqual(estimate.value, 2 * T**2 / (1 + 4 * T**2), delta=1e-6)


class NormalizationTests(TestCase):
    seeds = range(900, 905)

    def setUp(self):
        self.one = GrowthWeight.constant_one()

    def test_time_averages_of_constant_weight(self):
        for seed in self.seeds:
            H = RandomHamiltonianFactory(dim=1, radius=60, width=2.0, seed=seed)
            with self.subTest(seed=seed):
                abel = abel_moment(hamiltonian=H, weight=self.one, base_site=(0,), T=3.0, containment="off")
                self.assertAlmostEqual(abel.value, 1.0, delta=1e-6)
                self.assertLessEqual(abs(abel.value - 1), abel.error)
                cesaro = cesaro_moment(hamiltonian=H, weight=self.one, base_site=(0,), T=3.0, containment="off")
                self.assertAlmostEqual(cesaro.value, 1.0, delta=1e-6)

    def test_resolvent_plancherel(self):
        for seed in self.seeds:
            H = RandomHamiltonianFactory(dim=1, radius=30, width=2.0, seed=seed)
            for T in [0.2, 2.0]:
                with self.subTest(seed=seed, T=T):
                    estimate = moment_via_resolvent(hamiltonian=H, weight=self.one, base_site=(0,), T=T)
                    self.assertAlmostEqual(estimate.value, 1.0, delta=1e-6)
                    self.assertGreater(estimate.metadata["tail_bound"], 0)

    def test_spectral_series_of_constant_weight(self):
        H = RandomHamiltonianFactory(dim=2, radius=4)
        series = moment_series(
            hamiltonian=H, weight=self.one, base_site=(1, -2), times=[0.5, 5.0, 50.0], route="spectral"
        )
        np.testing.assert_allclose(series.values, 1.0, atol=1e-10)


class RouteEquivalenceTests(TestCase):
    def test_abel_matches_resolvent_on_random_chain(self):
        H = RandomHamiltonianFactory(dim=1, radius=100, width=2.0, seed=2024)
        weight = PowerWeightFactory(q=2.0)
        abel = abel_moment(hamiltonian=H, weight=weight, base_site=(0,), T=5.0, containment="warn")
        resolvent = moment_via_resolvent(hamiltonian=H, weight=weight, base_site=(0,), T=5.0)
        self.assertLess(abs(abel.value - resolvent.value) / resolvent.value, 1e-3)
        self.assertLessEqual(abs(abel.value - resolvent.value), abel.error + resolvent.error)

    def test_identity_holds_at_short_times(self):
        H = RandomHamiltonianFactory(dim=1, radius=20, width=2.0, seed=99)
        weight = PowerWeightFactory(q=2.0)
        abel = abel_moment(hamiltonian=H, weight=weight, base_site=(0,), T=0.2)
        resolvent = moment_via_resolvent(hamiltonian=H, weight=weight, base_site=(0,), T=0.2)
        self.assertLess(abs(abel.value - resolvent.value) / resolvent.value, 1e-3)

    def test_free_chain_against_eigen_decomposition(self):
        H = free_chain(300)
        weight = PowerWeightFactory(q=2.0)
        eigensystem = dense_eig(hamiltonian=H)
        abel = abel_moment(hamiltonian=H, weight=weight, base_site=(0,), T=5.0, time_tol=1e-8)
        exact = moment_via_spectrum(eigensystem=eigensystem, weight=weight, base_site=(0,), T=5.0)
        self.assertLess(abs(abel.value - exact.value) / exact.value, 1e-4)
        # Free motion: sum n^2 |psi_t(n)|^2 = 2 t^2, so the Abel average is 1 + 4 T^2.
        self.assertAlmostEqual(exact.value, 101.0, delta=1e-3)

        cesaro = cesaro_moment(hamiltonian=H, weight=weight, base_site=(0,), T=5.0, time_tol=1e-8)
        exact_cesaro = moment_via_spectrum(
            eigensystem=eigensystem, weight=weight, base_site=(0,), T=5.0, kind=MomentRoute.CESARO
        )
        self.assertLess(abs(cesaro.value - exact_cesaro.value) / exact_cesaro.value, 1e-6)
        self.assertAlmostEqual(exact_cesaro.value, 1 + 2 * 25 / 3, delta=1e-3)


class ContainmentTests(TestCase):
    def test_small_box_is_rejected_with_safe_radius(self):
        H = RandomHamiltonianFactory(dim=1, radius=10, width=1.0)
        with self.assertRaises(ContainmentError) as ctx:
            abel_moment(hamiltonian=H, weight=PowerWeightFactory(), base_site=(0,), T=5.0, containment="error")
        self.assertGreater(ctx.exception.extra["min_safe_L"], 10)

    def test_safe_radius_follows_the_measured_front(self):
        H = RandomHamiltonianFactory(dim=2, radius=20, width=1.0)
        with self.assertRaises(ContainmentError) as ctx:
            abel_moment(
                hamiltonian=H, weight=PowerWeightFactory(base=(0, 0)), base_site=(0, 0), T=5.0,
                time_tol=1e-3, containment="error",
            )
        extra = ctx.exception.extra
        worst_case = math.ceil(4 * extra["horizon"]) + settings.CONTAINMENT_MARGIN
        self.assertGreater(extra["min_safe_L"], 20)
        self.assertLess(extra["min_safe_L"], worst_case)

    def test_growth_stops_at_a_contained_box(self):
        spec = PotentialSpec.iid_uniform(support=TrimPattern.full_lattice(1), width=2.0, seed=77)
        series = contained_moment_series(
            box=LatticeBox.centered(dim=1, radius=6), spec=spec, weight=PowerWeightFactory(),
            base_site=(0,), times=[2.0, 4.0], route="abel", time_tol=1e-3,
        )
        radius = series.metadata["radius"]
        tried = [attempt["radius"] for attempt in series.metadata["attempts"]]
        self.assertEqual(tried[0], 6)
        self.assertEqual(tried, sorted(set(tried)))
        self.assertLess(tried[-1], radius)
        direct = moment_series(
            hamiltonian=assemble(box=LatticeBox.centered(dim=1, radius=radius), spec=spec),
            weight=PowerWeightFactory(), base_site=(0,), times=[2.0, 4.0], route="abel",
            time_tol=1e-3, containment="error",
        )
        np.testing.assert_array_equal(series.values, direct.values)

    def test_growth_is_for_time_averages_only(self):
        with self.assertRaises(ConfigurationError):
            contained_moment_series(
                box=LatticeBox.centered(dim=1, radius=6), spec=PotentialSpec.zero(1),
                weight=PowerWeightFactory(), base_site=(0,), times=[1.0], route="spectral",
            )

    @override_settings(MAX_SITES=100)
    def test_growth_stops_at_the_site_cap(self):
        with self.assertRaises(ResourceCapExceeded):
            contained_moment_series(
                box=LatticeBox.centered(dim=1, radius=6), spec=PotentialSpec.zero(1),
                weight=PowerWeightFactory(), base_site=(0,), times=[4.0], route="abel", time_tol=1e-3,
            )

    def test_warn_policy_records_violation(self):
        H = RandomHamiltonianFactory(dim=1, radius=10, width=1.0)
        with self.assertLogs("apps.transport.services", level="WARNING"):
            estimate = abel_moment(
                hamiltonian=H, weight=PowerWeightFactory(), base_site=(0,), T=5.0, containment="warn"
            )
        self.assertIn("containment_violation", estimate.metadata)

    def test_restricted_operators_skip_the_check(self):
        estimate = abel_moment(
            hamiltonian=two_site_chain(), weight=two_site_weight(), base_site=(0,), T=2.0, containment="error"
        )
        self.assertEqual(estimate.metadata["containment"], "off")


class ComparisonTests(TestCase):
    def test_cesaro_is_bounded_by_e_times_abel(self):
        for seed in range(4):
            H = RandomHamiltonianFactory(dim=1, radius=40, width=3.0, seed=500 + seed)
            report = abel_cesaro_comparison(
                hamiltonian=H, weight=PowerWeightFactory(), base_site=(0,),
                times=[1.0, 2.0, 4.0, 8.0], containment="off",
            )
            self.assertTrue(report.holds)
            self.assertTrue(np.all(report.cesaro_over_abel <= math.e + 1e-6))

    def test_printed_constant_fails_for_constant_weight(self):
        H = RandomHamiltonianFactory(dim=1, radius=20)
        report = abel_cesaro_comparison(
            hamiltonian=H, weight=GrowthWeight.constant_one(), base_site=(0,),
            times=[1.0, 3.0, 9.0], containment="off",
        )
        self.assertEqual(report.printed_form_violations.size, 3)
        self.assertTrue(report.holds)

    def test_monotone_weight_dominance(self):
        H = RandomHamiltonianFactory(dim=2, radius=5, width=4.0)
        light, heavy = PowerWeightFactory(q=1.0, base=(0, 0)), PowerWeightFactory(q=2.0, base=(0, 0))
        self.assertTrue(light.dominated_by(heavy, H.sites))
        times = [0.5, 2.0, 8.0, 32.0]
        for route in ["abel", "cesaro"]:
            common = dict(hamiltonian=H, base_site=(0, 0), times=times, route="spectral", kind=route)
            low = moment_series(weight=light, **common)
            high = moment_series(weight=heavy, **common)
            self.assertTrue(np.all(low.values <= high.values + low.errors + high.errors))


class SeriesTests(TestCase):
    def test_shared_trajectory_matches_single_points(self):
        H = RandomHamiltonianFactory(dim=1, radius=80, width=2.0)
        weight = PowerWeightFactory()
        series = moment_series(
            hamiltonian=H, weight=weight, base_site=(0,), times=[1.0, 2.0, 3.0], route="cesaro", containment="off"
        )
        single = cesaro_moment(hamiltonian=H, weight=weight, base_site=(0,), T=2.0, containment="off")
        self.assertAlmostEqual(series.values[1], single.value, delta=1e-8)
        self.assertEqual(len(series), 3)
        self.assertIs(series.route, MomentRoute.CESARO)

    def test_free_chain_spreads_ballistically(self):
        series = moment_series(
            hamiltonian=free_chain(300), weight=PowerWeightFactory(), base_site=(0,),
            times=[2.0, 3.0, 4.0, 6.0, 8.0, 10.0], route="spectral",
        )
        fit = fit_transport_exponent(series=series)
        self.assertAlmostEqual(fit.slope, 2.0, delta=0.06)

    def test_rejects_unsorted_grid(self):
        with self.assertRaises(ConfigurationError):
            moment_series(
                hamiltonian=two_site_chain(), weight=two_site_weight(), base_site=(0,), times=[2.0, 1.0]
            )

    def test_export_columns(self):
        series = moment_series(
            hamiltonian=two_site_chain(), weight=two_site_weight(), base_site=(0,),
            times=[1.0, 2.0], route="spectral",
        )
        with tempfile.TemporaryDirectory() as tmp:
            path = moment_series_export(series=series, path=Path(tmp) / "moments.csv")
            header, rows = csv_read(path)
        self.assertEqual(header, ["T", "value", "err", "route"])
        self.assertEqual(len(rows), 2)
        self.assertEqual(rows[0][3], "spectral")

    def test_solver_failure_names_the_energy(self):
        with patch(
            "apps.transport.services.green_column", side_effect=NumericFailure("stalled", {"iterations": 5})
        ):
            with self.assertRaises(NumericFailure) as ctx:
                moment_via_resolvent(
                    hamiltonian=two_site_chain(), weight=two_site_weight(), base_site=(0,), T=1.0, threads=1
                )
        self.assertIn("energy", ctx.exception.extra)
        self.assertEqual(ctx.exception.extra["iterations"], 5)


class ResolventLowerBoundTests(TestCase):
    def setUp(self):
        pattern = TrimPattern(d1=1, d2=1, rho=(2,))
        self.wave = make_trimmed_wave(pattern=pattern, k=(1,), kappa=(0.9,))
        self.H = assemble(
            box=LatticeBox.centered(dim=2, radius=14),
            spec=PotentialSpec.iid_uniform(support=pattern, width=4.0, seed=11),
        )
        self.base = nonzero_base_site(evaluator=self.wave, box=self.H.box)

    def test_corrected_bound_always_holds(self):
        report = resolvent_lower_bound_check(
            hamiltonian=self.H, evaluator=self.wave, energy=self.wave.energy,
            weight=GrowthWeight.power(q=3.0, base=self.base), base_site=self.base,
            epsilons=[0.2, 0.1], alpha=1.05,
        )
        np.testing.assert_array_equal(report.radii, [5, 11])
        self.assertTrue(np.all(report.corrected_holds))
        self.assertTrue(np.all(report.printed_holds))
        self.assertAlmostEqual(report.psi_at_base, 1.0, places=12)

    def test_inner_box_must_fit(self):
        with self.assertRaises(PreconditionError) as ctx:
            resolvent_lower_bound_check(
                hamiltonian=self.H, evaluator=self.wave, energy=self.wave.energy,
                weight=GrowthWeight.power(q=3.0, base=self.base), base_site=self.base,
                epsilons=[0.05], alpha=1.05,
            )
        self.assertIn("does not fit", str(ctx.exception))

    def test_alpha_must_exceed_one(self):
        with self.assertRaises(ConfigurationError):
            resolvent_lower_bound_check(
                hamiltonian=self.H, evaluator=self.wave, energy=self.wave.energy,
                weight=GrowthWeight.power(q=3.0, base=self.base), base_site=self.base,
                epsilons=[0.1], alpha=1.0,
            )


@skipUnless(settings.RUN_SLOW_TESTS, "slow transport runs")
class SlowTransportTests(TestCase):
    def test_anderson_chain_localizes(self):
        H = RandomHamiltonianFactory(dim=1, radius=400, width=10.0, seed=31)
        series = moment_series(
            hamiltonian=H, weight=PowerWeightFactory(), base_site=(0,),
            times=np.geomspace(50, 500, 6), route="spectral",
        )
        self.assertLess(fit_transport_exponent(series=series).slope, 0.1)

    def test_trimmed_bound_in_three_dimensions(self):
        pattern = TrimPattern(d1=1, d2=2, rho=(2,))
        wave = make_trimmed_wave(pattern=pattern, k=(1,), kappa=(0.7, 1.3))
        H = assemble(
            box=LatticeBox.centered(dim=3, radius=50),
            spec=PotentialSpec.iid_uniform(support=pattern, width=4.0, seed=3),
        )
        base = nonzero_base_site(evaluator=wave, box=H.box)
        report = resolvent_lower_bound_check(
            hamiltonian=H, evaluator=wave, energy=wave.energy,
            weight=GrowthWeight.power(q=3.0, base=base), base_site=base,
            epsilons=[0.1, 0.05, 0.025], alpha=1.05,
        )
        np.testing.assert_array_equal(report.radii, [11, 23, 48])
        self.assertTrue(np.all(report.corrected_holds))
        self.assertTrue(np.all(report.printed_holds))

    def test_trimmed_model_transports_in_three_dimensions(self):
        pattern = TrimPattern(d1=1, d2=2, rho=(2,))
        base = (1, 0, 0)
        weight = GrowthWeight.power(q=3.0, base=base)
        for realization in range(5):
            with self.subTest(realization=realization):
                series = contained_moment_series(
                    box=LatticeBox(dim=3, center=base, radius=32),
                    spec=PotentialSpec.iid_uniform(support=pattern, width=8.0, seed=8, realization=realization),
                    weight=weight, base_site=base, times=np.geomspace(5, 20, 6), route="cesaro",
                )
                self.assertGreaterEqual(fit_transport_exponent(series=series).slope, 0.7)
