from unittest import TestCase

import numpy as np

from apps.eigenfunctions.models import PlaneWave
from apps.eigenfunctions.selectors import growth_profile
from apps.shared.exceptions import ConfigurationError, DomainError, PreconditionError
from apps.transport.models import GrowthWeight
from apps.transport.selectors import (
    delocalization_certificate,
    fit_transport_exponent,
    uniform_growth_constant,
)
from apps.transport.tests.factories import GrowthProfileFactory, MomentSeriesFactory


class FitTransportExponentTests(TestCase):
    def test_linear_series(self):
        fit = fit_transport_exponent(series=MomentSeriesFactory())
        self.assertAlmostEqual(fit.slope, 1.0, delta=0.01)
        self.assertAlmostEqual(fit.intercept, np.log(3.0), places=10)
        self.assertLess(fit.fit_residual, 1e-10)

    def test_constant_series(self):
        series = MomentSeriesFactory(values=np.full(9, 4.0))
        self.assertAlmostEqual(fit_transport_exponent(series=series).slope, 0.0, delta=0.01)

    def test_window_selects_points(self):
        series = MomentSeriesFactory()
        fit = fit_transport_exponent(series=series, window=(1.0, 20.0))
        self.assertEqual(fit.points, 6)

    def test_needs_five_points(self):
        with self.assertRaises(ConfigurationError):
            fit_transport_exponent(series=MomentSeriesFactory(), window=(1.0, 5.0))

    def test_nonpositive_values_rejected(self):
        values = np.linspace(-1.0, 7.0, 9)
        with self.assertRaises(DomainError):
            fit_transport_exponent(series=MomentSeriesFactory(values=values))


class DelocalizationCertificateTests(TestCase):
    def test_bounded_function_gives_linear_growth(self):
        profile = GrowthProfileFactory(nu=0.0, raw_slope=-0.4, amplitude=2.0)
        times = np.array([1.0, 10.0, 100.0])
        certificate = delocalization_certificate(profile=profile, psi_at_base=1.0, times=times, alpha=1.0)
        self.assertEqual(certificate.exponent, 1.0)
        np.testing.assert_allclose(certificate.bound, 2 * times / 8)

    def test_exponent_for_sublinear_profile(self):
        certificate = delocalization_certificate(
            profile=GrowthProfileFactory(), psi_at_base=0.5j, times=[4.0], alpha=1.05
        )
        self.assertAlmostEqual(certificate.exponent, 1 - 1.05 * 0.5)
        self.assertAlmostEqual(certificate.bound[0], 8.0 ** (1 - 0.525) * 0.25 / 8.0)

    def test_default_alpha(self):
        certificate = delocalization_certificate(profile=GrowthProfileFactory(), psi_at_base=1.0, times=[1.0])
        self.assertEqual(certificate.alpha, 1.05)

    def test_unavailable_when_growth_is_linear(self):
        with self.assertRaises(PreconditionError):
            delocalization_certificate(
                profile=GrowthProfileFactory(raw_slope=1.2, nu=1 - 1e-9), psi_at_base=1.0, times=[1.0]
            )

    def test_vanishing_base_value(self):
        with self.assertRaises(PreconditionError):
            delocalization_certificate(profile=GrowthProfileFactory(), psi_at_base=0.0, times=[1.0])


class UniformGrowthConstantTests(TestCase):
    def test_bounds_every_profile(self):
        weight = GrowthWeight.power(q=1.5, base=(0,))
        profiles = [
            growth_profile(
                evaluator=PlaneWave(theta=(theta,), amplitude=amp), weight=weight, base_site=(0,), max_radius=60
            )
            for theta, amp in [(0.4, 1.0), (1.1, 2.0), (2.9, 0.5)]
        ]
        amplitude, nu = uniform_growth_constant(profiles=profiles)
        self.assertEqual(nu, max(p.nu for p in profiles))
        for profile in profiles:
            self.assertTrue(np.all(profile.weighted_sums <= amplitude * profile.radii**nu * (1 + 1e-12)))

    def test_requires_profiles(self):
        with self.assertRaises(ConfigurationError):
            uniform_growth_constant(profiles=[])
