from unittest import TestCase

from apps.shared.exceptions import ConfigurationError
from apps.shared.validators import (
    validate_dimension_match,
    validate_finite,
    validate_int_vector,
    validate_positive_int,
    validate_tolerance,
)


class ValidatorTests(TestCase):
    def test_positive_int(self):
        self.assertEqual(validate_positive_int(3.0, name="radius"), 3)
        self.assertEqual(validate_positive_int(0, name="radius", allow_zero=True), 0)
        for bad in (0, -1, 2.5, True):
            with self.subTest(value=bad), self.assertRaises(ConfigurationError):
                validate_positive_int(bad, name="radius")

    def test_finite_rejects_nan_and_inf(self):
        self.assertEqual(validate_finite("1.5", name="E"), 1.5)
        for bad in (float("nan"), float("inf")):
            with self.subTest(value=bad), self.assertRaises(ConfigurationError):
                validate_finite(bad, name="E")

    def test_tolerance_is_open_unit_interval(self):
        self.assertEqual(validate_tolerance(1e-8, name="tol"), 1e-8)
        for bad in (0.0, 1.0, -1e-3):
            with self.subTest(value=bad), self.assertRaises(ConfigurationError) as ctx:
                validate_tolerance(bad, name="tol")
            self.assertEqual(ctx.exception.extra["field"], "tol")

    def test_int_vector(self):
        self.assertEqual(validate_int_vector([1, -2, 3], name="site", dim=3), (1, -2, 3))
        with self.assertRaises(ConfigurationError):
            validate_int_vector([1.5], name="site")
        with self.assertRaises(ConfigurationError):
            validate_int_vector(None, name="site")
        with self.assertRaises(ConfigurationError) as ctx:
            validate_int_vector([1, 2], name="site", dim=3)
        self.assertEqual(ctx.exception.extra, {"field": "site", "expected": 3, "got": 2})

    def test_dimension_match(self):
        validate_dimension_match(expected=2, got=2, what="weight")
        with self.assertRaises(ConfigurationError):
            validate_dimension_match(expected=2, got=3, what="weight")
