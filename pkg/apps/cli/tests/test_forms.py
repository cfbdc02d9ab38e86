import tempfile
from pathlib import Path
from unittest import TestCase

import numpy as np

from apps.cli.forms import (
    build_base_site,
    build_box,
    build_hamiltonians,
    build_spec,
    build_times,
    build_weight,
    flatten_messages,
    load_config,
    require_blocks,
)
from apps.cli.tests.factories import ExperimentConfigFactory, ModelBlockFactory, write_config
from apps.hamiltonians.models import PotentialVariant
from apps.hamiltonians.services import potential_table_export
from apps.shared.exceptions import ConfigurationError
from apps.transport.models import WeightVariant


class LoadConfigTests(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.directory = Path(self.tmp.name)

    def load(self, config, **kwargs):
        return load_config(path=write_config(self.directory, config), **kwargs)

    def assertFieldError(self, config, field, **kwargs):
        with self.assertRaises(ConfigurationError) as ctx:
            self.load(config, **kwargs)
        self.assertIn(field, ctx.exception.extra["fields"])

    def test_optional_blocks_get_defaults(self):
        config = self.load(ExperimentConfigFactory())
        self.assertEqual(config["route"]["name"], "abel")
        self.assertIsNone(config["tolerances"]["time_tol"])
        self.assertEqual(config["tolerances"]["containment"], "off")
        self.assertEqual(config["observable"]["weight"], "power")
        self.assertEqual(config["model"]["realizations"], 1)
        self.assertIsNone(config["eigenfunction"])

    def test_missing_required_field_is_named_by_path(self):
        model = ModelBlockFactory()
        del model["radius"]
        self.assertFieldError(ExperimentConfigFactory(model=model), "model.radius")

    def test_radius_zero_is_a_single_site_box(self):
        config = self.load(ExperimentConfigFactory(model__radius=0))
        self.assertEqual(config["model"]["radius"], 0)
        self.assertFalse(config["model"]["grow"])
        self.assertEqual(build_box(config["model"]).site_count, 1)
        self.assertFieldError(ExperimentConfigFactory(model__radius=-1), "model.radius")

    def test_unknown_field_is_rejected(self):
        self.assertFieldError(ExperimentConfigFactory(model__widht=3.0), "model.widht")

    def test_rho_must_match_trimmed_directions(self):
        config = ExperimentConfigFactory(model__full=False, model__dim=3, model__d1=1, model__rho=[])
        self.assertFieldError(config, "model.rho")

    def test_disorder_needs_positive_width(self):
        self.assertFieldError(ExperimentConfigFactory(model__width=0.0), "model.width")

    def test_eigenfunction_kind_needs_its_parameters(self):
        config = ExperimentConfigFactory(eigenfunction={"kind": "trimmed", "k": [1]})
        self.assertFieldError(config, "eigenfunction.kappa")

    def test_overrides_and_seed(self):
        config = self.load(
            ExperimentConfigFactory(),
            overrides=["model.width=4", "route.name=resolvent", "tolerances.solve_tol=1e-10"],
            seed=9,
        )
        self.assertEqual(config["model"]["width"], 4.0)
        self.assertEqual(config["model"]["seed"], 9)
        self.assertEqual(config["route"]["name"], "resolvent")
        self.assertEqual(config["tolerances"]["solve_tol"], 1e-10)

    def test_malformed_override(self):
        with self.assertRaises(ConfigurationError):
            self.load(ExperimentConfigFactory(), overrides=["model.width"])

    def test_invalid_json_reports_position(self):
        path = self.directory / "broken.json"
        path.write_text('{"model": ')
        with self.assertRaises(ConfigurationError) as ctx:
            load_config(path=path)
        self.assertIn("line", ctx.exception.extra)

    def test_missing_file(self):
        with self.assertRaises(ConfigurationError):
            load_config(path=self.directory / "absent.json")

    def test_grid_forms_are_exclusive(self):
        config = ExperimentConfigFactory(observable={"times": [1.0], "t_min": 1.0, "t_max": 2.0, "t_points": 3})
        self.assertFieldError(config, "observable.times")

    def test_table_paths_resolve_against_config_directory(self):
        potential_table_export(table={(0,): 1.5, (2,): -0.5}, path=self.directory / "v.csv")
        config = self.load(ExperimentConfigFactory(model__potential="table", model__table="v.csv"))
        self.assertEqual(Path(config["model"]["table"]), self.directory / "v.csv")
        spec = build_spec(config["model"])
        self.assertIs(spec.variant, PotentialVariant.TABLE)
        self.assertEqual(spec.table[(2,)], -0.5)


class BuilderTests(TestCase):
    def test_geometric_grid(self):
        observable = {"times": None, "t_min": 1.0, "t_max": 100.0, "t_points": 5}
        np.testing.assert_allclose(build_times(observable), [1.0, 10**0.5, 10.0, 10**1.5, 100.0])

    def test_grid_is_required_when_asked_for(self):
        with self.assertRaises(ConfigurationError) as ctx:
            build_times({"times": None, "t_points": None})
        self.assertIn("observable.times", ctx.exception.extra["fields"])

    def test_realizations_count_from_the_first(self):
        model = dict(ModelBlockFactory(radius=3), d1=0, rho=[], realization=2, realizations=3, table=None)
        realizations = [r for r, _ in build_hamiltonians(model)]
        self.assertEqual(realizations, [2, 3, 4])

    def test_base_site_defaults_to_center_and_must_lie_in_box(self):
        model = dict(ModelBlockFactory(dim=2, radius=4), d1=0, rho=[], realization=0, realizations=1, table=None)
        box = build_box(model)
        self.assertEqual(build_base_site({"base_site": None}, box=box), (0, 0))
        with self.assertRaises(ConfigurationError):
            build_base_site({"base_site": [5, 0]}, box=box)

    def test_weight_variants(self):
        self.assertIs(build_weight({"weight": "constant_one"}, base=(0,)).variant, WeightVariant.CONSTANT_ONE)
        weight = build_weight({"weight": "power", "q": 3.0}, base=(1,))
        self.assertEqual((weight.q, weight.base), (3.0, (1,)))

    def test_require_blocks(self):
        with self.assertRaises(ConfigurationError) as ctx:
            require_blocks({"model": {}, "borel": None}, ["model", "borel"])
        self.assertEqual(list(ctx.exception.extra["fields"]), ["borel"])

    def test_flatten_messages(self):
        flat = flatten_messages({"contrast": {"models": {0: {"radius": ["bad"]}}}, "model": ["oops"]})
        self.assertEqual(flat, {"contrast.models.0.radius": ["bad"], "model": ["oops"]})
