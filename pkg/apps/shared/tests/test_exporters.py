import json
import tempfile
import threading
from pathlib import Path
from unittest import TestCase

import numpy as np

from apps.shared.exceptions import (
    ApplicationError,
    ConfigurationError,
    ContainmentError,
    NumericFailure,
    PreconditionError,
    ResourceCapExceeded,
)
from apps.shared.exporters import config_digest, csv_read, csv_write, manifest_write, svg_plot
from apps.shared.pool import parallel_map
from config import override_settings


class TempDirMixin:
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.directory = Path(self.tmp.name)


class CsvWriteTests(TempDirMixin, TestCase):
    def test_cells_are_formatted_by_type(self):
        path = csv_write(
            self.directory / "nested" / "rows.csv",
            header=["flag", "count", "value", "z"],
            rows=[[True, np.int64(3), 0.5, complex(1.0, -2.0)], [np.bool_(False), 0, np.float64(0.25), 2j]],
        )
        header, rows = csv_read(path)
        self.assertEqual(header, ["flag", "count", "value", "z"])
        self.assertEqual(rows[0], ["true", "3", "0.5", "1-2j"])
        self.assertEqual(rows[1], ["false", "0", "0.25", "0+2j"])

    def test_floats_keep_full_precision(self):
        path = csv_write(self.directory / "x.csv", header=["x"], rows=[[0.1]])
        _, rows = csv_read(path)
        self.assertEqual(float(rows[0][0]), 0.1)

    def test_rewrites_are_byte_identical(self):
        rows = [[i, np.sqrt(i)] for i in range(5)]
        first = csv_write(self.directory / "a.csv", header=["i", "root"], rows=rows).read_bytes()
        second = csv_write(self.directory / "b.csv", header=["i", "root"], rows=rows).read_bytes()
        self.assertEqual(first, second)


class ManifestTests(TempDirMixin, TestCase):
    def test_digest_ignores_key_order(self):
        self.assertEqual(config_digest({"a": 1, "b": [2, 3]}), config_digest({"b": [2, 3], "a": 1}))
        self.assertNotEqual(config_digest({"a": 1}), config_digest({"a": 2}))

    def test_manifest_carries_digest_and_extra(self):
        config = {"model": {"dim": 1}}
        path = manifest_write(self.directory / "manifest.json", config=config, extra={"threads": 2})
        manifest = json.loads(path.read_text())
        self.assertEqual(manifest["config"], config)
        self.assertEqual(manifest["config_sha256"], config_digest(config))
        self.assertEqual(manifest["threads"], 2)
        self.assertIn("code_version", manifest)


class SvgPlotTests(TempDirMixin, TestCase):
    def test_plot_is_reproducible(self):
        series = [("a", [1, 2, 3], [1.0, 4.0, 9.0]), ("b", [1, 2, 3], [2.0, 3.0, 4.0])]
        first = svg_plot(self.directory / "a.svg", series=series, xlabel="T", ylabel="M", logy=True)
        second = svg_plot(self.directory / "b.svg", series=series, xlabel="T", ylabel="M", logy=True)
        self.assertTrue(first.read_text().lstrip().startswith("<?xml"))
        self.assertEqual(first.read_bytes(), second.read_bytes())


class ParallelMapTests(TestCase):
    def test_order_is_preserved_on_many_workers(self):
        self.assertEqual(parallel_map(lambda x: x * x, range(20), threads=4), [x * x for x in range(20)])

    def test_single_thread_runs_inline(self):
        seen = []
        parallel_map(lambda _: seen.append(threading.get_ident()), range(3), threads=1)
        self.assertEqual(set(seen), {threading.get_ident()})

    @override_settings(THREADS=1)
    def test_default_comes_from_settings(self):
        seen = []
        parallel_map(lambda _: seen.append(threading.get_ident()), range(3))
        self.assertEqual(set(seen), {threading.get_ident()})


class ExitCodeTests(TestCase):
    def test_exit_codes_per_failure_class(self):
        self.assertEqual(ConfigurationError("x").exit_code, 1)
        self.assertEqual(ContainmentError("x").exit_code, 1)
        self.assertEqual(NumericFailure("x").exit_code, 2)
        self.assertEqual(ResourceCapExceeded("x").exit_code, 3)
        self.assertTrue(issubclass(ContainmentError, PreconditionError))

    def test_payload_names_the_error(self):
        payload = ApplicationError("bad input", {"field": "rho"}).as_payload()
        self.assertEqual(payload, {"error": "ApplicationError", "message": "bad input", "extra": {"field": "rho"}})
        self.assertEqual(NumericFailure("no").as_payload()["extra"], {})
