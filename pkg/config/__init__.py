"""
Settings package for latticeq.

The active runtime profile is named by LATTICEQ_SETTINGS_MODULE
(default ``config.profiles.local``). Upper-case names defined by the profile
are exposed as attributes of ``settings``.
"""

from __future__ import annotations

import functools
import importlib
import os
from contextlib import ContextDecorator

# Import the config.settings subpackage before binding the ``settings`` object
# below; otherwise its first import (from a profile) rebinds ``config.settings``
# to the subpackage and shadows the object.
import config.settings  # noqa: F401, E402

SETTINGS_MODULE_ENV = "LATTICEQ_SETTINGS_MODULE"
DEFAULT_SETTINGS_MODULE = "config.profiles.local"


class Settings:
    def __init__(self):
        self._values: dict | None = None
        self._overrides: list[dict] = []
        self.module_name: str | None = None

    def _load(self) -> dict:
        if self._values is None:
            self.module_name = os.environ.get(SETTINGS_MODULE_ENV, DEFAULT_SETTINGS_MODULE)
            module = importlib.import_module(self.module_name)
            self._values = {
                name: getattr(module, name) for name in dir(module) if name.isupper()
            }
        return self._values

    def configure(self, module_name: str) -> None:
        os.environ[SETTINGS_MODULE_ENV] = module_name
        self._values = None

    def __getattr__(self, name: str):
        if not name.isupper():
            raise AttributeError(name)
        for layer in reversed(self._overrides):
            if name in layer:
                return layer[name]
        values = self._load()
        if name not in values:
            raise AttributeError(f"Setting {name!r} is not defined in {self.module_name}")
        return values[name]

    def as_dict(self) -> dict:
        resolved = dict(self._load())
        for layer in self._overrides:
            resolved.update(layer)
        return resolved


settings = Settings()


class override_settings(ContextDecorator):  # noqa: N801 - mirrors the Django helper
    def __init__(self, **values):
        self.values = values

    def __enter__(self):
        settings._overrides.append(self.values)
        return self

    def __exit__(self, *exc):
        settings._overrides.remove(self.values)
        return False

    def __call__(self, func):
        if isinstance(func, type):
            original_setup = func.setUp

            @functools.wraps(original_setup)
            def setUp(instance):  # noqa: N802
                self.__enter__()
                instance.addCleanup(self.__exit__, None, None, None)
                original_setup(instance)

            func.setUp = setUp
            return func
        return super().__call__(func)
