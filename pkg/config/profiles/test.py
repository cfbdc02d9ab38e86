from .base import *  # noqa: F401, F403

LOGGING["loggers"]["apps"]["level"] = "WARNING"  # noqa: F405

THREADS = 1
EMIT_PLOTS = False
