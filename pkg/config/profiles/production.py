from .base import *  # noqa: F401, F403

DEBUG = False

# ============================================================================
# LOGGING (Batch runs: warnings and failures only)
# ============================================================================

LOGGING["loggers"]["apps"]["level"] = "WARNING"  # noqa: F405
LOGGING["handlers"]["console"]["formatter"] = "simple"  # noqa: F405

THREADS = env.int("LATTICEQ_THREADS", 4)  # noqa: F405
