from .base import *  # noqa: F401, F403

# ============================================================================
# DEBUG & DEVELOPMENT
# ============================================================================

DEBUG = True

# ============================================================================
# LOGGING (More verbose in development)
# ============================================================================

LOGGING["loggers"]["apps"]["level"] = "DEBUG"  # noqa: F405
