from environs import Env

env = Env()

MAX_SITES = env.int("LATTICEQ_MAX_SITES", 4_000_000)
MAX_WALL_SECONDS = env.float("LATTICEQ_MAX_WALL_SECONDS", 1800.0)
THREADS = env.int("LATTICEQ_THREADS", 1)
RUN_SLOW_TESTS = env.bool("LATTICEQ_RUN_SLOW", False)
