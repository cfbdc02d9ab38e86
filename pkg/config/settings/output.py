from environs import Env

env = Env()

OUTPUT_DIR = env.path("LATTICEQ_OUTPUT_DIR", "runs")
EMIT_PLOTS = env.bool("LATTICEQ_EMIT_PLOTS", True)
CSV_FLOAT_FORMAT = ".17g"
SVG_HASH_SALT = "latticeq"
