from environs import Env

env = Env()

SOLVER_TOL = env.float("LATTICEQ_SOLVER_TOL", 1e-8)
PROPAGATION_TOL = env.float("LATTICEQ_PROPAGATION_TOL", 1e-6)
DENSE_SIZE_CAP = env.int("LATTICEQ_DENSE_SIZE_CAP", 6000)

# Chebyshev scaling keeps the rescaled spectrum strictly inside (-1, 1).
CHEBYSHEV_SPECTRAL_MARGIN = 0.01

# Time quadrature: samples every TIME_STEP, Romberg panels of 2**ROMBERG_LEVEL steps.
TIME_STEP = env.float("LATTICEQ_TIME_STEP", 0.25)
ROMBERG_LEVEL = 5

# Energy quadrature: Gauss-Legendre panels whose width is the resonance width
# 1/(2T) divided by ENERGY_PANELS_PER_WIDTH.
ENERGY_PANEL_ORDER = 8
ENERGY_PANELS_PER_WIDTH = 1.0
ENERGY_WINDOW_PADDING = 10.0

SOLVER_METHOD = env.str("LATTICEQ_SOLVER_METHOD", "auto")
GMRES_RESTART = 60
GMRES_MAXITER = 400

CERTIFICATE_ALPHA = 1.05
INTERIOR_MARGIN = 3

CONTAINMENT_MARGIN = 5
CONTAINMENT_POLICY = env.str("LATTICEQ_CONTAINMENT_POLICY", "error")
