import logging
from collections.abc import Sequence

import numpy as np

from apps.eigenfunctions.models import GrowthProfile
from apps.shared.exceptions import ConfigurationError, DomainError, PreconditionError
from apps.shared.validators import validate_finite
from apps.transport.models import DelocalizationCertificate, MomentSeries, TransportFit
from config import settings

logger = logging.getLogger(__name__)

MIN_FIT_POINTS = 5


def fit_transport_exponent(
    *, series: MomentSeries, window: tuple[float, float] | None = None
) -> TransportFit:
    """Least-squares slope of log value against log T over ``window``."""
    times, values = series.times, series.values
    if window is not None:
        lo, hi = window
        keep = (times >= lo) & (times <= hi)
        times, values = times[keep], values[keep]
    if times.size < MIN_FIT_POINTS:
        raise ConfigurationError(
            f"Fitting needs at least {MIN_FIT_POINTS} T values in the window, got {times.size}.",
            {"window": window, "points": int(times.size)},
        )
    if np.any(values <= 0):
        raise DomainError(
            "Moment values must be positive to fit on a log scale.",
            {"nonpositive": times[values <= 0].tolist()},
        )
    x, y = np.log(times), np.log(values)
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return TransportFit(
        slope=float(slope), intercept=float(intercept), fit_residual=residual, points=int(times.size)
    )


def delocalization_certificate(
    *,
    profile: GrowthProfile,
    psi_at_base: complex,
    times,
    alpha: float | None = None,
) -> DelocalizationCertificate:
    """Lower-bound curve (2T)^(1 - alpha nu) |psi(n0)|^2 / (4A) implied by a growth profile."""
    alpha = settings.CERTIFICATE_ALPHA if alpha is None else validate_finite(alpha, name="alpha")
    if alpha < 1:
        raise ConfigurationError("alpha must be at least 1.", {"alpha": alpha})
    if profile.raw_slope >= 1:
        raise PreconditionError(
            "Growth exponent nu >= 1: no delocalization certificate is available.",
            {"raw_slope": profile.raw_slope},
        )
    magnitude = abs(complex(psi_at_base))
    if magnitude == 0:
        raise PreconditionError("psi vanishes at the base site.", {"base_site": list(profile.base_site)})
    times = np.asarray(times, dtype=float)
    bound = (2 * times) ** (1 - alpha * profile.nu) * magnitude**2 / (4 * profile.amplitude)
    return DelocalizationCertificate(
        alpha=alpha,
        nu=profile.nu,
        amplitude=profile.amplitude,
        psi_at_base=magnitude,
        times=times,
        bound=bound,
    )


def uniform_growth_constant(*, profiles: Sequence[GrowthProfile]) -> tuple[float, float]:
    """One (A, nu) with W(L) <= A L^nu for every profile and every measured L."""
    if not profiles:
        raise ConfigurationError("At least one growth profile is required.")
    nu = max(profile.nu for profile in profiles)
    amplitude = max(
        float(np.max(profile.weighted_sums / profile.radii.astype(float) ** nu)) for profile in profiles
    )
    logger.debug("uniform growth constant over %d profiles: A=%.4g nu=%.4f", len(profiles), amplitude, nu)
    return amplitude, nu
