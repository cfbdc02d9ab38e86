from __future__ import annotations

import enum
import math
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from apps.shared.exceptions import ConfigurationError
from apps.shared.validators import validate_finite, validate_int_vector


class WeightVariant(enum.Enum):
    POWER = "power"
    CONSTANT_ONE = "constant_one"
    TABLE = "table"


@dataclass(frozen=True, eq=False)
class GrowthWeight:
    """The observable phi(X) whose moments measure transport.

    ``power`` is <n - base>^q with <x> = (1 + |x|^2)^(1/2) in the sup-norm.
    ``table`` values vanish off the table and must stay below
    C * exp(|n|^beta) for the certificate (C, beta), beta < 1.
    """

    variant: WeightVariant
    q: float = 0.0
    base: tuple[int, ...] = ()
    table: Mapping[tuple[int, ...], float] = field(default_factory=dict)
    certificate: tuple[float, float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "variant", WeightVariant(self.variant))
        if self.variant is WeightVariant.POWER:
            q = validate_finite(self.q, name="q")
            if q < 0:
                raise ConfigurationError("Weight exponent q must be nonnegative.", {"q": q})
            object.__setattr__(self, "q", q)
            object.__setattr__(self, "base", validate_int_vector(self.base, name="base"))
        if self.variant is WeightVariant.TABLE:
            object.__setattr__(self, "table", self._clean_table())

    def _clean_table(self) -> dict:
        if self.certificate is None:
            raise ConfigurationError("A table weight needs a subexponential certificate (C, beta).")
        C, beta = (float(v) for v in self.certificate)
        if not (C > 0 and 0 <= beta < 1):
            raise ConfigurationError(
                "Certificate needs C > 0 and 0 <= beta < 1.", {"C": C, "beta": beta}
            )
        cleaned = {}
        for site, value in self.table.items():
            site = validate_int_vector(site, name="weight site")
            value = validate_finite(value, name=f"phi{site}")
            if value < 0:
                raise ConfigurationError(f"Weight at {site} is negative.", {"site": list(site)})
            bound = C * math.exp(max((abs(c) for c in site), default=0) ** beta)
            if value > bound:
                raise ConfigurationError(
                    f"Weight at {site} exceeds the certificate bound {bound:g}.",
                    {"site": list(site), "value": value, "bound": bound},
                )
            cleaned[site] = value
        return cleaned

    @classmethod
    def power(cls, *, q: float, base) -> GrowthWeight:
        return cls(variant=WeightVariant.POWER, q=q, base=tuple(base))

    @classmethod
    def constant_one(cls) -> GrowthWeight:
        return cls(variant=WeightVariant.CONSTANT_ONE)

    @classmethod
    def from_table(cls, *, table: Mapping, certificate: tuple[float, float]) -> GrowthWeight:
        return cls(variant=WeightVariant.TABLE, table=table, certificate=certificate)

    @property
    def radial(self) -> bool:
        """True when phi depends only on the sup-distance to ``base``."""
        return self.variant is not WeightVariant.TABLE

    def radial_values(self, radii: np.ndarray) -> np.ndarray:
        radii = np.asarray(radii, dtype=float)
        if self.variant is WeightVariant.CONSTANT_ONE:
            return np.ones_like(radii)
        return (1.0 + radii**2) ** (self.q / 2)

    def values(self, sites: np.ndarray) -> np.ndarray:
        sites = np.asarray(sites, dtype=np.int64)
        if self.variant is WeightVariant.CONSTANT_ONE:
            return np.ones(len(sites))
        if self.variant is WeightVariant.POWER:
            if len(self.base) != sites.shape[1]:
                raise ConfigurationError(
                    "Weight base site and lattice dimension differ.",
                    {"base": list(self.base), "dim": int(sites.shape[1])},
                )
            radii = np.abs(sites - np.asarray(self.base)).max(axis=1)
            return self.radial_values(radii)
        return np.array([self.table.get(tuple(int(c) for c in s), 0.0) for s in sites])

    def dominated_by(self, other: GrowthWeight, sites: np.ndarray) -> bool:
        return bool(np.all(self.values(sites) <= other.values(sites)))

    def label(self) -> str:
        if self.variant is WeightVariant.POWER:
            return f"power(q={self.q:g})"
        return self.variant.value


class MomentRoute(enum.Enum):
    ABEL = "abel"
    CESARO = "cesaro"
    RESOLVENT = "resolvent"
    SPECTRAL = "spectral"


@dataclass(frozen=True, eq=False)
class MomentSeries:
    """Transport moment values over a T grid, with per-point error estimates."""

    base_site: tuple[int, ...]
    weight: GrowthWeight
    times: np.ndarray
    values: np.ndarray
    errors: np.ndarray
    route: MomentRoute
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0) or np.any(self.times <= 0):
            raise ConfigurationError("T grid must be positive and strictly ascending.")

    def __len__(self) -> int:
        return len(self.times)

    def rows(self):
        for t, value, err in zip(self.times, self.values, self.errors, strict=True):
            yield float(t), float(value), float(err), self.route.value


@dataclass(frozen=True)
class TransportFit:
    slope: float
    intercept: float
    fit_residual: float
    points: int


@dataclass(frozen=True, eq=False)
class DelocalizationCertificate:
    """Predicted lower bound T -> (2T)^(1 - alpha nu) |psi(n0)|^2 / (4A)."""

    alpha: float
    nu: float
    amplitude: float
    psi_at_base: float
    times: np.ndarray
    bound: np.ndarray

    @property
    def exponent(self) -> float:
        return 1.0 - self.alpha * self.nu


@dataclass(frozen=True, eq=False)
class ComparisonReport:
    """Cesaro/Abel ratios per T; the ratio is bounded by e."""

    times: np.ndarray
    abel: np.ndarray
    cesaro: np.ndarray
    abel_errors: np.ndarray
    cesaro_errors: np.ndarray

    @property
    def cesaro_over_abel(self) -> np.ndarray:
        return self.cesaro / self.abel

    @property
    def abel_over_cesaro(self) -> np.ndarray:
        return self.abel / self.cesaro

    @property
    def holds(self) -> bool:
        slack = self.cesaro_errors + math.e * self.abel_errors
        return bool(np.all(self.cesaro <= math.e * self.abel + slack))

    @property
    def printed_form_violations(self) -> np.ndarray:
        """T values where M <= e^-1 * Abel fails."""
        return self.times[self.cesaro > self.abel / math.e]


@dataclass(frozen=True, eq=False)
class ResolventBoundReport:
    """Per-epsilon terms of the resolvent lower bound for one (psi, E, n0)."""

    energy: float
    base_site: tuple[int, ...]
    alpha: float
    nu: float
    amplitude: float
    psi_at_base: float
    epsilons: np.ndarray
    radii: np.ndarray
    near_terms: np.ndarray
    remainder_terms: np.ndarray
    measured: np.ndarray
    printed_bound: np.ndarray
    corrected_bound: np.ndarray
    box_weighted_sums: np.ndarray

    @property
    def remainder_small(self) -> np.ndarray:
        return self.remainder_terms <= abs(self.psi_at_base) / 2

    @property
    def corrected_holds(self) -> np.ndarray:
        return self.measured >= self.corrected_bound * (1 - 1e-9)

    @property
    def printed_holds(self) -> np.ndarray:
        return self.measured >= self.printed_bound


class ContainmentPolicy(enum.Enum):
    ERROR = "error"
    WARN = "warn"
    OFF = "off"


@dataclass(frozen=True, eq=False)
class MomentEstimate:
    value: float
    error: float
    route: MomentRoute
    metadata: dict = field(default_factory=dict)
