from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from apps.hamiltonians.models import PotentialSpec
from apps.lattice.models import LatticeBox


@dataclass(frozen=True, eq=False)
class CombesThomasReport:
    """Per-distance maxima of |G_z(n0, m)| over interior sites against (2/delta) e^{-c delta r}."""

    z: complex
    source: tuple[int, ...]
    delta: float
    decay_constant: float
    distances: np.ndarray
    max_green: np.ndarray
    thresholds: np.ndarray
    fitted_rate: float

    @property
    def violations(self) -> np.ndarray:
        return self.distances[self.max_green > self.thresholds]

    @property
    def holds(self) -> bool:
        return self.violations.size == 0

    @property
    def bound_rate(self) -> float:
        return self.decay_constant * self.delta

    def rows(self):
        for r, value, bound in zip(self.distances, self.max_green, self.thresholds, strict=True):
            yield int(r), float(value), float(bound)


@dataclass(frozen=True, eq=False)
class BorelScalingReport:
    """Both factors of |psi(n)|^2 <= [eps^g Im G(n,n)] [eps^(1-g) sum_{Lambda_L(n)} |psi|^2].

    Arrays indexed [eps] or [alpha, eps]; ``lhs`` and ``rhs`` add a leading
    gamma axis. ``remainders`` is |(G R_L)(n)|, the boundary term the printed
    inequality drops.
    """

    site: tuple[int, ...]
    energy: float
    psi_at_site: float
    gammas: np.ndarray
    alphas: np.ndarray
    epsilons: np.ndarray
    imag_green: np.ndarray
    radii: np.ndarray
    box_sums: np.ndarray
    remainders: np.ndarray

    @property
    def lhs(self) -> np.ndarray:
        return self.epsilons[None, :] ** self.gammas[:, None] * self.imag_green[None, :]

    @property
    def rhs(self) -> np.ndarray:
        scale = self.epsilons[None, None, :] ** (1 - self.gammas[:, None, None])
        return scale * self.box_sums[None, :, :]

    @property
    def products(self) -> np.ndarray:
        """lhs * rhs = eps Im G(n,n) sum |psi|^2; independent of gamma."""
        return self.epsilons[None, :] * self.imag_green[None, :] * self.box_sums

    @property
    def margins(self) -> np.ndarray:
        return self.products / self.psi_at_site**2

    @property
    def herglotz(self) -> bool:
        return bool(np.all(self.imag_green > 0))

    @property
    def printed_holds(self) -> np.ndarray:
        return self.products >= self.psi_at_site**2 * (1 - 1e-9)

    @property
    def corrected_holds(self) -> np.ndarray:
        corrected = np.clip(self.psi_at_site - self.remainders, 0.0, None) ** 2
        return self.products >= corrected * (1 - 1e-9)

    def rows(self):
        for gi, gamma in enumerate(self.gammas):
            for ai, alpha in enumerate(self.alphas):
                for ei, eps in enumerate(self.epsilons):
                    yield (
                        float(gamma), float(alpha), float(eps), int(self.radii[ai, ei]),
                        float(self.lhs[gi, ei]), float(self.rhs[gi, ai, ei]),
                        float(self.margins[ai, ei]), float(self.remainders[ai, ei]),
                        bool(self.printed_holds[ai, ei]), bool(self.corrected_holds[ai, ei]),
                    )


@dataclass(frozen=True, eq=False)
class HerglotzReport:
    site: tuple[int, ...]
    energy: float
    epsilons: np.ndarray
    imag_green: np.ndarray
    monotone_from: float

    @property
    def positive(self) -> bool:
        return bool(np.all(self.imag_green > 0))

    @property
    def monotonicity_flags(self) -> np.ndarray:
        """eps values beyond ``monotone_from`` where Im G fails to decrease with eps."""
        order = np.argsort(self.epsilons)
        eps, values = self.epsilons[order], self.imag_green[order]
        rising = np.diff(values) > 0
        beyond = eps[1:] > self.monotone_from
        return eps[1:][rising & beyond]


@dataclass(frozen=True, eq=False)
class EigenvectorResolventReport:
    """For an eigenvector v with eigenvalue lambda, at z = lambda + i eps."""

    eigenvalue: float
    base_site: tuple[int, ...]
    psi_at_base: float
    epsilons: np.ndarray
    resolvent_norms: np.ndarray
    weighted: np.ndarray
    weighted_bounds: np.ndarray

    @property
    def norm_holds(self) -> np.ndarray:
        return self.resolvent_norms >= self.psi_at_base**2 * (1 - 1e-9)

    @property
    def growth_holds(self) -> np.ndarray:
        return self.weighted >= self.weighted_bounds * (1 - 1e-9)


@dataclass(frozen=True)
class ModelConfig:
    """One random model of a contrast study; realizations vary the potential stream."""

    label: str
    box: LatticeBox
    spec: PotentialSpec


@dataclass(frozen=True)
class ContrastRow:
    label: str
    realization: int
    slope: float
    intercept: float
    fit_residual: float


@dataclass(frozen=True, eq=False)
class ContrastReport:
    q: float
    times: np.ndarray
    rows: list[ContrastRow] = field(default_factory=list)
    delocalized_threshold: float = 0.7
    localized_threshold: float = 0.1

    def slopes(self, label: str) -> np.ndarray:
        return np.array([row.slope for row in self.rows if row.label == label])

    def summary(self) -> dict[str, tuple[float, float]]:
        """Mean slope and across-realization spread per model."""
        labels = dict.fromkeys(row.label for row in self.rows)
        return {
            label: (float(self.slopes(label).mean()), float(np.ptp(self.slopes(label))))
            for label in labels
        }

    def delocalized(self, *, trimmed: str, contrast: str) -> bool:
        summary = self.summary()
        return (
            summary[trimmed][0] >= self.delocalized_threshold
            and summary[contrast][0] <= self.localized_threshold
        )
