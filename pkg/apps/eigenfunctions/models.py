"""Lattice functions that solve (or nearly solve) H psi = E psi.

Every evaluator maps an (N, d) integer site array to N complex amplitudes.
Separable evaluators expose their one-block factors so box sums can be
computed block by block.
"""

from __future__ import annotations

import abc
import enum
from dataclasses import dataclass, field

import numpy as np

from apps.lattice.models import LatticeBox, TrimPattern
from apps.lattice.selectors import site_indices
from apps.shared.exceptions import ConfigurationError, DomainError
from apps.shared.validators import validate_dimension_match
from apps.transport.models import GrowthWeight

# Sites per chunk when a quadrature superposition is evaluated.
EVALUATION_CHUNK = 4096


class LatticeFunction(abc.ABC):
    @property
    @abc.abstractmethod
    def dim(self) -> int: ...

    @property
    @abc.abstractmethod
    def energy(self) -> float: ...

    @abc.abstractmethod
    def values(self, sites: np.ndarray) -> np.ndarray: ...

    def factors(self) -> tuple[LatticeFunction, ...]:
        return (self,)

    def __call__(self, sites) -> np.ndarray:
        sites = np.asarray(sites, dtype=np.int64)
        if sites.ndim == 1:
            sites = sites.reshape(1, -1)
        validate_dimension_match(expected=self.dim, got=sites.shape[1], what="evaluator sites")
        return np.asarray(self.values(sites), dtype=complex)


@dataclass(frozen=True, eq=False)
class PlaneWave(LatticeFunction):
    """amplitude * e^{i theta.n}, or amplitude * cos(theta.n) when ``real``."""

    theta: tuple[float, ...]
    amplitude: complex = 1.0
    real: bool = False

    @property
    def dim(self) -> int:
        return len(self.theta)

    @property
    def energy(self) -> float:
        return float(sum(2 * np.cos(t) for t in self.theta))

    def values(self, sites):
        phase = sites @ np.asarray(self.theta, dtype=float)
        wave = np.cos(phase) if self.real else np.exp(1j * phase)
        return self.amplitude * wave

    def factors(self):
        if self.real or self.dim == 1:
            return (self,)
        first = PlaneWave(theta=(self.theta[0],), amplitude=self.amplitude)
        return (first, *(PlaneWave(theta=(t,)) for t in self.theta[1:]))


@dataclass(frozen=True, eq=False)
class TrimmedPlaneWave(LatticeFunction):
    """prod_i sin(pi k_i n_i / rho_i) * prod_j e^{i kappa_j n_{d1+j}}.

    Vanishes on every site of the pattern's sublattice.
    """

    pattern: TrimPattern
    k: tuple[int, ...]
    kappa: tuple[float, ...]

    @property
    def dim(self) -> int:
        return self.pattern.dim

    @property
    def frequencies(self) -> np.ndarray:
        return np.pi * np.asarray(self.k, dtype=float) / np.asarray(self.pattern.rho, dtype=float)

    @property
    def energy(self) -> float:
        trimmed = 2 * np.cos(self.frequencies).sum() if self.k else 0.0
        free = 2 * np.cos(np.asarray(self.kappa, dtype=float)).sum() if self.kappa else 0.0
        return float(trimmed + free)

    def values(self, sites):
        d1 = self.pattern.d1
        result = np.ones(len(sites), dtype=complex)
        if d1:
            result *= np.prod(np.sin(sites[:, :d1] * self.frequencies), axis=1)
            # sin(pi * k * m) is not exactly zero in floating point
            result[np.any(sites[:, :d1] % np.asarray(self.pattern.rho) == 0, axis=1)] = 0.0
        if self.kappa:
            result *= np.exp(1j * (sites[:, d1:] @ np.asarray(self.kappa, dtype=float)))
        return result

    def factors(self):
        parts = [
            TrimmedPlaneWave(pattern=TrimPattern(d1=1, d2=0, rho=(rho,)), k=(k,), kappa=())
            for k, rho in zip(self.k, self.pattern.rho, strict=True)
        ]
        parts += [PlaneWave(theta=(kappa,)) for kappa in self.kappa]
        return tuple(parts)


class QuadratureRule(enum.Enum):
    MIDPOINT = "midpoint"
    GAUSS = "gauss"


@dataclass(frozen=True, eq=False)
class TransverseSolution(LatticeFunction):
    """A superposition over the cube S_e = [center - radius, center + radius]^m.

    Each node theta contributes e^{i k theta_plus(theta)} e^{i n.theta} with
    2 cos(theta_plus) + sum_j 2 cos(theta_j) = e, so every node solves the
    free equation on Z x Z^m exactly.
    """

    target_energy: float
    m: int
    nodes: np.ndarray
    theta_plus: np.ndarray
    weights: np.ndarray
    center: float
    radius: float
    rule: QuadratureRule

    @property
    def dim(self) -> int:
        return self.m + 1

    @property
    def energy(self) -> float:
        return self.target_energy

    def node_energies(self) -> np.ndarray:
        return 2 * np.cos(self.theta_plus) + 2 * np.cos(self.nodes).sum(axis=1)

    def values(self, sites):
        result = np.empty(len(sites), dtype=complex)
        phases = np.column_stack([self.theta_plus, self.nodes])
        for start in range(0, len(sites), EVALUATION_CHUNK):
            chunk = sites[start : start + EVALUATION_CHUNK].astype(float)
            result[start : start + EVALUATION_CHUNK] = np.exp(1j * (chunk @ phases.T)) @ self.weights
        return result

    def scaled(self, factor: complex) -> TransverseSolution:
        return TransverseSolution(
            target_energy=self.target_energy,
            m=self.m,
            nodes=self.nodes,
            theta_plus=self.theta_plus,
            weights=self.weights * factor,
            center=self.center,
            radius=self.radius,
            rule=self.rule,
        )


@dataclass(frozen=True, eq=False)
class TransferMatrixSolution(LatticeFunction):
    """A one-dimensional solution tabulated on [start, start + len(table))."""

    solution_energy: float
    start: int
    table: np.ndarray

    @property
    def dim(self) -> int:
        return 1

    @property
    def energy(self) -> float:
        return self.solution_energy

    @property
    def stop(self) -> int:
        return self.start + len(self.table) - 1

    def values(self, sites):
        offsets = sites[:, 0] - self.start
        if offsets.size and (offsets.min() < 0 or offsets.max() >= len(self.table)):
            raise ConfigurationError(
                f"Transfer-matrix solution is tabulated on [{self.start}, {self.stop}] only.",
                {"start": self.start, "stop": self.stop},
            )
        return self.table[offsets]


@dataclass(frozen=True, eq=False)
class ProductSolution(LatticeFunction):
    """Tensor product over consecutive coordinate blocks; energies add."""

    parts: tuple[LatticeFunction, ...]

    def __post_init__(self):
        if not self.parts:
            raise ConfigurationError("A product solution needs at least one factor.")

    @property
    def dim(self) -> int:
        return sum(part.dim for part in self.parts)

    @property
    def energy(self) -> float:
        return float(sum(part.energy for part in self.parts))

    def values(self, sites):
        result = np.ones(len(sites), dtype=complex)
        offset = 0
        for part in self.parts:
            result *= part(sites[:, offset : offset + part.dim])
            offset += part.dim
        return result

    def factors(self):
        return tuple(f for part in self.parts for f in part.factors())


@dataclass(frozen=True, eq=False)
class BoxVectorFunction(LatticeFunction):
    """A vector on the sites of a box, extended by zero outside it."""

    box: LatticeBox
    grid: np.ndarray
    vector_energy: float

    @property
    def dim(self) -> int:
        return self.box.dim

    @property
    def energy(self) -> float:
        return self.vector_energy

    def values(self, sites):
        inside = np.abs(sites - np.asarray(self.box.center)).max(axis=1) <= self.box.radius
        result = np.zeros(len(sites), dtype=complex)
        result[inside] = self.grid[site_indices(box=self.box, sites=sites[inside])]
        return result


@dataclass(frozen=True, eq=False)
class GrowthProfile:
    """Box sums of a lattice function around ``base_site`` for L = 1..L_max.

    ``nu`` is the least-squares growth exponent of W over the largest decade
    of L, clamped to [0, 1). ``amplitude`` is the smallest A with W(L) <= A L^nu
    for every measured L.
    """

    base_site: tuple[int, ...]
    weight: GrowthWeight
    radii: np.ndarray
    shell_sums: np.ndarray
    weighted_sums: np.ndarray
    box_norms: np.ndarray
    amplitude: float
    nu: float
    raw_slope: float
    intercept: float
    fit_residual: float

    @property
    def clamped(self) -> bool:
        return self.nu != self.raw_slope

    def bound(self, radius) -> np.ndarray:
        return self.amplitude * np.asarray(radius, dtype=float) ** self.nu


@dataclass(frozen=True, eq=False)
class BoundaryGrowthReport:
    energy: float
    base_site: tuple[int, ...]
    delta: float
    decay_constant: float
    psi_at_base: complex
    radii: np.ndarray
    shell_sums: np.ndarray
    thresholds: np.ndarray

    @property
    def ratios(self) -> np.ndarray:
        if self.psi_at_base == 0:
            return np.full(self.radii.shape, np.nan)
        return self.shell_sums / abs(self.psi_at_base)

    @property
    def violations(self) -> list[int]:
        return [int(L) for L, ok in zip(self.radii, self.ratios >= self.thresholds, strict=True) if not ok]

    @property
    def passed(self) -> bool:
        return self.psi_at_base != 0 and not self.violations


@dataclass(frozen=True, eq=False)
class BoundaryRemainder:
    """R(m) = sum_{|k|_1 = 1} [chi_L(m + k) - chi_L(m)] psi(m + k) on the enlarged boundary."""

    box: LatticeBox
    sites: np.ndarray
    values: np.ndarray

    @property
    def l1_norm(self) -> float:
        return float(np.abs(self.values).sum())

    def table(self) -> dict[tuple[int, ...], complex]:
        return {tuple(int(c) for c in s): complex(v) for s, v in zip(self.sites, self.values, strict=True)}


@dataclass(frozen=True, eq=False)
class ExponentialGrowthFit:
    """Largest |psi| on each enlarged shell and the envelope c1 e^{c2 |n|} below it."""

    radii: np.ndarray
    sites: np.ndarray
    magnitudes: np.ndarray
    c1: float
    c2: float


@dataclass(frozen=True, eq=False)
class TrimmedEnergySet:
    nodal: np.ndarray
    printed: np.ndarray
    reproduced: np.ndarray
    energies: np.ndarray = field(default_factory=lambda: np.zeros(0))


def require_k_in_range(*, k: tuple[int, ...], rho: tuple[int, ...]) -> None:
    for k_i, rho_i in zip(k, rho, strict=True):
        if k_i % rho_i == 0:
            raise DomainError(
                f"Mode number {k_i} is a multiple of rho={rho_i}; the trimmed factor vanishes identically.",
                {"k": list(k), "rho": list(rho)},
            )
