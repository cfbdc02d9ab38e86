"""Finite-volume Schrödinger operators H = H0 + V on a lattice box."""

from __future__ import annotations

import enum
import math
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from apps.lattice.models import LatticeBox, TrimPattern
from apps.lattice.selectors import gamma_contains, site_index
from apps.shared.exceptions import ConfigurationError
from apps.shared.validators import (
    validate_dimension_match,
    validate_finite,
    validate_int_vector,
    validate_positive_int,
)


class PotentialVariant(enum.Enum):
    ZERO = "zero"
    TABLE = "table"
    IID_UNIFORM = "iid_uniform"


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """A potential supported on the sublattice of ``support``.

    ``table`` maps sites to values and is only read for the table variant.
    Random variants are keyed by ``(seed, realization)``.
    """

    variant: PotentialVariant
    support: TrimPattern
    table: Mapping[tuple[int, ...], float] = field(default_factory=dict)
    width: float = 0.0
    seed: int = 0
    realization: int = 0

    def __post_init__(self):
        object.__setattr__(self, "variant", PotentialVariant(self.variant))
        if self.variant is PotentialVariant.IID_UNIFORM:
            width = validate_finite(self.width, name="width")
            if width <= 0:
                raise ConfigurationError("Disorder width must be positive.", {"width": width})
            object.__setattr__(self, "width", width)
            object.__setattr__(
                self, "seed", validate_positive_int(self.seed, name="seed", allow_zero=True)
            )
            if self.seed >= 2**64:
                raise ConfigurationError("seed must fit in 64 bits.", {"seed": self.seed})
            object.__setattr__(
                self,
                "realization",
                validate_positive_int(self.realization, name="realization", allow_zero=True),
            )
        if self.variant is PotentialVariant.TABLE:
            object.__setattr__(self, "table", self._clean_table(self.table))

    def _clean_table(self, table: Mapping) -> dict[tuple[int, ...], float]:
        cleaned = {}
        for site, value in table.items():
            site = validate_int_vector(site, name="table site", dim=self.support.dim)
            value = validate_finite(value, name=f"V{site}")
            if value and not gamma_contains(pattern=self.support, site=site):
                raise ConfigurationError(
                    f"Potential table assigns {value} to {site}, which lies off the support.",
                    {"site": list(site)},
                )
            cleaned[site] = value
        return cleaned

    @classmethod
    def zero(cls, dim: int) -> PotentialSpec:
        return cls(variant=PotentialVariant.ZERO, support=TrimPattern.untrimmed(dim))

    @classmethod
    def from_table(cls, *, support: TrimPattern, table: Mapping) -> PotentialSpec:
        return cls(variant=PotentialVariant.TABLE, support=support, table=table)

    @classmethod
    def iid_uniform(
        cls, *, support: TrimPattern, width: float, seed: int, realization: int = 0
    ) -> PotentialSpec:
        return cls(
            variant=PotentialVariant.IID_UNIFORM,
            support=support,
            width=width,
            seed=seed,
            realization=realization,
        )

    @property
    def dim(self) -> int:
        return self.support.dim

    @property
    def sup_bound(self) -> float:
        """A bound on ||V||_inf that holds for every realization."""
        if self.variant is PotentialVariant.IID_UNIFORM:
            return self.width / 2
        if self.variant is PotentialVariant.TABLE:
            return max((abs(v) for v in self.table.values()), default=0.0)
        return 0.0

    def with_realization(self, realization: int) -> PotentialSpec:
        return PotentialSpec(
            variant=self.variant,
            support=self.support,
            table=self.table,
            width=self.width,
            seed=self.seed,
            realization=realization,
        )


@dataclass(frozen=True, eq=False)
class SparseHamiltonian:
    """H restricted to a set of box sites with links leaving the set dropped.

    ``sites`` lists the rows of ``matrix``; for a plain box it is the full
    lexicographic enumeration, for a restriction a subset of it.
    """

    box: LatticeBox
    matrix: sparse.csr_array
    diagonal: np.ndarray
    potential_sup: float
    sites: np.ndarray
    restricted: bool = False

    @property
    def dim(self) -> int:
        return self.box.dim

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def matvec(self, vector: np.ndarray) -> np.ndarray:
        return self.matrix @ vector

    def index_of(self, site) -> int:
        site = validate_int_vector(site, name="site")
        validate_dimension_match(expected=self.dim, got=len(site), what="site")
        if not self.restricted:
            return site_index(box=self.box, site=site)
        hits = np.flatnonzero((self.sites == np.asarray(site)).all(axis=1))
        if not hits.size:
            raise ConfigurationError(
                f"Site {site} is not part of the restricted operator.", {"site": list(site)}
            )
        return int(hits[0])

    @property
    def norm_bound(self) -> float:
        return 2 * self.dim + self.potential_sup

    def __repr__(self) -> str:
        return (
            f"SparseHamiltonian(dim={self.dim}, sites={self.size}, "
            f"radius={self.box.radius}, |V|<={self.potential_sup:g})"
        )


def hopping_count(box: LatticeBox) -> int:
    """Number of undirected nearest-neighbor links inside the box."""
    return box.dim * (box.side - 1) * math.prod([box.side] * (box.dim - 1))
