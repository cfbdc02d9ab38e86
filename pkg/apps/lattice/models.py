"""Finite-box geometry of Z^d.

Boxes use the sup-norm |n| = max_i |n_i|. The enlarged boundary of a box of
radius L is the union of the shells at sup-distance L and L + 1.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from apps.shared.exceptions import ConfigurationError
from apps.shared.validators import validate_int_vector, validate_positive_int

# Largest site count we can index with a signed 64-bit array.
ADDRESSABLE_SITES = np.iinfo(np.int64).max


@dataclass(frozen=True)
class LatticeBox:
    """The cube Lambda_L(n0) = {n : |n - n0| <= L}."""

    dim: int
    center: tuple[int, ...]
    radius: int

    def __post_init__(self):
        object.__setattr__(self, "dim", validate_positive_int(self.dim, name="dim"))
        object.__setattr__(
            self, "center", validate_int_vector(self.center, name="center", dim=self.dim)
        )
        object.__setattr__(
            self,
            "radius",
            validate_positive_int(self.radius, name="radius", allow_zero=True),
        )
        if self.site_count > ADDRESSABLE_SITES:
            raise ConfigurationError(
                f"Box with side {self.side} in d={self.dim} has more sites than can be addressed.",
                {"side": self.side, "dim": self.dim},
            )

    @classmethod
    def centered(cls, *, dim: int, radius: int) -> LatticeBox:
        return cls(dim=dim, center=(0,) * dim, radius=radius)

    @property
    def side(self) -> int:
        return 2 * self.radius + 1

    @property
    def site_count(self) -> int:
        return math.prod([self.side] * self.dim)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.side,) * self.dim

    def grown(self, by: int) -> LatticeBox:
        return LatticeBox(dim=self.dim, center=self.center, radius=self.radius + by)

    def contains(self, site) -> bool:
        return max(abs(int(a) - b) for a, b in zip(site, self.center, strict=True)) <= self.radius


class ShellKind(enum.Enum):
    INNER = "inner"
    OUTER = "outer"
    ENLARGED = "enlarged"


@dataclass(frozen=True)
class Shell:
    box: LatticeBox
    kind: ShellKind = ShellKind.INNER

    @property
    def radii(self) -> tuple[int, ...]:
        L = self.box.radius
        return {
            ShellKind.INNER: (L,),
            ShellKind.OUTER: (L + 1,),
            ShellKind.ENLARGED: (L, L + 1),
        }[self.kind]


@dataclass(frozen=True)
class TrimPattern:
    """The periodic sublattice Gamma = W_rho^{d1} x Z^{d2}.

    A site belongs to Gamma iff one of its first d1 coordinates is divisible by
    the matching rho_i. ``full`` marks the classical Anderson case Gamma = Z^d.
    """

    d1: int
    d2: int
    rho: tuple[int, ...] = field(default=())
    full: bool = False

    def __post_init__(self):
        object.__setattr__(self, "d1", validate_positive_int(self.d1, name="d1", allow_zero=True))
        object.__setattr__(self, "d2", validate_positive_int(self.d2, name="d2", allow_zero=True))
        rho = validate_int_vector(self.rho, name="rho", dim=self.d1)
        if any(r < 2 for r in rho):
            raise ConfigurationError("Every rho_i must be at least 2.", {"rho": list(rho)})
        object.__setattr__(self, "rho", rho)
        if self.dim < 1:
            raise ConfigurationError("TrimPattern needs d1 + d2 >= 1.")
        if self.full and self.d1:
            raise ConfigurationError("The full-lattice pattern carries no trimmed directions.")

    @classmethod
    def full_lattice(cls, dim: int) -> TrimPattern:
        return cls(d1=0, d2=dim, rho=(), full=True)

    @classmethod
    def untrimmed(cls, dim: int) -> TrimPattern:
        """No Gamma sites at all: d1 = 0, so every potential vanishes."""
        return cls(d1=0, d2=dim, rho=())

    @property
    def dim(self) -> int:
        return self.d1 + self.d2
