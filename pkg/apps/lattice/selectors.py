import functools
import math

import numpy as np

from apps.lattice.models import LatticeBox, Shell, TrimPattern
from apps.shared.exceptions import ConfigurationError
from apps.shared.validators import validate_dimension_match, validate_int_vector


@functools.lru_cache(maxsize=16)
def _site_array(box: LatticeBox) -> np.ndarray:
    offsets = np.indices(box.shape, dtype=np.int64).reshape(box.dim, -1).T
    sites = offsets - box.radius + np.asarray(box.center, dtype=np.int64)
    sites.setflags(write=False)
    return sites


def box_site_array(*, box: LatticeBox) -> np.ndarray:
    """Sites of the box as an (N, d) array in lexicographic order."""
    return _site_array(box)


def box_sites(*, box: LatticeBox) -> list[tuple[int, ...]]:
    return [tuple(int(c) for c in row) for row in _site_array(box)]


def site_index(*, box: LatticeBox, site) -> int:
    site = validate_int_vector(site, name="site", dim=box.dim)
    if not box.contains(site):
        raise ConfigurationError(
            f"Site {site} lies outside the box of radius {box.radius} around {box.center}.",
            {"site": list(site)},
        )
    offsets = tuple(s - c + box.radius for s, c in zip(site, box.center, strict=True))
    return int(np.ravel_multi_index(offsets, box.shape))


def site_indices(*, box: LatticeBox, sites: np.ndarray) -> np.ndarray:
    sites = np.asarray(sites, dtype=np.int64).reshape(-1, box.dim)
    offsets = sites - np.asarray(box.center) + box.radius
    return np.ravel_multi_index(tuple(offsets.T), box.shape)


def sup_distance(*, sites: np.ndarray, origin) -> np.ndarray:
    sites = np.asarray(sites, dtype=np.int64)
    return np.abs(sites - np.asarray(origin, dtype=np.int64)).max(axis=-1)


def box_sup_distance(*, box: LatticeBox) -> np.ndarray:
    return sup_distance(sites=_site_array(box), origin=box.center)


def shell_site_array(*, shell: Shell) -> np.ndarray:
    box = shell.box
    outer = box.grown(1)
    sites = _site_array(outer)
    dist = sup_distance(sites=sites, origin=box.center)
    return sites[np.isin(dist, shell.radii)]


def shell_sites(*, shell: Shell) -> set[tuple[int, ...]]:
    return {tuple(int(c) for c in row) for row in shell_site_array(shell=shell)}


def gamma_contains(*, pattern: TrimPattern, site) -> bool:
    site = validate_int_vector(site, name="site")
    validate_dimension_match(expected=pattern.dim, got=len(site), what="site")
    if pattern.full:
        return True
    return any(site[i] % pattern.rho[i] == 0 for i in range(pattern.d1))


def gamma_mask(*, pattern: TrimPattern, sites: np.ndarray) -> np.ndarray:
    sites = np.asarray(sites, dtype=np.int64)
    validate_dimension_match(expected=pattern.dim, got=sites.shape[-1], what="sites")
    if pattern.full:
        return np.ones(sites.shape[:-1], dtype=bool)
    mask = np.zeros(sites.shape[:-1], dtype=bool)
    for i, rho in enumerate(pattern.rho):
        mask |= sites[..., i] % rho == 0
    return mask


def gamma_density(*, pattern: TrimPattern) -> float:
    """Asymptotic fraction of Gamma-sites, by inclusion-exclusion."""
    if pattern.full:
        return 1.0
    return 1.0 - math.prod(1.0 - 1.0 / r for r in pattern.rho)


def box_gamma_fraction(*, box: LatticeBox, pattern: TrimPattern) -> float:
    validate_dimension_match(expected=pattern.dim, got=box.dim, what="box")
    return float(gamma_mask(pattern=pattern, sites=_site_array(box)).mean())
