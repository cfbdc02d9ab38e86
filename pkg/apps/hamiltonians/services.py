import logging
from pathlib import Path

import numpy as np
from scipy import sparse

from apps.hamiltonians.models import PotentialSpec, PotentialVariant, SparseHamiltonian
from apps.lattice.models import LatticeBox
from apps.lattice.selectors import box_site_array, gamma_mask
from apps.shared.exceptions import ConfigurationError, ResourceCapExceeded
from apps.shared.exporters import csv_read, csv_write
from apps.shared.validators import validate_dimension_match, validate_finite
from config import settings

logger = logging.getLogger(__name__)

# Coordinates are packed into the Philox counter as zigzag-encoded 21-bit
# fields, three per 64-bit word. Word 0 stays free for the generator's own
# block increment.
_COORD_BITS = 21
_COORDS_PER_WORD = 3
_MAX_COORD_DIM = 3 * _COORDS_PER_WORD
_COORD_LIMIT = 1 << (_COORD_BITS - 1)


def _zigzag(value: int) -> int:
    return 2 * value if value >= 0 else -2 * value - 1


def _site_counter(site) -> np.ndarray:
    counter = np.zeros(4, dtype=np.uint64)
    for i, coord in enumerate(site):
        word, slot = divmod(i, _COORDS_PER_WORD)
        counter[word + 1] |= np.uint64(_zigzag(int(coord)) << (slot * _COORD_BITS))
    return counter


def _uniform_at(*, key: np.ndarray, site) -> float:
    bitgen = np.random.Philox(key=key, counter=_site_counter(site))
    raw = int(bitgen.random_raw())
    return (raw >> 11) * 2.0**-53


def potential_values(*, spec: PotentialSpec, sites: np.ndarray) -> np.ndarray:
    """V evaluated at each row of ``sites``; zero off the support."""
    sites = np.asarray(sites, dtype=np.int64)
    validate_dimension_match(expected=spec.dim, got=sites.shape[1], what="potential sites")
    values = np.zeros(len(sites))
    if spec.variant is PotentialVariant.ZERO:
        return values
    on_gamma = np.flatnonzero(gamma_mask(pattern=spec.support, sites=sites))
    if spec.variant is PotentialVariant.TABLE:
        for idx in on_gamma:
            values[idx] = spec.table.get(tuple(int(c) for c in sites[idx]), 0.0)
        return values

    if spec.dim > _MAX_COORD_DIM or (on_gamma.size and np.abs(sites).max() >= _COORD_LIMIT):
        raise ConfigurationError(
            "Sites are outside the range addressable by the site-keyed generator.",
            {"max_dim": _MAX_COORD_DIM, "max_coordinate": _COORD_LIMIT - 1},
        )
    key = np.array([spec.seed, spec.realization], dtype=np.uint64)
    for idx in on_gamma:
        values[idx] = spec.width * (_uniform_at(key=key, site=sites[idx]) - 0.5)
    return values


def sample_potential(*, spec: PotentialSpec, box: LatticeBox) -> dict[tuple[int, ...], float]:
    """Materialize V on the support sites of the box."""
    validate_dimension_match(expected=spec.dim, got=box.dim, what="box")
    sites = box_site_array(box=box)
    mask = gamma_mask(pattern=spec.support, sites=sites)
    values = potential_values(spec=spec, sites=sites[mask])
    return {tuple(int(c) for c in site): float(v) for site, v in zip(sites[mask], values, strict=True)}


def _adjacency(box: LatticeBox) -> sparse.csr_array:
    index = np.arange(box.site_count, dtype=np.int64).reshape(box.shape)
    rows, cols = [], []
    for axis in range(box.dim):
        head = np.take(index, np.arange(box.side - 1), axis=axis).ravel()
        tail = np.take(index, np.arange(1, box.side), axis=axis).ravel()
        rows += [head, tail]
        cols += [tail, head]
    if rows:
        rows, cols = np.concatenate(rows), np.concatenate(cols)
    else:
        rows = cols = np.zeros(0, dtype=np.int64)
    data = np.ones(rows.size)
    return sparse.csr_array((data, (rows, cols)), shape=(box.site_count, box.site_count))


def assemble(*, box: LatticeBox, spec: PotentialSpec) -> SparseHamiltonian:
    """H0 + V on the box with simple boundary conditions."""
    validate_dimension_match(expected=spec.dim, got=box.dim, what="potential")
    if box.site_count > settings.MAX_SITES:
        raise ResourceCapExceeded(
            f"Box with {box.site_count} sites exceeds MAX_SITES={settings.MAX_SITES}.",
            {"sites": box.site_count, "cap": settings.MAX_SITES},
        )
    sites = box_site_array(box=box)
    diagonal = potential_values(spec=spec, sites=sites)
    diagonal.setflags(write=False)
    matrix = (_adjacency(box) + sparse.diags_array(diagonal, format="csr")).tocsr()
    logger.debug("assembled H on %d sites (d=%d, L=%d)", box.site_count, box.dim, box.radius)
    return SparseHamiltonian(
        box=box,
        matrix=matrix,
        diagonal=diagonal,
        potential_sup=max(spec.sup_bound, float(np.abs(diagonal).max(initial=0.0))),
        sites=sites,
    )


def hamiltonian_restrict(*, hamiltonian: SparseHamiltonian, mask: np.ndarray) -> SparseHamiltonian:
    """Keep the sites selected by ``mask`` and drop every link leaving them."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (hamiltonian.size,):
        raise ConfigurationError(
            "Restriction mask must have one entry per site.",
            {"expected": hamiltonian.size, "got": list(mask.shape)},
        )
    keep = np.flatnonzero(mask)
    if not keep.size:
        raise ConfigurationError("Restriction mask selects no sites.")
    matrix = hamiltonian.matrix[keep][:, keep].tocsr()
    diagonal = hamiltonian.diagonal[keep].copy()
    diagonal.setflags(write=False)
    sites = hamiltonian.sites[keep]
    sites.setflags(write=False)
    return SparseHamiltonian(
        box=hamiltonian.box,
        matrix=matrix,
        diagonal=diagonal,
        potential_sup=hamiltonian.potential_sup,
        sites=sites,
        restricted=True,
    )


def hamiltonian_shift(*, hamiltonian: SparseHamiltonian, shift: float) -> SparseHamiltonian:
    shift = validate_finite(shift, name="shift")
    identity = sparse.eye_array(hamiltonian.size, format="csr")
    diagonal = hamiltonian.diagonal + shift
    diagonal.setflags(write=False)
    return SparseHamiltonian(
        box=hamiltonian.box,
        matrix=(hamiltonian.matrix + shift * identity).tocsr(),
        diagonal=diagonal,
        potential_sup=hamiltonian.potential_sup + abs(shift),
        sites=hamiltonian.sites,
        restricted=hamiltonian.restricted,
    )


def two_site_chain() -> SparseHamiltonian:
    """The sites {0, 1} of Z with V = 0: H = [[0, 1], [1, 0]]."""
    box = LatticeBox.centered(dim=1, radius=1)
    full = assemble(box=box, spec=PotentialSpec.zero(1))
    return hamiltonian_restrict(hamiltonian=full, mask=full.sites[:, 0] >= 0)


def potential_table_export(*, table: dict, path: Path) -> Path:
    dim = len(next(iter(table))) if table else 0
    header = [f"n{i + 1}" for i in range(dim)] + ["value"]
    rows = [[*site, value] for site, value in sorted(table.items())]
    return csv_write(path, header=header, rows=rows)


def potential_table_import(*, path: Path, dim: int) -> dict[tuple[int, ...], float]:
    header, rows = csv_read(path)
    expected = [f"n{i + 1}" for i in range(dim)] + ["value"]
    if header != expected:
        raise ConfigurationError(
            f"Potential table {path} has columns {header}, expected {expected}.",
            {"path": str(path)},
        )
    table = {}
    for row in rows:
        try:
            site = tuple(int(c) for c in row[:dim])
            table[site] = float(row[dim])
        except (ValueError, IndexError) as exc:
            raise ConfigurationError(f"Malformed row in {path}: {row}", {"path": str(path)}) from exc
    return table
