import factory
import numpy as np

from apps.eigenfunctions.models import BoxVectorFunction, TrimmedPlaneWave
from apps.lattice.models import LatticeBox, TrimPattern
from apps.lattice.selectors import box_site_array


class TrimmedPlaneWaveFactory(factory.Factory):
    class Meta:
        model = TrimmedPlaneWave

    pattern = factory.LazyFunction(lambda: TrimPattern(d1=1, d2=2, rho=(2,)))
    k = (1,)
    kappa = (0.7, 1.3)


def noisy_copy(evaluator, *, radius: int, scale: float, seed: int) -> BoxVectorFunction:
    box = LatticeBox.centered(dim=evaluator.dim, radius=radius)
    sites = box_site_array(box=box)
    rng = np.random.default_rng(seed)
    grid = evaluator(sites) + scale * rng.uniform(-1, 1, size=len(sites))
    return BoxVectorFunction(box=box, grid=grid, vector_energy=evaluator.energy)


def random_box_function(*, dim: int, radius: int, seed: int) -> BoxVectorFunction:
    box = LatticeBox.centered(dim=dim, radius=radius)
    rng = np.random.default_rng(seed)
    grid = rng.standard_normal(box.site_count) + 1j * rng.standard_normal(box.site_count)
    return BoxVectorFunction(box=box, grid=grid, vector_energy=0.0)
