import factory
import numpy as np

from apps.hamiltonians.models import PotentialSpec, PotentialVariant
from apps.hamiltonians.services import assemble
from apps.lattice.models import LatticeBox, TrimPattern
from apps.numerics.models import WaveState


class RandomHamiltonianFactory(factory.Factory):
    """An Anderson operator on a small centered box."""

    class Meta:
        model = assemble

    class Params:
        dim = 1
        radius = 10
        width = 3.0
        seed = factory.Sequence(lambda n: 7000 + n)

    box = factory.LazyAttribute(lambda o: LatticeBox.centered(dim=o.dim, radius=o.radius))
    spec = factory.LazyAttribute(
        lambda o: PotentialSpec(
            variant=PotentialVariant.IID_UNIFORM,
            support=TrimPattern.full_lattice(o.dim),
            width=o.width,
            seed=o.seed,
        )
    )


def random_state(hamiltonian, *, seed: int) -> WaveState:
    rng = np.random.default_rng(seed)
    amplitudes = rng.standard_normal(hamiltonian.size) + 1j * rng.standard_normal(hamiltonian.size)
    return WaveState(box=hamiltonian.box, amplitudes=amplitudes / np.linalg.norm(amplitudes))
