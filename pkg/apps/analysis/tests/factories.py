import factory

from apps.analysis.models import ModelConfig
from apps.hamiltonians.models import PotentialSpec
from apps.lattice.models import LatticeBox, TrimPattern


class ModelConfigFactory(factory.Factory):
    """A one-dimensional Anderson chain."""

    class Meta:
        model = ModelConfig

    class Params:
        dim = 1
        radius = 40
        width = 10.0
        seed = factory.Sequence(lambda n: 9100 + n)

    label = factory.Sequence(lambda n: f"model-{n}")
    box = factory.LazyAttribute(lambda o: LatticeBox.centered(dim=o.dim, radius=o.radius))
    spec = factory.LazyAttribute(
        lambda o: PotentialSpec.iid_uniform(
            support=TrimPattern.full_lattice(o.dim), width=o.width, seed=o.seed
        )
    )
