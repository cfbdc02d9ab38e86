import factory

from apps.lattice.models import LatticeBox, Shell, ShellKind, TrimPattern


class LatticeBoxFactory(factory.Factory):
    class Meta:
        model = LatticeBox

    dim = 1
    radius = 2
    center = factory.LazyAttribute(lambda o: (0,) * o.dim)


class ShellFactory(factory.Factory):
    class Meta:
        model = Shell

    box = factory.SubFactory(LatticeBoxFactory)
    kind = ShellKind.INNER


class TrimPatternFactory(factory.Factory):
    class Meta:
        model = TrimPattern

    d1 = 1
    d2 = 2
    rho = (2,)
