from apps.cli.views import (
    BorelView,
    CertifyView,
    CombesThomasView,
    ContrastView,
    EigenfunctionView,
    EvolveView,
    ExperimentView,
    GreenView,
    MomentsView,
    SpectrumView,
)
from apps.shared.exceptions import ConfigurationError

subcommand_patterns: list[type[ExperimentView]] = [
    SpectrumView,
    EvolveView,
    MomentsView,
    GreenView,
    EigenfunctionView,
    CombesThomasView,
    BorelView,
    ContrastView,
    CertifyView,
]


def resolve(name: str) -> type[ExperimentView]:
    for view in subcommand_patterns:
        if view.name == name:
            return view
    raise ConfigurationError(
        f"Unknown subcommand {name!r}.", {"known": [view.name for view in subcommand_patterns]}
    )
