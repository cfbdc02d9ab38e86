import json
from pathlib import Path

import factory


class ModelBlockFactory(factory.DictFactory):
    """A one-dimensional Anderson chain block."""

    dim = 1
    radius = 20
    full = True
    potential = "iid_uniform"
    width = 2.0
    seed = factory.Sequence(lambda n: 4200 + n)


class ExperimentConfigFactory(factory.DictFactory):
    model = factory.SubFactory(ModelBlockFactory)
    observable = factory.Dict({"q": 2.0, "times": [1.0, 2.0, 3.0, 4.0, 5.0]})
    tolerances = factory.Dict({"containment": "off"})


def write_config(directory: Path, config: dict, name: str = "run.json") -> Path:
    path = Path(directory) / name
    path.write_text(json.dumps(config))
    return path
