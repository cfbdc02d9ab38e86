"""Experiment configuration: JSON schema validation and construction of domain objects."""

import json
import logging
from pathlib import Path

import numpy as np
from marshmallow import Schema, ValidationError, fields, validate, validates_schema

from apps.eigenfunctions.models import LatticeFunction, QuadratureRule
from apps.eigenfunctions.services import (
    make_eigenvector_function,
    make_plane_wave,
    make_transfer_matrix_solution,
    make_trimmed_transverse_wave,
    make_trimmed_wave,
)
from apps.hamiltonians.models import PotentialSpec, PotentialVariant, SparseHamiltonian
from apps.hamiltonians.services import assemble, potential_table_import, sample_potential
from apps.lattice.models import LatticeBox, TrimPattern
from apps.numerics.services import dense_eig
from apps.shared.exceptions import ConfigurationError
from apps.transport.models import ContainmentPolicy, GrowthWeight, MomentRoute, WeightVariant

logger = logging.getLogger(__name__)

ROUTE_CHOICES = [route.value for route in MomentRoute] + ["all"]
EIGENFUNCTION_KINDS = ["plane", "trimmed", "transverse", "transfer", "eigenvector"]
REQUIRED_MESSAGE = "Missing data for required field."

open_unit = validate.Range(min=0, max=1, min_inclusive=False, max_inclusive=False)
positive = validate.Range(min=0, min_inclusive=False)


def _nested(schema: type[Schema]) -> fields.Nested:
    """An optional block whose defaults apply when the block is omitted."""
    return fields.Nested(schema, load_default=lambda: schema().load({}))


class ModelSchema(Schema):
    dim = fields.Integer(required=True, validate=validate.Range(min=1, max=9))
    d1 = fields.Integer(load_default=0, validate=validate.Range(min=0))
    rho = fields.List(fields.Integer(validate=validate.Range(min=2)), load_default=list)
    full = fields.Boolean(load_default=False)
    radius = fields.Integer(required=True, validate=validate.Range(min=0))
    grow = fields.Boolean(load_default=False)
    potential = fields.String(
        load_default=PotentialVariant.ZERO.value,
        validate=validate.OneOf([variant.value for variant in PotentialVariant]),
    )
    width = fields.Float(load_default=0.0, validate=validate.Range(min=0))
    seed = fields.Integer(load_default=0, validate=validate.Range(min=0, max=2**64 - 1))
    realization = fields.Integer(load_default=0, validate=validate.Range(min=0))
    realizations = fields.Integer(load_default=1, validate=validate.Range(min=1))
    table = fields.String(load_default=None, allow_none=True)

    @validates_schema
    def validate_pattern(self, data, **kwargs):
        if data["d1"] > data["dim"]:
            raise ValidationError("d1 cannot exceed dim.", "d1")
        if len(data["rho"]) != data["d1"]:
            raise ValidationError(f"rho needs exactly d1={data['d1']} entries.", "rho")
        if data["full"] and data["d1"]:
            raise ValidationError("The full lattice carries no trimmed directions.", "full")
        if data["potential"] == PotentialVariant.IID_UNIFORM.value and data["width"] <= 0:
            raise ValidationError("Disorder width must be positive.", "width")
        if data["potential"] == PotentialVariant.TABLE.value and not data["table"]:
            raise ValidationError("A table potential needs a CSV path.", "table")


class LabelledModelSchema(ModelSchema):
    label = fields.String(required=True, validate=validate.Length(min=1))


class ObservableSchema(Schema):
    weight = fields.String(
        load_default=WeightVariant.POWER.value,
        validate=validate.OneOf([variant.value for variant in WeightVariant]),
    )
    q = fields.Float(load_default=2.0, validate=validate.Range(min=0))
    table = fields.String(load_default=None, allow_none=True)
    certificate = fields.List(fields.Float(), load_default=None, validate=validate.Length(equal=2))
    base_site = fields.List(fields.Integer(), load_default=None)
    times = fields.List(fields.Float(validate=positive), load_default=None)
    t_min = fields.Float(load_default=None, validate=positive)
    t_max = fields.Float(load_default=None, validate=positive)
    t_points = fields.Integer(load_default=None, validate=validate.Range(min=2))

    @validates_schema
    def validate_grid(self, data, **kwargs):
        geometric = [data["t_min"], data["t_max"], data["t_points"]]
        if data["times"] is not None and any(v is not None for v in geometric):
            raise ValidationError("Give either times or t_min/t_max/t_points, not both.", "times")
        if any(v is not None for v in geometric):
            if any(v is None for v in geometric):
                raise ValidationError("t_min, t_max and t_points go together.", "t_points")
            if data["t_max"] <= data["t_min"]:
                raise ValidationError("t_max must exceed t_min.", "t_max")
        if data["weight"] == WeightVariant.TABLE.value:
            if not data["table"]:
                raise ValidationError("A table weight needs a CSV path.", "table")
            if data["certificate"] is None:
                raise ValidationError("A table weight needs a certificate [C, beta].", "certificate")


class RouteSchema(Schema):
    name = fields.String(load_default=MomentRoute.ABEL.value, validate=validate.OneOf(ROUTE_CHOICES))
    kind = fields.String(
        load_default=MomentRoute.ABEL.value,
        validate=validate.OneOf([MomentRoute.ABEL.value, MomentRoute.CESARO.value]),
    )
    fit_window = fields.List(fields.Float(), load_default=None, validate=validate.Length(equal=2))


class ToleranceSchema(Schema):
    time_tol = fields.Float(load_default=None, validate=open_unit)
    solve_tol = fields.Float(load_default=None, validate=open_unit)
    containment = fields.String(
        load_default=None,
        allow_none=True,
        validate=validate.OneOf([policy.value for policy in ContainmentPolicy]),
    )


class ResourceSchema(Schema):
    max_sites = fields.Integer(load_default=None, validate=validate.Range(min=1))
    max_wall_seconds = fields.Float(load_default=None, validate=positive)
    dense_size_cap = fields.Integer(load_default=None, validate=validate.Range(min=1))


class OutputSchema(Schema):
    directory = fields.String(load_default=None, allow_none=True)
    plots = fields.Boolean(load_default=None, allow_none=True)


class SpectrumSchema(Schema):
    window = fields.List(fields.Float(), load_default=None, validate=validate.Length(equal=2))


class EvolveSchema(Schema):
    times = fields.List(fields.Float(validate=validate.Range(min=0)), required=True)
    min_probability = fields.Float(load_default=0.0, validate=validate.Range(min=0))


class GreenSchema(Schema):
    energies = fields.List(fields.Float(), required=True, validate=validate.Length(min=1))
    epsilon = fields.Float(required=True, validate=positive)
    source = fields.List(fields.Integer(), load_default=None)


class EigenfunctionSchema(Schema):
    kind = fields.String(required=True, validate=validate.OneOf(EIGENFUNCTION_KINDS))
    theta = fields.List(fields.Float(), load_default=None)
    amplitude = fields.Float(load_default=1.0)
    real = fields.Boolean(load_default=False)
    k = fields.List(fields.Integer(), load_default=None)
    kappa = fields.List(fields.Float(), load_default=None)
    e = fields.Float(load_default=None)
    resolution = fields.Integer(load_default=16, validate=validate.Range(min=1))
    rule = fields.String(
        load_default=QuadratureRule.MIDPOINT.value,
        validate=validate.OneOf([rule.value for rule in QuadratureRule]),
    )
    energy = fields.Float(load_default=None)
    index = fields.Integer(load_default=None, validate=validate.Range(min=0))
    max_radius = fields.Integer(load_default=20, validate=validate.Range(min=2))

    @validates_schema
    def validate_kind(self, data, **kwargs):
        needed = {
            "plane": ["theta"],
            "trimmed": ["k", "kappa"],
            "transverse": ["k", "e"],
            "transfer": ["energy"],
            "eigenvector": ["index"],
        }[data["kind"]]
        missing = {name: [REQUIRED_MESSAGE] for name in needed if data[name] is None}
        if missing:
            raise ValidationError(missing)


class CombesThomasSchema(Schema):
    z_real = fields.Float(required=True)
    z_imag = fields.Float(load_default=0.0)
    source = fields.List(fields.Integer(), load_default=None)
    max_distance = fields.Integer(load_default=None, validate=validate.Range(min=1))
    distance_method = fields.String(load_default="auto", validate=validate.OneOf(["auto", "dense", "window"]))


class BorelSchema(Schema):
    energy = fields.Float(load_default=None)
    site = fields.List(fields.Integer(), load_default=None)
    gammas = fields.List(fields.Float(validate=validate.Range(min=0, max=1)), required=True)
    alphas = fields.List(fields.Float(validate=validate.Range(min=1, min_inclusive=False)), required=True)
    epsilons = fields.List(fields.Float(validate=positive), required=True)


class ContrastSchema(Schema):
    models = fields.List(fields.Nested(LabelledModelSchema), required=True, validate=validate.Length(min=1))
    realizations = fields.Integer(load_default=1, validate=validate.Range(min=1))
    route = fields.String(
        load_default=MomentRoute.ABEL.value,
        validate=validate.OneOf([r.value for r in MomentRoute if r is not MomentRoute.RESOLVENT]),
    )
    trimmed = fields.String(load_default=None, allow_none=True)
    reference = fields.String(load_default=None, allow_none=True)

    @validates_schema
    def validate_labels(self, data, **kwargs):
        labels = [model["label"] for model in data["models"]]
        if len(set(labels)) != len(labels):
            raise ValidationError("Model labels must be unique.", "models")
        for name in ("trimmed", "reference"):
            if data[name] is not None and data[name] not in labels:
                raise ValidationError(f"No model is labelled {data[name]!r}.", name)


class CertifySchema(Schema):
    alpha = fields.Float(load_default=None, validate=validate.Range(min=1))


class ExperimentSchema(Schema):
    model = fields.Nested(ModelSchema, load_default=None)
    observable = _nested(ObservableSchema)
    route = _nested(RouteSchema)
    tolerances = _nested(ToleranceSchema)
    resources = _nested(ResourceSchema)
    output = _nested(OutputSchema)
    spectrum = _nested(SpectrumSchema)
    evolve = fields.Nested(EvolveSchema, load_default=None)
    green = fields.Nested(GreenSchema, load_default=None)
    eigenfunction = fields.Nested(EigenfunctionSchema, load_default=None)
    combes_thomas = fields.Nested(CombesThomasSchema, load_default=None)
    borel = fields.Nested(BorelSchema, load_default=None)
    contrast = fields.Nested(ContrastSchema, load_default=None)
    certify = _nested(CertifySchema)


def flatten_messages(messages, prefix: str = "") -> dict[str, list[str]]:
    """Nested marshmallow messages keyed by dotted field path."""
    if not isinstance(messages, dict):
        return {prefix or "_schema": list(messages) if isinstance(messages, list) else [str(messages)]}
    flat = {}
    for key, value in messages.items():
        path = f"{prefix}.{key}" if prefix else str(key)
        flat.update(flatten_messages(value, path))
    return flat


def _parse_override(item: str) -> tuple[list[str], object]:
    key, sep, raw = item.partition("=")
    if not sep or not key:
        raise ConfigurationError(
            f"Override {item!r} is not of the form key=value.", {"fields": {"--override": [item]}}
        )
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.split("."), value


def apply_overrides(raw: dict, overrides) -> dict:
    for item in overrides or []:
        path, value = _parse_override(item)
        node = raw
        for part in path[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigurationError(
                    f"Override {item!r} descends into a non-block value.",
                    {"fields": {".".join(path): ["Not a block."]}},
                )
            node = child
        node[path[-1]] = value
    return raw


def _resolve_path(value: str | None, *, base_dir: Path) -> str | None:
    if value is None:
        return None
    path = Path(value)
    return str(path if path.is_absolute() else base_dir / path)


def load_config(*, path, overrides=None, seed: int | None = None) -> dict:
    """Read, override and validate an experiment file; returns the resolved config."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigurationError(f"Config file {path} does not exist.", {"path": str(path)}) from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(
            f"Config file {path} is not valid JSON: {exc.msg}.",
            {"path": str(path), "line": exc.lineno, "column": exc.colno},
        ) from exc
    if not isinstance(raw, dict):
        raise ConfigurationError("The config file must hold a JSON object.", {"path": str(path)})
    raw = apply_overrides(raw, overrides)
    if seed is not None:
        if isinstance(raw.get("model"), dict):
            raw["model"]["seed"] = seed
        for model in (raw.get("contrast") or {}).get("models") or []:
            if isinstance(model, dict):
                model["seed"] = seed
    try:
        config = ExperimentSchema().load(raw)
    except ValidationError as exc:
        fields_ = flatten_messages(exc.normalized_messages())
        raise ConfigurationError(
            f"Config {path} failed validation at {', '.join(sorted(fields_))}.", {"fields": fields_}
        ) from exc

    base_dir = path.parent
    models = [config["model"]] if config["model"] else []
    models += config["contrast"]["models"] if config["contrast"] else []
    for model in models:
        model["table"] = _resolve_path(model["table"], base_dir=base_dir)
    config["observable"]["table"] = _resolve_path(config["observable"]["table"], base_dir=base_dir)
    logger.debug("loaded config %s", path)
    return config


def require_blocks(config: dict, names) -> None:
    missing = {name: [REQUIRED_MESSAGE] for name in names if config.get(name) is None}
    if missing:
        raise ConfigurationError(
            f"This subcommand needs the {', '.join(missing)} block(s).", {"fields": missing}
        )


def build_pattern(model: dict) -> TrimPattern:
    if model["full"]:
        return TrimPattern.full_lattice(model["dim"])
    return TrimPattern(d1=model["d1"], d2=model["dim"] - model["d1"], rho=tuple(model["rho"]))


def build_box(model: dict) -> LatticeBox:
    return LatticeBox.centered(dim=model["dim"], radius=model["radius"])


def build_spec(model: dict) -> PotentialSpec:
    variant = PotentialVariant(model["potential"])
    pattern = build_pattern(model)
    if variant is PotentialVariant.IID_UNIFORM:
        return PotentialSpec.iid_uniform(
            support=pattern, width=model["width"], seed=model["seed"], realization=model["realization"]
        )
    if variant is PotentialVariant.TABLE:
        table = potential_table_import(path=Path(model["table"]), dim=model["dim"])
        return PotentialSpec.from_table(support=pattern, table=table)
    return PotentialSpec.zero(model["dim"])


def build_realizations(model: dict):
    """Yield (realization, box, spec) for every requested realization of the model."""
    box, spec = build_box(model), build_spec(model)
    first = model["realization"]
    for realization in range(first, first + model["realizations"]):
        yield realization, box, spec.with_realization(realization)


def build_hamiltonians(model: dict):
    """Yield (realization, H) for every requested realization of the model."""
    for realization, box, spec in build_realizations(model):
        yield realization, assemble(box=box, spec=spec)


def build_base_site(observable: dict, *, box: LatticeBox) -> tuple[int, ...]:
    if observable["base_site"] is None:
        return box.center
    base = tuple(observable["base_site"])
    if len(base) != box.dim or not box.contains(base):
        raise ConfigurationError(
            f"Base site {base} does not lie in the box.", {"fields": {"observable.base_site": [str(base)]}}
        )
    return base


def build_weight(observable: dict, *, base) -> GrowthWeight:
    variant = WeightVariant(observable["weight"])
    if variant is WeightVariant.CONSTANT_ONE:
        return GrowthWeight.constant_one()
    if variant is WeightVariant.TABLE:
        table = potential_table_import(path=Path(observable["table"]), dim=len(base))
        return GrowthWeight.from_table(table=table, certificate=tuple(observable["certificate"]))
    return GrowthWeight.power(q=observable["q"], base=base)


def build_times(observable: dict) -> np.ndarray:
    if observable["times"] is not None:
        return np.asarray(observable["times"], dtype=float)
    if observable["t_points"] is not None:
        return np.geomspace(observable["t_min"], observable["t_max"], observable["t_points"])
    raise ConfigurationError(
        "This subcommand needs a T grid.", {"fields": {"observable.times": [REQUIRED_MESSAGE]}}
    )


def build_evaluator(
    block: dict, *, model: dict, hamiltonian: SparseHamiltonian, base
) -> LatticeFunction:
    kind = block["kind"]
    if kind == "plane":
        return make_plane_wave(theta=block["theta"], amplitude=block["amplitude"], real=block["real"])
    if kind == "trimmed":
        return make_trimmed_wave(pattern=build_pattern(model), k=block["k"], kappa=block["kappa"])
    if kind == "transverse":
        return make_trimmed_transverse_wave(
            pattern=build_pattern(model), k=block["k"], e=block["e"],
            resolution=block["resolution"], rule=block["rule"],
        )
    if kind == "transfer":
        if model["dim"] != 1:
            raise ConfigurationError(
                "Transfer-matrix solutions live in d = 1.", {"fields": {"model.dim": [str(model["dim"])]}}
            )
        span = max(model["radius"], abs(base[0]) + block["max_radius"]) + 2
        return make_transfer_matrix_solution(
            energy=block["energy"],
            n_range=(-span, span),
            potential=sample_potential(spec=build_spec(model), box=build_box(model)),
        )
    eigensystem = dense_eig(hamiltonian=hamiltonian)
    if block["index"] >= eigensystem.size:
        raise ConfigurationError(
            f"Eigenvector index {block['index']} is out of range.",
            {"fields": {"eigenfunction.index": [f"must be below {eigensystem.size}"]}},
        )
    return make_eigenvector_function(eigensystem=eigensystem, index=block["index"])
