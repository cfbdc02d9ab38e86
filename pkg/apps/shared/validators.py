import math
from collections.abc import Sequence

from apps.shared.exceptions import ConfigurationError


def validate_positive_int(value, *, name: str, allow_zero: bool = False) -> int:
    if isinstance(value, bool) or int(value) != value:
        raise ConfigurationError(f"{name} must be an integer.", {"field": name})
    value = int(value)
    if value < 0 or (value == 0 and not allow_zero):
        raise ConfigurationError(
            f"{name} must be {'nonnegative' if allow_zero else 'positive'}.",
            {"field": name, "value": value},
        )
    return value


def validate_finite(value, *, name: str) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ConfigurationError(f"{name} must be finite.", {"field": name})
    return value


def validate_tolerance(value, *, name: str) -> float:
    value = validate_finite(value, name=name)
    if not 0.0 < value < 1.0:
        raise ConfigurationError(
            f"{name} must lie in (0, 1).", {"field": name, "value": value}
        )
    return value


def validate_int_vector(values: Sequence, *, name: str, dim: int | None = None) -> tuple:
    try:
        vector = tuple(int(v) for v in values)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"{name} must be a sequence of integers.") from exc
    if any(int(v) != v for v in values):
        raise ConfigurationError(f"{name} must contain integers only.", {"field": name})
    if dim is not None and len(vector) != dim:
        raise ConfigurationError(
            f"{name} has dimension {len(vector)}, expected {dim}.",
            {"field": name, "expected": dim, "got": len(vector)},
        )
    return vector


def validate_dimension_match(*, expected: int, got: int, what: str) -> None:
    if expected != got:
        raise ConfigurationError(
            f"Dimension mismatch for {what}: expected {expected}, got {got}.",
            {"expected": expected, "got": got, "what": what},
        )
