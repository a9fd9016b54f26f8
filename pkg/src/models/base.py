import math
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict


class Record(BaseModel):
    """Immutable result record; infinities survive JSON as strings."""

    model_config = ConfigDict(
        frozen=True, ser_json_inf_nan="strings", protected_namespaces=()
    )


def _float_token(value: float) -> Any:
    if math.isnan(value):
        return "NaN"
    if math.isinf(value):
        return "Infinity" if value > 0 else "-Infinity"
    return value


def json_safe(obj: Any) -> Any:
    """Plain JSON types with non-finite floats spelled as strings, as pydantic does."""
    if isinstance(obj, BaseModel):
        return json_safe(obj.model_dump(mode="json"))
    if isinstance(obj, dict):
        return {str(key): json_safe(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_safe(value) for value in obj]
    if isinstance(obj, np.ndarray):
        return json_safe(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _float_token(float(obj))
    return obj


def frozen_array(values, ndim: int = None) -> np.ndarray:
    """Float64 copy flagged read-only."""
    arr = np.array(values, dtype=np.float64, copy=True)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr
