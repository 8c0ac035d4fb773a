"""Input validation helpers used by the public API surface."""

from __future__ import annotations

import numbers

import numpy as np


def as_rng(seed_or_rng) -> np.random.Generator:
    """Accept an int seed, a SeedSequence, an existing Generator, or None."""
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def spawn_rng(seed: int, *key: int) -> np.random.Generator:
    """Deterministic named substream of a master seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def check_finite(name: str, arr: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf values")
    return arr


def as_float_vector(name: str, x, dim: int | None = None) -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"{name} must be a 1-d vector, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise ValueError(f"{name} must have dimension {dim}, got {v.shape[0]}")
    return check_finite(name, v)


def as_float_matrix(name: str, x, shape: tuple[int, int] | None = None) -> np.ndarray:
    m = np.asarray(x, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"{name} must be a 2-d matrix, got shape {m.shape}")
    if shape is not None and m.shape != tuple(shape):
        raise ValueError(f"{name} must have shape {tuple(shape)}, got {m.shape}")
    return check_finite(name, m)


def check_positive_int(name: str, value, minimum: int = 1) -> int:
    if not isinstance(value, numbers.Integral):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_positive(name: str, value) -> float:
    if not (isinstance(value, numbers.Real) and value > 0):
        raise ValueError(f"{name} must be a positive number, got {value!r}")
    return float(value)


def check_unit_interval(name: str, value, *, include_one: bool = False) -> float:
    ok = isinstance(value, numbers.Real) and 0.0 <= value and (
        value <= 1.0 if include_one else value < 1.0
    )
    if not ok:
        bound = "[0, 1]" if include_one else "[0, 1)"
        raise ValueError(f"{name} must lie in {bound}, got {value!r}")
    return float(value)


def check_choice(name: str, value: str, choices) -> str:
    if value not in choices:
        raise ValueError(f"{name} must be one of {sorted(choices)}, got {value!r}")
    return value


def check_index(name: str, value, size: int) -> int:
    if not isinstance(value, numbers.Integral):
        raise ValueError(f"{name} must be an integer id, got {value!r}")
    if not 0 <= value < size:
        raise IndexError(f"{name}={value} out of range [0, {size})")
    return int(value)
