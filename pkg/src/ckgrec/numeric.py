"""Dense numeric substrate: Xavier initialization, activations, Adam, and a
central finite-difference gradient oracle.

All tensors are float64 ``numpy`` arrays. Training code accumulates gradients
into plain arrays and applies them through :func:`adam_step`; the
finite-difference oracle exists so tests can cross-check every hand-derived
backward pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .validation import check_positive, check_positive_int

__all__ = [
    "xavier_init",
    "xavier_fill",
    "sigmoid",
    "softplus",
    "tanh",
    "relu",
    "leaky_relu",
    "AdamState",
    "adam_step",
    "finite_diff_grad",
]


def xavier_init(rows: int, cols: int, seed: int) -> np.ndarray:
    """Uniform Xavier/Glorot matrix with bound sqrt(6 / (rows + cols))."""
    check_positive_int("rows", rows)
    check_positive_int("cols", cols)
    rng = np.random.default_rng(seed)
    bound = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-bound, bound, size=(rows, cols))


def xavier_fill(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    """Xavier-uniform tensor drawn from an existing stream.

    Used for model tables whose fan sizes differ from the raw array shape
    (e.g. per-relation projection matrices stored as one 3-d tensor).
    """
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def sigmoid(x):
    """Numerically stable logistic function."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


def softplus(x):
    """log(1 + exp(x)) without overflow; equals -log(sigmoid(-x))."""
    x = np.asarray(x, dtype=np.float64)
    out = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    return out if out.ndim else float(out)


def tanh(x):
    return np.tanh(x)


def relu(x):
    return np.maximum(x, 0.0)


def leaky_relu(x, slope: float = 0.01):
    x = np.asarray(x, dtype=np.float64)
    return np.where(x > 0, x, slope * x)


@dataclass
class AdamState:
    """Adam accumulators for a named collection of parameter tensors.

    ``step`` counts calls to :func:`adam_step`; moment tensors are created
    lazily on first sight of each parameter name.
    """

    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first_moment: dict = field(default_factory=dict)
    second_moment: dict = field(default_factory=dict)

    def __post_init__(self):
        check_positive("learning_rate", self.learning_rate)


def adam_step(
    state: AdamState,
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
) -> Mapping[str, np.ndarray]:
    """One bias-corrected Adam update, in place, over named tensors.

    Parameters absent from ``grads`` are left untouched (their moments do not
    decay either, matching an optimizer that only sees the listed groups).
    """
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    for name in sorted(grads):
        if name not in params:
            raise KeyError(f"gradient for unknown parameter group {name!r}")
        p = params[name]
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != p.shape:
            raise ValueError(
                f"shape mismatch for {name!r}: params {p.shape}, grads {g.shape}"
            )
        if not np.all(np.isfinite(g)):
            raise ValueError(f"non-finite gradient in parameter group {name!r}")
        m = state.first_moment.setdefault(name, np.zeros_like(p))
        v = state.second_moment.setdefault(name, np.zeros_like(p))
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        p -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
    return params


def finite_diff_grad(
    loss_fn: Callable[[np.ndarray], float],
    params: np.ndarray,
    epsilon: float = 1e-5,
) -> np.ndarray:
    """Central-difference gradient estimate, one coordinate at a time.

    ``loss_fn`` must be deterministic in ``params``; the array is restored to
    its original values before returning.
    """
    check_positive("epsilon", epsilon)
    params = np.asarray(params, dtype=np.float64)
    grad = np.zeros_like(params)
    flat = params.reshape(-1)
    gflat = grad.reshape(-1)
    for idx in range(flat.size):
        orig = flat[idx]
        flat[idx] = orig + epsilon
        up = loss_fn(params)
        flat[idx] = orig - epsilon
        down = loss_fn(params)
        flat[idx] = orig
        if not (np.isfinite(up) and np.isfinite(down)):
            raise ValueError(f"loss is not finite near coordinate {idx}")
        gflat[idx] = (up - down) / (2.0 * epsilon)
    return grad
