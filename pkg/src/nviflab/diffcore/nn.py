"""Network building blocks: linear layers, the GRU cell, reparameterized sampling."""
from __future__ import annotations

import numpy as np

from .tensor import Tensor, add, as_tensor, concat, exp, matmul, mul, sigmoid, sub, tanh

LOG_SIGMA_MIN = -10.0
LOG_SIGMA_MAX = 4.0


def init_linear(rng: np.random.Generator, fan_in: int, fan_out: int,
                dtype=np.float32, scale: float | None = None):
    """Weight/bias arrays with N(0, scale^2) weights; scale defaults to sqrt(2/fan_in)."""
    if scale is None:
        scale = np.sqrt(2.0 / fan_in)
    w = (rng.standard_normal((fan_in, fan_out)) * scale).astype(dtype)
    b = np.zeros(fan_out, dtype=dtype)
    return w, b


def affine(x, w, b) -> Tensor:
    return add(matmul(x, w), b)


GRU_PARAM_NAMES = ("w_z", "b_z", "w_r", "b_r", "w_n", "b_n")


def init_gru(rng: np.random.Generator, input_width: int, hidden_width: int, dtype=np.float32):
    """Parameter dict for :func:`gru_cell`; gate weights act on [x, h]."""
    params = {}
    for gate in ("z", "r", "n"):
        w, b = init_linear(rng, input_width + hidden_width, hidden_width, dtype,
                           scale=np.sqrt(1.0 / (input_width + hidden_width)))
        params[f"w_{gate}"] = w
        params[f"b_{gate}"] = b
    return params


def gru_cell(x, h, params) -> Tensor:
    """One gated-recurrent-unit step.

    z = sigmoid(W_z [x, h] + b_z)
    r = sigmoid(W_r [x, h] + b_r)
    n = tanh(W_n [x, r*h] + b_n)
    h' = (1 - z) * h + z * n
    """
    x, h = as_tensor(x), as_tensor(h)
    xh = concat([x, h], axis=1)
    z = sigmoid(affine(xh, params["w_z"], params["b_z"]))
    r = sigmoid(affine(xh, params["w_r"], params["b_r"]))
    xrh = concat([x, mul(r, h)], axis=1)
    n = tanh(affine(xrh, params["w_n"], params["b_n"]))
    return add(mul(sub(1.0, z), h), mul(z, n))


def gaussian_sample(mu, log_sigma, rng: np.random.Generator | None = None,
                    eps: np.ndarray | None = None) -> Tensor:
    """Reparameterized draw mu + exp(log_sigma) * eps, eps ~ N(0, I).

    Pass ``eps`` explicitly to pin the noise (finite-difference checks need the
    same draw on every forward evaluation).
    """
    mu, log_sigma = as_tensor(mu), as_tensor(log_sigma)
    if eps is None:
        if rng is None:
            raise ValueError("gaussian_sample: provide rng or eps")
        eps = rng.standard_normal(mu.data.shape).astype(mu.data.dtype)
    return add(mu, mul(exp(log_sigma), eps))
