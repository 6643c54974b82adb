"""Plain-numpy multilayer perceptrons with hand-written backprop.

ReLU hidden layers, linear output. The actor squashes the output with
a sigmoid at the policy level; the critic reads it raw. Everything is
float64; gradients are exact (up to float error), which the
finite-difference tests rely on.
"""

from __future__ import annotations

import numpy as np

from ..errors import DomainError


class Mlp:
    """Fully connected network; parameters live in .weights/.biases."""

    def __init__(self, sizes: tuple[int, ...], rng: np.random.Generator, out_scale: float = 0.01):
        if len(sizes) < 2:
            raise DomainError(f"an MLP needs at least input and output sizes, got {sizes}")
        self.sizes = tuple(int(s) for s in sizes)
        self.weights = []
        self.biases = []
        for i, (fan_in, fan_out) in enumerate(zip(self.sizes, self.sizes[1:])):
            scale = np.sqrt(2.0 / fan_in)
            if i == len(self.sizes) - 2:
                scale = out_scale  # small head keeps the policy near its midpoint at start
            self.weights.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    @property
    def params(self) -> list[np.ndarray]:
        return self.weights + self.biases

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list]:
        """Returns (output (B, out), cache for backward)."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.sizes[0]:
            raise DomainError(
                f"input width {x.shape[1]} does not match network input {self.sizes[0]}"
            )
        activations = [x]
        pre = []
        a = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w + b
            pre.append(z)
            a = z if i == last else np.maximum(z, 0.0)
            activations.append(a)
        return a, [activations, pre]

    def backward(self, cache: list, grad_out: np.ndarray) -> list[np.ndarray]:
        """Gradients w.r.t. every parameter given dLoss/dOutput.

        Returned list aligns with .params (weights then biases).
        """
        activations, pre = cache
        grad_w = [None] * len(self.weights)
        grad_b = [None] * len(self.biases)
        dz = np.asarray(grad_out, dtype=np.float64)
        for i in range(len(self.weights) - 1, -1, -1):
            if i != len(self.weights) - 1:
                dz = dz * (pre[i] > 0.0)
            grad_w[i] = activations[i].T @ dz
            grad_b[i] = dz.sum(axis=0)
            if i:
                dz = dz @ self.weights[i].T
        return grad_w + grad_b

    # -- flat views (finite-difference tests, checkpoints) -----------------

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params])

    def set_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        offset = 0
        for p in self.params:
            p[...] = flat[offset : offset + p.size].reshape(p.shape)
            offset += p.size
        if offset != flat.size:
            raise DomainError(
                f"flat vector of size {flat.size} does not match parameter count {offset}"
            )


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class GaussianActor:
    """Sigmoid-mean MLP plus one trained state-independent log-std."""

    def __init__(self, obs_size: int, hidden: tuple[int, ...], rng: np.random.Generator,
                 log_std_init: float = np.log(0.3)):
        self.mlp = Mlp((obs_size,) + tuple(hidden) + (1,), rng)
        self.log_std = np.array([float(log_std_init)])

    @property
    def params(self) -> list[np.ndarray]:
        return self.mlp.params + [self.log_std]

    def forward(self, obs: np.ndarray) -> tuple[np.ndarray, list]:
        """Returns (mean in (0,1) with shape (B,), cache)."""
        z, cache = self.mlp.forward(obs)
        mean = sigmoid(z[:, 0])
        cache.append(mean)
        return mean, cache

    def backward(self, cache: list, grad_mean: np.ndarray, grad_log_std: float) -> list[np.ndarray]:
        mean = cache[-1]
        dz = (grad_mean * mean * (1.0 - mean))[:, None]
        grads = self.mlp.backward(cache[:2], dz)
        return grads + [np.array([float(grad_log_std)])]

    def get_flat(self) -> np.ndarray:
        return np.concatenate([self.mlp.get_flat(), self.log_std])

    def set_flat(self, flat: np.ndarray) -> None:
        self.mlp.set_flat(flat[:-1])
        self.log_std[...] = flat[-1:]


class Critic:
    """Linear-output MLP state-value head."""

    def __init__(self, obs_size: int, hidden: tuple[int, ...], rng: np.random.Generator):
        self.mlp = Mlp((obs_size,) + tuple(hidden) + (1,), rng, out_scale=0.1)

    @property
    def params(self) -> list[np.ndarray]:
        return self.mlp.params

    def forward(self, obs: np.ndarray) -> tuple[np.ndarray, list]:
        v, cache = self.mlp.forward(obs)
        return v[:, 0], cache

    def backward(self, cache: list, grad_v: np.ndarray) -> list[np.ndarray]:
        return self.mlp.backward(cache, np.asarray(grad_v)[:, None])

    def get_flat(self) -> np.ndarray:
        return self.mlp.get_flat()

    def set_flat(self, flat: np.ndarray) -> None:
        self.mlp.set_flat(flat)
