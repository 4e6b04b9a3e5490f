"""Small dense networks with hand-written backprop, in float64.

Forward, backward and the Adam step are plain numpy; backward returns
both parameter gradients and the gradient w.r.t. the input (the policy
update needs Q-network input gradients).
"""

from __future__ import annotations

import numpy as np

_ACTIVATIONS = ("relu", "tanh")


class Mlp:
    def __init__(self, layer_sizes: list[int], activation: str = "relu",
                 rng: np.random.Generator | None = None):
        if len(layer_sizes) < 2:
            raise ValueError("need at least input and output sizes")
        if activation not in _ACTIVATIONS:
            raise ValueError(f"activation must be one of {_ACTIVATIONS}")
        rng = rng or np.random.default_rng(0)
        self.layer_sizes = list(layer_sizes)
        self.activation = activation
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            scale = np.sqrt(2.0 / fan_in) if activation == "relu" else np.sqrt(1.0 / fan_in)
            self.weights.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def _act(self, z: np.ndarray) -> np.ndarray:
        if self.activation == "relu":
            return np.maximum(z, 0.0)
        return np.tanh(z)

    def _act_grad(self, z: np.ndarray, a: np.ndarray) -> np.ndarray:
        if self.activation == "relu":
            return (z > 0.0).astype(np.float64)
        return 1.0 - a * a

    def forward(self, x: np.ndarray) -> np.ndarray:
        h = np.atleast_2d(np.asarray(x, dtype=np.float64))
        last = self.n_layers - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = self._act(h)
        return h

    def forward_cache(self, x: np.ndarray):
        """Forward pass keeping per-layer inputs and pre-activations."""
        h = np.atleast_2d(np.asarray(x, dtype=np.float64))
        inputs = [h]
        zs = []
        last = self.n_layers - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = inputs[-1] @ w + b
            zs.append(z)
            h = self._act(z) if i < last else z
            inputs.append(h)
        return h, (inputs, zs)

    def backward(self, cache, d_out: np.ndarray):
        """Backprop a gradient at the output; returns (param_grads, d_input).

        param_grads is a flat list [dW0, db0, dW1, db1, ...] matching
        ``param_list``.
        """
        inputs, zs = cache
        grads: list[np.ndarray] = [None] * (2 * self.n_layers)
        delta = np.asarray(d_out, dtype=np.float64)
        for i in range(self.n_layers - 1, -1, -1):
            if i < self.n_layers - 1:
                delta = delta * self._act_grad(zs[i], inputs[i + 1])
            grads[2 * i] = inputs[i].T @ delta
            grads[2 * i + 1] = delta.sum(axis=0)
            delta = delta @ self.weights[i].T
        return grads, delta

    def param_list(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def param_vector(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.param_list()])

    def set_param_vector(self, vec: np.ndarray) -> None:
        pos = 0
        for p in self.param_list():
            n = p.size
            p[...] = vec[pos:pos + n].reshape(p.shape)
            pos += n
        if pos != vec.size:
            raise ValueError(f"vector has {vec.size} entries, nets needs {pos}")

    def copy(self) -> "Mlp":
        dup = Mlp.__new__(Mlp)
        dup.layer_sizes = list(self.layer_sizes)
        dup.activation = self.activation
        dup.weights = [w.copy() for w in self.weights]
        dup.biases = [b.copy() for b in self.biases]
        return dup


class Adam:
    """Adaptive-moment step (beta1 0.9, beta2 0.999, eps 1e-8)."""

    def __init__(self, params: list[np.ndarray],
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params: list[np.ndarray], grads: list[np.ndarray],
             lr: float) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m[...] = self.beta1 * m + (1.0 - self.beta1) * g
            v[...] = self.beta2 * v + (1.0 - self.beta2) * (g * g)
            p -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
