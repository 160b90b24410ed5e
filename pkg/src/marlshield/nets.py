"""Small fully connected networks with hand-written backward passes.

No autograd: each Mlp caches its forward activations and exposes backward()
returning both parameter gradients and the gradient with respect to the
input. The input gradient is what lets a policy gradient flow through a
value network into the policy that produced part of its input.

Hidden layers are rectified-linear; the output head is either linear (value
estimates) or a saturating tanh scaled to the action box (policies).
"""

from __future__ import annotations

import math

import numpy as np


class Mlp:
    """Feed-forward net over float64 arrays; single sample or batch inputs."""

    def __init__(self, dims, head: str = "linear", head_scale: float = 1.0, rng=None):
        if len(dims) < 2:
            raise ValueError("dims needs at least input and output sizes")
        if head not in ("linear", "tanh"):
            raise ValueError(f"unknown head {head!r}")
        self.dims = tuple(int(d) for d in dims)
        self.head = head
        self.head_scale = float(head_scale)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for i, (din, dout) in enumerate(zip(self.dims[:-1], self.dims[1:])):
            if i == len(self.dims) - 2:
                w = rng.uniform(-1e-3, 1e-3, size=(din, dout))
            else:
                w = rng.normal(0.0, math.sqrt(2.0 / din), size=(din, dout))
            self.weights.append(w)
            self.biases.append(np.zeros(dout))
        self._cache = None

    @property
    def n_params(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    def parameters(self):
        """Flat list of parameter arrays in declaration order (W0, b0, W1, b1, ...)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def copy(self) -> "Mlp":
        clone = Mlp.__new__(Mlp)
        clone.dims = self.dims
        clone.head = self.head
        clone.head_scale = self.head_scale
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        clone._cache = None
        return clone

    def forward(self, x) -> np.ndarray:
        """Run the net, caching activations for a subsequent backward()."""
        arr = np.asarray(x, dtype=float)
        squeeze = arr.ndim == 1
        a = arr.reshape(1, -1) if squeeze else arr
        if a.shape[1] != self.dims[0]:
            raise ValueError(f"expected input width {self.dims[0]}, got {a.shape[1]}")
        activations = [a]
        n_layers = len(self.weights)
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w + b
            if i < n_layers - 1:
                a = np.maximum(z, 0.0)
            elif self.head == "tanh":
                a = self.head_scale * np.tanh(z)
            else:
                a = z
            activations.append(a)
        self._cache = (activations, squeeze)
        return a[0] if squeeze else a

    def backward(self, grad_out):
        """Gradients of sum(grad_out * output) from the latest forward().

        Returns (param_grads, grad_input): param_grads pairs up with
        parameters(); grad_input has the shape of the forward input.
        """
        if self._cache is None:
            raise RuntimeError("backward() requires a preceding forward()")
        activations, squeeze = self._cache
        g = np.asarray(grad_out, dtype=float)
        if squeeze:
            g = g.reshape(1, -1)
        if self.head == "tanh":
            y = activations[-1]
            g = g * (self.head_scale - y * y / self.head_scale)
        grads = [None] * (2 * len(self.weights))
        for i in range(len(self.weights) - 1, -1, -1):
            a_prev = activations[i]
            grads[2 * i] = a_prev.T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ self.weights[i].T
            if i > 0:
                g = g * (activations[i] > 0.0)
        return grads, (g[0] if squeeze else g)


class Adam:
    """Adaptive moment optimizer over one net's parameters, default coefficients."""

    def __init__(self, net: Mlp, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.net = net
        self.lr = float(lr)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        params = net.parameters()
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads) -> None:
        """Descend along grads (pass negated gradients to ascend)."""
        params = self.net.parameters()
        if len(grads) != len(params):
            raise ValueError("gradient list does not match parameter list")
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            if not np.all(np.isfinite(g)):
                raise FloatingPointError("non-finite gradient")
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            p -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


def soft_update(target: Mlp, online: Mlp, xi: float) -> Mlp:
    """Blend target parameters toward online ones: theta' <- xi*theta + (1-xi)*theta'."""
    t_params = target.parameters()
    o_params = online.parameters()
    if len(t_params) != len(o_params):
        raise ValueError("network architectures differ")
    for tp, op in zip(t_params, o_params):
        if tp.shape != op.shape:
            raise ValueError(f"parameter shape mismatch: {tp.shape} vs {op.shape}")
        tp *= 1.0 - xi
        tp += xi * op
    return target
