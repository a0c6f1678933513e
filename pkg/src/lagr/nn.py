"""Parameter containers used by the encoder and the graph heads."""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .tensor import Tensor


class Module:
    """Tracks parameters through attributes, lists and child modules."""

    def named_parameters(self, prefix=""):
        for name, value in vars(self).items():
            yield from _walk(value, f"{prefix}{name}")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def state_dict(self):
        return {name: p.data for name, p in self.named_parameters()}

    def load_state_dict(self, state):
        own = dict(self.named_parameters())
        missing = set(own) - set(state)
        unexpected = set(state) - set(own)
        if missing or unexpected:
            raise KeyError(f"state mismatch: missing={sorted(missing)} unexpected={sorted(unexpected)}")
        for name, p in own.items():
            arr = np.asarray(state[name])
            if arr.shape != p.shape:
                raise ValueError(f"{name}: checkpoint shape {arr.shape} != parameter shape {p.shape}")
            p.data = arr.astype(np.float32).copy()

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None


def _walk(value, name):
    if isinstance(value, Tensor):
        if value.requires_grad:
            yield name, value
    elif isinstance(value, Module):
        yield from value.named_parameters(prefix=name + ".")
    elif isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            yield from _walk(item, f"{name}.{i}")


class Linear(Module):
    def __init__(self, d_in, d_out, rng, bias=True):
        self.weight = T.uniform_init((d_in, d_out), d_in, rng)
        self.bias = T.zeros((d_out,)) if bias else None

    def __call__(self, x):
        y = x @ self.weight
        return y + self.bias if self.bias is not None else y


class LayerNorm(Module):
    def __init__(self, d, eps=1e-5):
        self.gamma = T.ones((d,))
        self.beta = T.zeros((d,))
        self.eps = eps

    def __call__(self, x):
        return T.layer_norm(x, self.gamma, self.beta, self.eps)
