"""Adam with a linear warmup/decay schedule, plus global-norm clipping."""

from __future__ import annotations

import logging

import numpy as np

log = logging.getLogger(__name__)


class NonFiniteGradientError(FloatingPointError):
    """A gradient contained NaN or Inf; the update was not applied."""


def linear_schedule(step, peak_lr, warmup, total_steps):
    """Learning rate at ``step`` (1-based update index).

    Rises linearly to ``peak_lr`` over ``warmup`` steps, then decays
    linearly to 0 at ``total_steps``.  ``warmup == 0`` means no warmup.
    """
    if warmup > 0 and step < warmup:
        return peak_lr * step / warmup
    if total_steps <= warmup:
        return peak_lr
    return peak_lr * max(0.0, total_steps - step) / (total_steps - warmup)


def global_norm(params):
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float(np.sum(np.square(p.grad, dtype=np.float64)))
    return float(np.sqrt(total))


def grad_clip(params, max_norm):
    """Rescale gradients in place so their global L2 norm is at most ``max_norm``.

    Returns the norm before clipping.
    """
    if max_norm <= 0:
        raise ValueError(f"max_norm must be positive, got {max_norm}")
    params = list(params)
    norm = global_norm(params)
    if norm > max_norm:
        factor = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad = p.grad * p.grad.dtype.type(factor)
    return norm


class Adam:
    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8,
                 warmup=0, total_steps=0):
        self.params = list(params)
        self.peak_lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.warmup = warmup
        self.total_steps = total_steps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def current_lr(self, step=None):
        step = self.t + 1 if step is None else step
        if self.total_steps <= 0:
            return self.peak_lr
        return linear_schedule(step, self.peak_lr, self.warmup, self.total_steps)

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self, lr=None):
        """Apply one update; ``lr`` overrides the schedule when given."""
        for i, p in enumerate(self.params):
            if p.grad is not None and not np.all(np.isfinite(p.grad)):
                log.warning("non-finite gradient in parameter %d, update rejected", i)
                raise NonFiniteGradientError(f"non-finite gradient in parameter {i} of shape {p.shape}")
        lr = self.current_lr() if lr is None else lr
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            update = (m / c1) / (np.sqrt(v / c2) + self.eps)
            p.data -= np.asarray(lr * update, dtype=p.data.dtype)
        return lr

    def state_dict(self):
        return {"t": self.t, "m": self.m, "v": self.v}
