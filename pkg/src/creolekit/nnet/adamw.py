"""Adaptive-moment optimizer with decoupled weight decay.

Decay is applied directly to the weights (not through the moments), so sweeping
the decay value changes regularization strength without touching the adaptive
step. Moments are bias-corrected.
"""

import numpy as np

from .encoder import EncoderParams


class AdamW:
    def __init__(self, params: EncoderParams, lr=3e-4, weight_decay=0.01,
                 beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.weight_decay = weight_decay
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.tensors.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.tensors.items()}

    def step(self, params: EncoderParams, grads: dict[str, np.ndarray], lr: float | None = None) -> None:
        """One in-place update of params from grads."""
        lr = self.lr if lr is None else lr
        for name, g in grads.items():
            if not np.all(np.isfinite(g)):
                raise ValueError(f"non-finite gradient in {name}")
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, w in params.tensors.items():
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            if self.weight_decay:
                update = update + self.weight_decay * w
            w -= lr * update
