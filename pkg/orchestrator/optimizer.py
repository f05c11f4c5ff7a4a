"""
AdamW with decoupled weight decay, linear warmup into cosine decay, and
global-norm gradient clipping.
"""

import math
from typing import Dict, List, Sequence, Tuple

import numpy as np

from autodiff import Parameter
from errors import ConfigurationError


class OptimizerState:
    """
    Moment buffers for the trainable parameters handed in at construction.

    Args:
        named_params: (name, Parameter) pairs; frozen ones are rejected
        lr: Peak learning rate
        total_steps: Length of the schedule
        warmup_fraction: Share of steps spent in linear warmup
        weight_decay: Decoupled decay coefficient
        grad_clip: Maximum global gradient norm
    """

    betas: Tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8

    def __init__(
        self,
        named_params: Sequence[Tuple[str, Parameter]],
        lr: float,
        total_steps: int,
        warmup_fraction: float = 0.1,
        weight_decay: float = 0.05,
        grad_clip: float = 1.0,
    ):
        frozen = [name for name, p in named_params if not p.trainable]
        if frozen:
            raise ConfigurationError(f"optimizer was given frozen parameters: {frozen[:3]}")
        self.params: Dict[str, Parameter] = dict(named_params)
        self.lr = lr
        self.total_steps = max(total_steps, 1)
        self.warmup_steps = int(round(warmup_fraction * total_steps))
        self.weight_decay = weight_decay
        self.grad_clip = grad_clip
        self.step_count = 0
        self.m = {name: np.zeros_like(p.data) for name, p in self.params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in self.params.items()}

    @classmethod
    def for_model(cls, model, cfg) -> "OptimizerState":
        """Optimizer over every trainable parameter of `model`."""
        named = [(name, p) for name, p in model.named_parameters() if p.trainable]
        return cls(named, cfg.lr, cfg.steps, cfg.warmup_fraction, cfg.weight_decay, cfg.grad_clip)

    def learning_rate(self, step: int) -> float:
        if self.warmup_steps and step < self.warmup_steps:
            return self.lr * (step + 1) / self.warmup_steps
        span = max(self.total_steps - self.warmup_steps, 1)
        progress = min((step - self.warmup_steps) / span, 1.0)
        return self.lr * 0.5 * (1.0 + math.cos(math.pi * progress))

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self) -> Dict[str, float]:
        """Apply one update from the accumulated gradients."""
        grads = {name: (p.grad if p.grad is not None else np.zeros_like(p.data)) for name, p in self.params.items()}
        norm = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
        if norm > self.grad_clip:
            grads = {name: g * (self.grad_clip / norm) for name, g in grads.items()}

        lr = self.learning_rate(self.step_count)
        b1, b2 = self.betas
        t = self.step_count + 1
        for name, p in self.params.items():
            g = grads[name]
            self.m[name] = b1 * self.m[name] + (1 - b1) * g
            self.v[name] = b2 * self.v[name] + (1 - b2) * g * g
            m_hat = self.m[name] / (1 - b1**t)
            v_hat = self.v[name] / (1 - b2**t)
            p.data = p.data * (1 - lr * self.weight_decay) - lr * m_hat / (np.sqrt(v_hat) + self.eps)
        self.step_count += 1
        return {"lr": lr, "grad_norm": norm}

    def names(self) -> List[str]:
        return list(self.params)

    def load_moments(self, m: Dict[str, np.ndarray], v: Dict[str, np.ndarray], step: int) -> None:
        for name in self.params:
            self.m[name] = np.array(m[name], dtype=np.float64)
            self.v[name] = np.array(v[name], dtype=np.float64)
        self.step_count = step
