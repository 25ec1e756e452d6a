"""Adam with bias correction; the learning rate is supplied per epoch by the trainer."""
import logging
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from .errors import DivergenceError
from .models import OptimSpec

logger = logging.getLogger(__name__)

Params = Dict[str, np.ndarray]


@dataclass
class AdamState:
    """First and second moment estimates per parameter, and the step counter."""
    m: Params = field(default_factory=dict)
    v: Params = field(default_factory=dict)
    t: int = 0


def gradient_step(params: Params, grads: Params, state: AdamState, optim: OptimSpec,
                  step_index: int, lr: float) -> Tuple[Params, AdamState]:
    """One bias-corrected Adam update.

    Args:
        params: Current parameters by name
        grads: Gradients with the same names and shapes
        state: Moment estimates from the previous step
        optim: Betas and epsilon
        step_index: 1-based step number used for bias correction
        lr: Learning rate for the current epoch

    Returns:
        New parameters and new state; the inputs are left untouched

    Raises:
        DivergenceError: If any gradient is non-finite
    """
    for name, grad in grads.items():
        if not np.all(np.isfinite(grad)):
            raise DivergenceError(f"Non-finite gradient for parameter '{name}'")

    bc1 = 1.0 - optim.beta1 ** step_index
    bc2 = 1.0 - optim.beta2 ** step_index

    new_params = {}
    new_m = {}
    new_v = {}
    for name, value in params.items():
        g = grads[name]
        if g.shape != value.shape:
            raise ValueError(f"Gradient shape {g.shape} does not match parameter '{name}' shape {value.shape}")
        m = optim.beta1 * state.m.get(name, np.zeros_like(value)) + (1.0 - optim.beta1) * g
        v = optim.beta2 * state.v.get(name, np.zeros_like(value)) + (1.0 - optim.beta2) * (g * g)
        new_params[name] = value - lr * (m / bc1) / (np.sqrt(v / bc2) + optim.eps_opt)
        new_m[name] = m
        new_v[name] = v
    return new_params, AdamState(m=new_m, v=new_v, t=step_index)


class Adam:
    """Stateful wrapper around ``gradient_step`` that updates parameter dicts in place."""

    def __init__(self, optim: OptimSpec):
        self.optim = optim
        self.state = AdamState()

    def step(self, params: Params, grads: Params, lr: float):
        updated, self.state = gradient_step(params, grads, self.state, self.optim, self.state.t + 1, lr)
        for name, value in updated.items():
            params[name][...] = value
