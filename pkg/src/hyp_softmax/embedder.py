"""Two-layer feed-forward embedder with manual backpropagation."""
import logging
from typing import Dict, Tuple

import numpy as np

from .errors import ArgumentError
from .models import EmbedderSpec
from .synthdata import make_rng

logger = logging.getLogger(__name__)

Params = Dict[str, np.ndarray]


class Embedder:
    """x -> act(x W1 + b1) W2 + b2.

    Parameters live in ``self.params`` under the keys W1, b1, W2, b2 so the
    optimizer can update them in place.
    """

    def __init__(self, spec: EmbedderSpec):
        self.spec = spec
        rng = make_rng(spec.seed)
        self.params: Params = {
            'W1': self._fan_in_uniform(rng, spec.input_dim, (spec.input_dim, spec.hidden_dim)),
            'b1': self._fan_in_uniform(rng, spec.input_dim, (spec.hidden_dim,)),
            'W2': self._fan_in_uniform(rng, spec.hidden_dim, (spec.hidden_dim, spec.output_dim)),
            'b2': self._fan_in_uniform(rng, spec.hidden_dim, (spec.output_dim,)),
        }

    @staticmethod
    def _fan_in_uniform(rng: np.random.Generator, fan_in: int, shape: Tuple[int, ...]) -> np.ndarray:
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
        """Embed the rows of ``x``; also returns the cache needed by ``backward``."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.spec.input_dim:
            raise ArgumentError(f"Expected inputs of shape (N, {self.spec.input_dim}), got {x.shape}")
        pre = x @ self.params['W1'] + self.params['b1']
        if self.spec.activation == 'relu':
            hidden = np.maximum(pre, 0.0)
        else:
            hidden = np.tanh(pre)
        out = hidden @ self.params['W2'] + self.params['b2']
        return out, {'x': x, 'pre': pre, 'hidden': hidden}

    def embed(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache: Dict[str, np.ndarray], grad_out: np.ndarray) -> Params:
        """Parameter gradients given d loss / d output."""
        hidden = cache['hidden']
        grad_hidden = grad_out @ self.params['W2'].T
        if self.spec.activation == 'relu':
            grad_pre = grad_hidden * (cache['pre'] > 0.0)
        else:
            grad_pre = grad_hidden * (1.0 - hidden ** 2)
        return {
            'W1': cache['x'].T @ grad_pre,
            'b1': grad_pre.sum(axis=0),
            'W2': hidden.T @ grad_out,
            'b2': grad_out.sum(axis=0),
        }
