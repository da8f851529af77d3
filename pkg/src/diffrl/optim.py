"""Per-agent first-order optimisers.

Each agent owns one optimiser state per parameter group; the moment vectors
never leave the agent (only parameters are exchanged during combination,
unless the moment-averaging ablation is switched on by the caller).  Updates
are deterministic functions of (state, params, grad).
"""

from __future__ import annotations

import numpy as np


class Optimiser:
    """Common interface: ``update(params, grad, lr=None) -> new params``."""

    kind: str

    def __init__(self, lr: float):
        if lr < 0:
            raise ValueError("learning rate must be non-negative")
        self.lr = float(lr)
        self.step_count = 0

    def _check(self, params: np.ndarray, grad: np.ndarray) -> None:
        if params.shape != grad.shape:
            raise ValueError(f"gradient shape {grad.shape} does not match parameters {params.shape}")
        if not np.isfinite(grad).all():
            bad = int(np.flatnonzero(~np.isfinite(grad))[0])
            raise ValueError(
                f"non-finite gradient (first bad coordinate {bad}, value {grad[bad]!r}) "
                f"at step {self.step_count + 1}"
            )

    def update(self, params: np.ndarray, grad: np.ndarray, lr: float | None = None) -> np.ndarray:
        raise NotImplementedError

    def state_vectors(self) -> dict[str, np.ndarray]:
        """Mutable views of the moment vectors, for the averaging ablation."""
        return {}


class Sgd(Optimiser):
    kind = "sgd"

    def update(self, params, grad, lr=None):
        self._check(params, grad)
        self.step_count += 1
        return params - (self.lr if lr is None else lr) * grad


class Adam(Optimiser):
    kind = "adam"

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        super().__init__(lr)
        self.beta1, self.beta2, self.eps = float(beta1), float(beta2), float(eps)
        self.m: np.ndarray | None = None
        self.v: np.ndarray | None = None

    def update(self, params, grad, lr=None):
        self._check(params, grad)
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        elif self.m.shape != params.shape:
            raise ValueError("optimiser state does not match parameter layout")
        self.step_count += 1
        t = self.step_count
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad**2
        m_hat = self.m / (1.0 - self.beta1**t)
        v_hat = self.v / (1.0 - self.beta2**t)
        return params - (self.lr if lr is None else lr) * m_hat / (np.sqrt(v_hat) + self.eps)

    def state_vectors(self):
        return {} if self.m is None else {"m": self.m, "v": self.v}


class RmsProp(Optimiser):
    kind = "rmsprop"

    def __init__(self, lr: float, alpha: float = 0.99, eps: float = 1e-5):
        super().__init__(lr)
        self.alpha, self.eps = float(alpha), float(eps)
        self.sq: np.ndarray | None = None

    def update(self, params, grad, lr=None):
        self._check(params, grad)
        if self.sq is None:
            self.sq = np.zeros_like(params)
        elif self.sq.shape != params.shape:
            raise ValueError("optimiser state does not match parameter layout")
        self.step_count += 1
        self.sq = self.alpha * self.sq + (1.0 - self.alpha) * grad**2
        return params - (self.lr if lr is None else lr) * grad / (np.sqrt(self.sq) + self.eps)

    def state_vectors(self):
        return {} if self.sq is None else {"sq": self.sq}


def make_optimiser(kind: str, lr: float, **hyper) -> Optimiser:
    table = {"sgd": Sgd, "adam": Adam, "rmsprop": RmsProp}
    if kind not in table:
        raise ValueError(f"unknown optimiser kind {kind!r}")
    return table[kind](lr, **hyper)
