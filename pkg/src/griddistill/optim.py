"""The two optimizers the pipeline uses: SGD with momentum for the
synthetic dataset, Adam for the students.

Both are deterministic state machines: the same initial state and gradient
sequence always produce the same iterates.
"""

import numpy as np


class SgdMomentum:
    """v <- momentum*v + g; x <- x - lr*v."""

    def __init__(self, dim: int, lr: float = 0.1, momentum: float = 0.5):
        self.lr = lr
        self.momentum = momentum
        self.velocity = np.zeros(dim, dtype=np.float64)

    def step(self, x: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if x.shape != self.velocity.shape or grad.shape != self.velocity.shape:
            raise ValueError("optimizer state, parameters and gradient lengths disagree")
        self.velocity = self.momentum * self.velocity + grad
        return x - self.lr * self.velocity


class Adam:
    """Bias-corrected Adam with the published default constants."""

    def __init__(
        self,
        dim: int,
        lr: float = 5e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(dim, dtype=np.float64)
        self.v = np.zeros(dim, dtype=np.float64)
        self.t = 0

    def step(self, x: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if x.shape != self.m.shape or grad.shape != self.m.shape:
            raise ValueError("optimizer state, parameters and gradient lengths disagree")
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        return x - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
