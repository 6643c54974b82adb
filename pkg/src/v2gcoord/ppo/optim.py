"""Adaptive-moment optimizer over lists of parameter arrays."""

from __future__ import annotations

import numpy as np

from ..errors import DomainError


class Adam:
    """Standard bias-corrected first/second-moment update, in place."""

    def __init__(self, params: list, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0:
            raise DomainError(f"learning rate must be > 0, got {lr}")
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params: list, grads: list) -> None:
        if len(params) != len(self.m) or len(grads) != len(self.m):
            raise DomainError(
                f"optimizer tracks {len(self.m)} arrays, got {len(params)} params / {len(grads)} grads"
            )
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            if p.shape != g.shape:
                raise DomainError(f"gradient shape {g.shape} does not match parameter {p.shape}")
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def state_dict(self) -> dict:
        return {
            "lr": self.lr,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "t": self.t,
            "m": [a.tolist() for a in self.m],
            "v": [a.tolist() for a in self.v],
        }

    @classmethod
    def from_state(cls, params: list, state: dict) -> "Adam":
        opt = cls(params, lr=state["lr"], beta1=state["beta1"], beta2=state["beta2"], eps=state["eps"])
        opt.t = int(state["t"])
        opt.m = [np.asarray(a, dtype=np.float64) for a in state["m"]]
        opt.v = [np.asarray(a, dtype=np.float64) for a in state["v"]]
        for p, m in zip(params, opt.m):
            if p.shape != m.shape:
                raise DomainError("optimizer state does not match parameter shapes")
        return opt
