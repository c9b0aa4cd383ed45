from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from lthkit.errors import NonFiniteValue

LOSS_KINDS = ("bpr", "jpq_infonce", "margin_mse")


def sqrt_schedule(beta0: float = 1.0) -> Callable[[int], float]:
    return lambda step: beta0 * math.sqrt(step + 1)


def constant_schedule(beta0: float = 1.0) -> Callable[[int], float]:
    return lambda step: beta0


_SCHEDULES = {"sqrt": sqrt_schedule, "constant": constant_schedule}


@dataclass
class LossConfig:
    """Hyper-parameters for one training run.

    ``beta_schedule`` is either a named schedule ("sqrt", "constant") scaled
    by ``beta0`` or any callable ``step -> beta``.
    """

    loss_kind: str = "bpr"
    alpha: float = 2.0
    beta_schedule: str | Callable[[int], float] = "sqrt"
    beta0: float = 1.0
    learning_rate: float = 1e-2
    batch_size: int = 32
    steps: int = 500
    seed: int = 0
    trainables: tuple[str, ...] = ()  # empty means every parameter the loss touches

    def __post_init__(self):
        if self.loss_kind not in LOSS_KINDS:
            raise ValueError(f"loss_kind must be one of {LOSS_KINDS}, got {self.loss_kind!r}")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        # zero is allowed so a run can be replayed as a pure evaluation pass
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be >= 0")
        if isinstance(self.beta_schedule, str) and self.beta_schedule not in _SCHEDULES:
            raise ValueError(f"unknown beta schedule {self.beta_schedule!r}")
        betas = [self.beta(t) for t in range(min(self.steps, 1000) + 1)]
        if any(b <= 0 for b in betas) or any(b2 < b1 for b1, b2 in zip(betas, betas[1:])):
            raise ValueError("beta schedule must be positive and non-decreasing")
        self.trainables = tuple(self.trainables)

    def beta(self, step: int) -> float:
        if callable(self.beta_schedule):
            return float(self.beta_schedule(step))
        return _SCHEDULES[self.beta_schedule](self.beta0)(step)

    def to_dict(self) -> dict:
        out = asdict(self)
        if callable(self.beta_schedule):
            out["beta_schedule"] = getattr(self.beta_schedule, "__name__", "callable")
        out["trainables"] = list(self.trainables)
        return out


@dataclass
class QueryHead:
    """Linear query encoder stand-in, ``e(q) = W x``, no bias."""

    weight: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.weight = np.array(self.weight, dtype=np.float64)
        if self.weight.ndim != 2:
            raise ValueError("weight must be d_out x d_in")
        if not np.isfinite(self.weight).all():
            raise NonFiniteValue("query head has non-finite entries")

    @classmethod
    def identity(cls, d: int) -> "QueryHead":
        return cls(np.eye(d))

    @classmethod
    def random(cls, d_out: int, d_in: int, rng: np.random.Generator, scale: float | None = None) -> "QueryHead":
        scale = 1.0 / math.sqrt(d_in) if scale is None else scale
        return cls(scale * rng.standard_normal((d_out, d_in)))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return x @ self.weight.T
