"""Plain SGD driver with a per-step loss trace."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from lthkit.errors import DivergedLoss
from lthkit.lthtrain.config import LossConfig
from lthkit.lthtrain.losses import TrainingBatch, compute_loss

BatchSource = Sequence[TrainingBatch] | Callable[[int, dict], TrainingBatch]


@dataclass
class TraceRow:
    step: int
    loss: float
    beta: float
    components: dict[str, float] = field(default_factory=dict)


@dataclass
class TrainResult:
    params: dict[str, np.ndarray]
    trace: list[TraceRow]

    @property
    def losses(self) -> np.ndarray:
        return np.array([r.loss for r in self.trace])


def _batch_at(batches: BatchSource, step: int, params: dict) -> TrainingBatch:
    if callable(batches):
        return batches(step, params)
    return batches[step % len(batches)]


def train(config: LossConfig, batches: BatchSource, params: dict[str, np.ndarray]) -> TrainResult:
    """Run ``config.steps`` SGD updates and record the loss before each one.

    ``batches`` is either a sequence, cycled in order, or a callable
    ``(step, params) -> TrainingBatch`` (used to mine negatives against the
    current model).  The input ``params`` are copied, never modified.
    """
    params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    trainables = config.trainables or tuple(params)
    trace = []
    for step in range(config.steps):
        batch = _batch_at(batches, step, params)
        beta = config.beta(step)
        res = compute_loss(config.loss_kind, params, batch, beta, config.alpha)
        if not np.isfinite(res.loss) or not all(np.isfinite(g).all() for g in res.grads.values()):
            raise DivergedLoss(f"non-finite loss or gradient at step {step}")
        trace.append(TraceRow(step, res.loss, beta, dict(res.components)))
        if config.learning_rate == 0:
            continue
        for name in trainables:
            if name in res.grads:
                params[name] -= config.learning_rate * res.grads[name]
    return TrainResult(params, trace)


def moving_average(values, window: int = 50) -> np.ndarray:
    """Trailing mean over full windows only."""
    v = np.asarray(values, dtype=np.float64)
    if len(v) < window:
        return np.array([])
    c = np.cumsum(np.concatenate([[0.0], v]))
    return (c[window:] - c[:-window]) / window


def write_trace(trace: list[TraceRow], path) -> None:
    names = sorted({k for r in trace for k in r.components})
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["step", "loss", "beta", *names])
        for r in trace:
            w.writerow([r.step, repr(r.loss), repr(r.beta), *(repr(r.components.get(n, "")) for n in names)])


def read_trace(path) -> list[TraceRow]:
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    out = []
    for r in rows:
        comps = {k: float(v) for k, v in r.items() if k not in ("step", "loss", "beta") and v != ""}
        out.append(TraceRow(int(r["step"]), float(r["loss"]), float(r["beta"]), comps))
    return out


def save_params(params: dict[str, np.ndarray], path, config: LossConfig, command: str = "train") -> None:
    """Arrays go to an ``.npz``; a JSON header with shapes and config sits beside it."""
    path = Path(path)
    with open(path, "wb") as f:
        np.savez(f, **params)
    header = {
        "kind": "trained-params",
        "command": command,
        "config": config.to_dict(),
        "shapes": {k: list(v.shape) for k, v in sorted(params.items())},
    }
    Path(str(path) + ".manifest.json").write_text(json.dumps(header, sort_keys=True, indent=2) + "\n")


def load_params(path) -> dict[str, np.ndarray]:
    with np.load(path) as z:
        return {k: z[k] for k in z.files}
