"""AdamW over the trainable set only, plus a seeded training loop."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import TrainConfig
from .model import Batch, ToyEmoLA, frozen_hash


class TrainingError(RuntimeError):
    pass


@dataclass
class AdamW:
    lr: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.0
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def update(self, params: dict, grads: dict, lr: float | None = None) -> None:
        lr = self.lr if lr is None else lr
        b1, b2 = self.betas
        self.t += 1
        c1, c2 = 1.0 - b1 ** self.t, 1.0 - b2 ** self.t
        for name in sorted(grads):
            g = grads[name]
            m = self.m.get(name)
            if m is None:
                m = self.m[name] = np.zeros_like(g)
                self.v[name] = np.zeros_like(g)
            v = self.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            if lr == 0.0:
                continue
            p = params[name]
            p -= lr * (m / c1 / (np.sqrt(v / c2) + self.eps) + self.weight_decay * p)


def train_step(model: ToyEmoLA, batch: Batch, lr: float, opt: AdamW | None = None,
               groups=("prior", "visual", "lora")) -> float:
    """One AdamW step on the mean per-sample NLL; returns the pre-step loss.

    Only tensors in ``groups`` move. A non-finite loss or gradient aborts
    before any parameter is touched.
    """
    if len(batch) == 0:
        raise TrainingError("empty batch")
    loss, grads = model.loss_and_grads(batch, groups)
    if not math.isfinite(loss):
        raise TrainingError(f"non-finite loss {loss} at step {opt.t if opt else 0}")
    bad = [n for n, g in grads.items() if not np.isfinite(g).all()]
    if bad:
        raise TrainingError(f"non-finite gradient in {bad[:3]}")
    if opt is None:
        opt = AdamW(lr=lr)
    opt.update(model.params, grads, lr)
    return loss


@dataclass
class TrainResult:
    losses: list[float]
    frozen_hash_before: str
    frozen_hash_after: str


def fit(model: ToyEmoLA, samples, train: TrainConfig, callback=None) -> TrainResult:
    """Train on minibatches drawn with ``train.seed``; deterministic end to end."""
    samples = list(samples)
    rng = np.random.default_rng(train.seed)
    opt = AdamW(lr=train.lr, betas=train.betas, eps=train.eps, weight_decay=train.weight_decay)
    before = frozen_hash(model.params)
    losses = []
    bs = min(train.batch_size, len(samples))
    for step in range(train.steps):
        idx = rng.choice(len(samples), bs, replace=False)
        loss = train_step(model, Batch.stack(samples[i] for i in idx), train.lr, opt, train.trainable)
        losses.append(loss)
        if callback is not None:
            callback(step, loss)
    return TrainResult(losses, before, frozen_hash(model.params))


def evaluate(model: ToyEmoLA, samples, batch_size: int = 256) -> dict:
    """Mean NLL per token and exact-match accuracy of greedy answers."""
    samples = list(samples)
    nll_tok, hits, n_tok = 0.0, 0, 0
    for i in range(0, len(samples), batch_size):
        b = Batch.stack(samples[i:i + batch_size])
        tok = model.per_token_nll(b)
        nll_tok += float(tok.sum())
        n_tok += tok.size
        pred = model.generate(b, b.answers.shape[1])
        hits += int((pred == b.answers).all(1).sum())
    return {"nll_per_token": nll_tok / n_tok, "accuracy": hits / len(samples)}
