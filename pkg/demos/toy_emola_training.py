"""
Training the desk-scale decoder
===============================

A small frozen decoder gets a visual projector, a facial-prior projector and
low-rank adapters. Only those three groups train; the rest stays bit-identical.
"""

import numpy as np

from rege_bench.emola import SyntheticFaces, ToyConfig, ToyEmoLA, TrainConfig
from rege_bench.emola.audit import effective_rank_audit, grad_check
from rege_bench.emola.model import Batch, frozen_hash
from rege_bench.emola.train import evaluate, fit

cfg = ToyConfig()
model = ToyEmoLA(cfg)
task = SyntheticFaces(cfg)
train_set, test_set = task.sample(2000, seed=1), task.sample(500, seed=2)

# adapters start with B = 0, so every residual has rank 0
print("ranks at init", effective_rank_audit(model))
print("trainable tensors", len(model.trainable_names()), "of", len(model.params))

h0 = frozen_hash(model.params)
result = fit(model, train_set, TrainConfig(lr=3e-3, steps=300, batch_size=32))
print("loss", round(result.losses[0], 3), "->", round(result.losses[-1], 3))
print("frozen tensors unchanged:", frozen_hash(model.params) == h0)
print("ranks after training", effective_rank_audit(model))

# analytic gradients against central differences
print("grad check", grad_check(model, Batch.stack(test_set[:4]), eps=1e-4))

ev = evaluate(model, test_set)
print("test accuracy", ev["accuracy"], "nll/token", round(ev["nll_per_token"], 3))

# greedy answers for a few test faces: [shape token, tone token, EOS]
b = Batch.stack(test_set[:5])
print(np.column_stack([model.generate(b, 3), b.answers]))
