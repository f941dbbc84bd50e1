"""
Does the facial prior token help?
=================================

Each configuration trains from the same backbone on the same minibatches.
The task label depends on a face descriptor (seen cleanly by the prior) and on
an appearance latent (seen only in the image).
"""

from rege_bench.emola import ToyConfig, TrainConfig
from rege_bench.emola.ablation import CELLS, ablate, format_table

# a shorter budget than the CLI default keeps this under a couple of minutes
rows = ablate(ToyConfig(), TrainConfig(lr=3e-3, steps=200, batch_size=32), cells=CELLS, n_train=1000, n_test=300,
              progress=lambda r: print("done:", r.cell.name))
print(format_table(rows))
