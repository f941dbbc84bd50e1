"""Token and tuning-strategy ablations on the synthetic prior-informative task.

Every cell starts from the same seeded backbone and sees the same minibatch
sequence, so differences come only from the configuration axis under test.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

from .config import GROUPS, ToyConfig, TrainConfig
from .model import Batch, ToyEmoLA
from .synthetic import SyntheticFaces, TaskSpec
from .train import evaluate, fit

ALL = GROUPS


@dataclass(frozen=True)
class Cell:
    name: str
    use_visual: bool = True
    use_prior: bool = True
    trainable: tuple[str, ...] = ALL
    position: str | None = None


# full configuration first; the rest each drop one component
CELLS = (
    Cell("visual+prior, tune all"),
    Cell("prior token only", use_visual=False),
    Cell("visual tokens only", use_prior=False),
    Cell("tune prior projector only", trainable=("prior",)),
    Cell("tune lora + visual projector", trainable=("visual", "lora")),
    Cell("prior before visual", position="before_visual"),
    Cell("tune nothing", trainable=()),
)
SINGLE_COMPONENT = (
    "prior token only",
    "visual tokens only",
    "tune prior projector only",
    "tune lora + visual projector",
)


@dataclass
class AblationRow:
    cell: Cell
    init_loss: float
    final_loss: float
    test_nll_per_token: float
    accuracy: float

    def to_dict(self) -> dict:
        c = self.cell
        return {
            "name": c.name,
            "use_visual": c.use_visual,
            "use_prior": c.use_prior,
            "trainable": list(c.trainable),
            "position": c.position,
            "init_loss": self.init_loss,
            "final_loss": self.final_loss,
            "test_nll_per_token": self.test_nll_per_token,
            "accuracy": self.accuracy,
        }


def run_cell(cell: Cell, cfg: ToyConfig, train: TrainConfig, task_spec: TaskSpec,
             n_train: int, n_test: int) -> AblationRow:
    c = cfg.replace(use_visual=cell.use_visual, use_prior=cell.use_prior,
                    prior_token_position=cell.position or cfg.prior_token_position)
    task = SyntheticFaces(c, task_spec)
    train_set = task.sample(n_train, seed=train.seed + 1)
    test_set = task.sample(n_test, seed=train.seed + 2)
    model = ToyEmoLA(c)
    probe = Batch.stack(test_set[:64])
    init_loss = model.nll(probe)
    fit(model, train_set, replace(train, trainable=cell.trainable))
    ev = evaluate(model, test_set)
    return AblationRow(cell, init_loss, model.nll(probe), ev["nll_per_token"], ev["accuracy"])


def ablate(cfg: ToyConfig = ToyConfig(), train: TrainConfig = TrainConfig(lr=3e-3, steps=400, batch_size=32),
           task_spec: TaskSpec = TaskSpec(), cells=CELLS, n_train: int = 2000, n_test: int = 500,
           progress=None) -> list[AblationRow]:
    rows = []
    for cell in cells:
        rows.append(run_cell(cell, cfg, train, task_spec, n_train, n_test))
        if progress is not None:
            progress(rows[-1])
    return rows


def format_table(rows) -> str:
    head = f"{'configuration':32s} {'init':>8s} {'final':>8s} {'nll/tok':>8s} {'acc':>6s}"
    lines = [head, "-" * len(head)]
    for r in rows:
        lines.append(f"{r.cell.name:32s} {r.init_loss:8.3f} {r.final_loss:8.3f} "
                     f"{r.test_nll_per_token:8.3f} {100 * r.accuracy:6.1f}")
    return "\n".join(lines)
