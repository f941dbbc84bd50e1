"""Checks on a trained or freshly built model: gradients, adapter rank, freezing."""
from __future__ import annotations

import numpy as np

from .model import Batch, ToyEmoLA, frozen_hash

REL_FLOOR = 1e-12
RANK_RTOL = 1e-8


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), REL_FLOOR)


def grad_check_detail(model: ToyEmoLA, batch: Batch, eps: float = 1e-4, n_coords: int = 32,
                      seed: int = 0, groups=("prior", "visual", "lora")) -> dict[str, float]:
    """Max relative error per trainable tensor, analytic vs central differences.

    ``n_coords`` coordinates are sampled per tensor (all of them if smaller).
    Parameters are restored bit-for-bit afterwards.
    """
    if not 1e-6 <= eps <= 1e-3:
        raise ValueError(f"eps={eps} outside [1e-6, 1e-3]")
    if not isinstance(batch, Batch):
        batch = Batch.stack([batch])
    _, grads = model.loss_and_grads(batch, groups)
    rng = np.random.default_rng(seed)
    out = {}
    for name in model.trainable_names(groups):
        P = model.params[name]
        flat = P.reshape(-1)
        picks = np.arange(flat.size) if flat.size <= n_coords else rng.choice(flat.size, n_coords, replace=False)
        worst = 0.0
        for j in picks:
            old = flat[j]
            flat[j] = old + eps
            up = model.nll(batch)
            flat[j] = old - eps
            down = model.nll(batch)
            flat[j] = old
            numeric = (up - down) / (2 * eps)
            worst = max(worst, relative_error(float(grads[name].reshape(-1)[j]), numeric))
        out[name] = worst
    return out


def grad_check(model: ToyEmoLA, batch, eps: float = 1e-4, n_coords: int = 32, seed: int = 0,
               groups=("prior", "visual", "lora")) -> float:
    return max(grad_check_detail(model, batch, eps, n_coords, seed, groups).values())


def adapter_delta(model: ToyEmoLA, layer: int, site: str) -> np.ndarray:
    """The dense residual (alpha/rank) * B @ A, shape out x in."""
    p = model.params
    return model.config.lora_scale * (p[f"lora.{layer}.{site}.B"] @ p[f"lora.{layer}.{site}.A"])


def _product_rank(Bm: np.ndarray, A: np.ndarray, rtol: float) -> int:
    # B A = Qb (Rb Ra^T) Qa^T, so its singular values are those of the small r x r core
    qb, rb = np.linalg.qr(Bm)
    qa, ra = np.linalg.qr(A.T)
    s = np.linalg.svd(rb @ ra.T, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int((s > rtol * s[0]).sum())


def effective_rank_audit(model: ToyEmoLA, rtol: float = RANK_RTOL) -> dict[str, int]:
    """Numerical rank of every adapter product B @ A, keyed ``"<layer>.<site>"``."""
    cfg, p = model.config, model.params
    return {
        f"{i}.{site}": _product_rank(p[f"lora.{i}.{site}.B"], p[f"lora.{i}.{site}.A"], rtol)
        for i in range(cfg.n_layers)
        for site in cfg.lora_targets
    }


def audit(model: ToyEmoLA) -> dict:
    return {
        "frozen_hash": frozen_hash(model.params),
        "adapter_ranks": effective_rank_audit(model),
        "lora_rank": model.config.lora_rank,
    }
