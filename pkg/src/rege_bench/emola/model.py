"""A small frozen causal decoder fed with visual tokens, one facial-prior token
and instruction tokens, adapted through projectors and low-rank residuals.

Parameters live in a flat ``{name: ndarray}`` dict. Names under
``prior_proj.`` (theta), ``visual_proj.`` (gamma) and ``lora.`` (phi) form the
trainable set; everything else is frozen and never receives a gradient.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from . import layers as L
from .config import ToyConfig

BOS, EOS = 1, 2

_SITE_PARAMS = {
    "q": ("attn.q.W", None),
    "k": ("attn.k.W", None),
    "v": ("attn.v.W", None),
    "o": ("attn.o.W", None),
    "mlp_in": ("mlp.W1", "mlp.b1"),
    "mlp_out": ("mlp.W2", "mlp.b2"),
}
_GROUP_PREFIX = {"prior_proj.": "prior", "visual_proj.": "visual", "lora.": "lora"}


class ModelError(ValueError):
    pass


def group_of(name: str) -> str | None:
    for prefix, group in _GROUP_PREFIX.items():
        if name.startswith(prefix):
            return group
    return None


def is_trainable(name: str) -> bool:
    return group_of(name) is not None


@dataclass
class Sample:
    """One item: image patches, face descriptor, instruction ids, answer ids."""
    image: np.ndarray
    descriptor: np.ndarray
    instruction: np.ndarray
    answer: np.ndarray
    label: int = -1


@dataclass
class Batch:
    images: np.ndarray
    descriptors: np.ndarray
    instructions: np.ndarray
    answers: np.ndarray

    @classmethod
    def stack(cls, samples) -> "Batch":
        samples = list(samples)
        if not samples:
            raise ModelError("empty batch")
        try:
            return cls(
                images=np.stack([s.image for s in samples]),
                descriptors=np.stack([s.descriptor for s in samples]),
                instructions=np.stack([np.asarray(s.instruction, dtype=np.int64) for s in samples]),
                answers=np.stack([np.asarray(s.answer, dtype=np.int64) for s in samples]),
            )
        except ValueError as exc:
            raise ModelError(f"samples in a batch must share shapes: {exc}") from exc

    def __len__(self):
        return len(self.answers)


def _projector_params(rng, prefix, d_in, d_out, n_layers, dtype):
    p = {
        f"{prefix}.W1": rng.normal(0.0, 1.0 / math.sqrt(d_in), (d_in, d_out)),
        f"{prefix}.b1": np.zeros(d_out),
    }
    if n_layers == 2:
        p[f"{prefix}.W2"] = rng.normal(0.0, 1.0 / math.sqrt(d_out), (d_out, d_out))
        p[f"{prefix}.b2"] = np.zeros(d_out)
    return {k: v.astype(dtype) for k, v in p.items()}


def site_shape(cfg: ToyConfig, site: str) -> tuple[int, int]:
    D, F = cfg.model_dim, cfg.model_dim * cfg.mlp_ratio
    return {"mlp_in": (D, F), "mlp_out": (F, D)}.get(site, (D, D))


def init_params(cfg: ToyConfig) -> dict[str, np.ndarray]:
    """Seeded random weights; stands in for a pretrained backbone."""
    rng = np.random.default_rng(cfg.seed)
    D, V, F = cfg.model_dim, cfg.vocab_size, cfg.model_dim * cfg.mlp_ratio
    dt = np.dtype(cfg.dtype)
    p: dict[str, np.ndarray] = {
        "tok_emb": rng.normal(0.0, 1.0, (V, D)),
        "pos_emb": rng.normal(0.0, 0.1, (cfg.max_len, D)),
        "visual_enc.W": rng.normal(0.0, 1.0 / math.sqrt(cfg.patch_dim), (cfg.patch_dim, cfg.visual_feature_dim)),
        "prior_enc.W": rng.normal(0.0, 1.0 / math.sqrt(cfg.descriptor_dim), (cfg.descriptor_dim, cfg.prior_dim)),
    }
    for i in range(cfg.n_layers):
        pre = f"layers.{i}."
        p[pre + "ln1.g"], p[pre + "ln1.b"] = np.ones(D), np.zeros(D)
        for w in "qkvo":
            p[pre + f"attn.{w}.W"] = rng.normal(0.0, 1.0 / math.sqrt(D), (D, D))
        p[pre + "ln2.g"], p[pre + "ln2.b"] = np.ones(D), np.zeros(D)
        p[pre + "mlp.W1"] = rng.normal(0.0, 1.0 / math.sqrt(D), (D, F))
        p[pre + "mlp.b1"] = np.zeros(F)
        p[pre + "mlp.W2"] = rng.normal(0.0, 1.0 / math.sqrt(F), (F, D))
        p[pre + "mlp.b2"] = np.zeros(D)
    p["lnf.g"], p["lnf.b"] = np.ones(D), np.zeros(D)
    p["head.W"] = rng.normal(0.0, 1.0 / math.sqrt(D), (D, V))
    p["head.b"] = np.zeros(V)
    p = {k: v.astype(dt) for k, v in p.items()}
    p.update(_projector_params(rng, "visual_proj", cfg.visual_feature_dim, D, cfg.projector_layers, dt))
    p.update(_projector_params(rng, "prior_proj", cfg.prior_dim, D, cfg.projector_layers, dt))
    for i in range(cfg.n_layers):
        for site in cfg.lora_targets:
            d_in, d_out = site_shape(cfg, site)
            p[f"lora.{i}.{site}.A"] = rng.normal(0.0, cfg.lora_init_std, (cfg.lora_rank, d_in)).astype(dt)
            p[f"lora.{i}.{site}.B"] = np.zeros((d_out, cfg.lora_rank), dtype=dt)
    return p


def frozen_hash(params: dict[str, np.ndarray]) -> str:
    h = hashlib.sha256()
    for name in sorted(params):
        if is_trainable(name):
            continue
        arr = np.ascontiguousarray(params[name])
        h.update(name.encode())
        h.update(str(arr.dtype).encode())
        h.update(repr(arr.shape).encode())
        h.update(arr.tobytes())
    return h.hexdigest()


def projector_weights(params, prefix):
    W2 = params.get(f"{prefix}.W2")
    return params[f"{prefix}.W1"], params[f"{prefix}.b1"], W2, params.get(f"{prefix}.b2")


def prior_project(z, params, cfg: ToyConfig):
    """Map a prior feature (prior_dim,) or (B, prior_dim) to one token embedding."""
    z = np.asarray(z, dtype=cfg.dtype)
    if z.shape[-1] != cfg.prior_dim:
        raise ModelError(f"prior feature has dim {z.shape[-1]}, expected {cfg.prior_dim}")
    out, _ = L.mlp(z, *projector_weights(params, "prior_proj"))
    return out


def assemble_sequence(h_v, h_p, h_q, position: str = "after_visual"):
    """Concatenate prefix parts along the token axis.

    ``h_v`` and ``h_p`` may be None (ablations). Returns the sequence and a
    ``{part: slice}`` map. ``after_visual`` gives [H_v, H_p, H_q];
    ``before_visual`` gives [H_p, H_v, H_q].
    """
    order = ("visual", "prior") if position == "after_visual" else ("prior", "visual")
    if position not in ("after_visual", "before_visual"):
        raise ModelError(f"unknown prior token position {position!r}")
    parts = {"visual": h_v, "prior": h_p, "instruction": h_q}
    pieces, where, at = [], {}, 0
    for key in (*order, "instruction"):
        t = parts[key]
        if t is None:
            continue
        where[key] = slice(at, at + t.shape[-2])
        at += t.shape[-2]
        pieces.append(t)
    if not pieces:
        raise ModelError("nothing to assemble")
    return np.concatenate(pieces, axis=-2), where


class ToyEmoLA:
    def __init__(self, config: ToyConfig, params: dict[str, np.ndarray] | None = None):
        self.config = config
        self.params = init_params(config) if params is None else params

    @property
    def dtype(self):
        return np.dtype(self.config.dtype)

    def trainable_names(self, groups=("prior", "visual", "lora")) -> list[str]:
        return sorted(n for n in self.params if group_of(n) in groups)

    def frozen_names(self) -> list[str]:
        return sorted(n for n in self.params if not is_trainable(n))

    # ------------------------------------------------------------------ forward
    def _lora(self, i, site, use_lora):
        if not use_lora or site not in self.config.lora_targets:
            return None
        return self.params[f"lora.{i}.{site}.A"], self.params[f"lora.{i}.{site}.B"]

    def _lin(self, x, i, site, use_lora):
        wname, bname = _SITE_PARAMS[site]
        p = self.params
        b = p[f"layers.{i}.{bname}"] if bname else None
        return L.linear(x, p[f"layers.{i}.{wname}"], b, self._lora(i, site, use_lora), self.config.lora_scale)

    def _check_ids(self, ids, what):
        if ids.size and (ids.min() < 0 or ids.max() >= self.config.vocab_size):
            raise ModelError(f"{what} token id out of range [0, {self.config.vocab_size})")

    def encode_prefix(self, batch: Batch):
        """Build [H_v, H_p, H_q, BOS] embeddings (order per config) for a batch."""
        cfg, p = self.config, self.params
        self._check_ids(batch.instructions, "instruction")
        B = len(batch)
        cache = {}
        h_v = h_p = None
        if cfg.use_visual:
            zv = np.tanh(batch.images.astype(self.dtype) @ p["visual_enc.W"])
            h_v, cache["visual"] = L.mlp(zv, *projector_weights(p, "visual_proj"))
        if cfg.use_prior:
            zp = batch.descriptors.astype(self.dtype) @ p["prior_enc.W"]
            h_p, cache["prior"] = L.mlp(zp[:, None, :], *projector_weights(p, "prior_proj"))
        h_q = p["tok_emb"][batch.instructions]
        bos = np.broadcast_to(p["tok_emb"][BOS], (B, 1, cfg.model_dim))
        h_q = np.concatenate([h_q, bos], axis=1)
        seq, where = assemble_sequence(h_v, h_p, h_q, cfg.prior_token_position)
        return seq, where, cache

    def decode(self, x, use_lora=True):
        """Run the decoder on embeddings x (B, T, D); returns logits and caches."""
        cfg, p = self.config, self.params
        T = x.shape[1]
        if T > cfg.max_len:
            raise ModelError(f"sequence length {T} exceeds max_len {cfg.max_len}")
        h = x + p["pos_emb"][:T]
        caches = []
        for i in range(cfg.n_layers):
            pre = f"layers.{i}."
            a, c_ln1 = L.layer_norm(h, p[pre + "ln1.g"], p[pre + "ln1.b"])
            q, c_q = self._lin(a, i, "q", use_lora)
            k, c_k = self._lin(a, i, "k", use_lora)
            v, c_v = self._lin(a, i, "v", use_lora)
            att, c_att = L.causal_attention(q, k, v, cfg.n_heads)
            o, c_o = self._lin(att, i, "o", use_lora)
            h = h + o
            m, c_ln2 = L.layer_norm(h, p[pre + "ln2.g"], p[pre + "ln2.b"])
            u, c_in = self._lin(m, i, "mlp_in", use_lora)
            z, c_gelu = L.gelu(u)
            y, c_out = self._lin(z, i, "mlp_out", use_lora)
            h = h + y
            caches.append((c_ln1, c_q, c_k, c_v, c_att, c_o, c_ln2, c_in, c_gelu, c_out))
        f, c_lnf = L.layer_norm(h, p["lnf.g"], p["lnf.b"])
        logits = f @ p["head.W"] + p["head.b"]
        return logits, (caches, c_lnf, f)

    def forward(self, batch: Batch, use_lora=True):
        """Teacher-forced logits at the positions that predict each answer token.

        Returns ``(logits (B, L, V), cache)``.
        """
        ans = batch.answers
        if ans.ndim != 2 or ans.shape[1] < 1:
            raise ModelError("answers must be a (B, L) array with L >= 1")
        self._check_ids(ans, "answer")
        prefix, where, pcache = self.encode_prefix(batch)
        x = np.concatenate([prefix, self.params["tok_emb"][ans[:, :-1]]], axis=1)
        logits, dcache = self.decode(x, use_lora)
        start = prefix.shape[1] - 1
        sel = slice(start, start + ans.shape[1])
        return logits[:, sel], (where, pcache, dcache, x.shape, sel)

    def per_token_nll(self, batch: Batch, use_lora=True) -> np.ndarray:
        logits, _ = self.forward(batch, use_lora)
        logp = L.log_softmax(logits)
        return -np.take_along_axis(logp, batch.answers[..., None], -1)[..., 0]

    def nll(self, sample_or_batch, use_lora=True) -> float:
        """Summed negative log-likelihood of the answer (mean over a batch)."""
        batch = sample_or_batch if isinstance(sample_or_batch, Batch) else Batch.stack([sample_or_batch])
        return float(self.per_token_nll(batch, use_lora).sum(1).mean())

    # ----------------------------------------------------------------- backward
    def loss_and_grads(self, batch: Batch, groups=("prior", "visual", "lora")):
        """Mean per-sample NLL and its gradient for trainable tensors in ``groups``."""
        logits, (where, pcache, dcache, xshape, sel) = self.forward(batch)
        logp = L.log_softmax(logits)
        B, Lans = batch.answers.shape
        tok = -np.take_along_axis(logp, batch.answers[..., None], -1)[..., 0]
        loss = float(tok.sum(1).mean())
        groups = set(groups)
        if not groups:
            return loss, {}

        dsel = np.exp(logp)
        np.put_along_axis(dsel, batch.answers[..., None], np.take_along_axis(dsel, batch.answers[..., None], -1) - 1.0, -1)
        dsel /= B
        dlogits = np.zeros((B, xshape[1], self.config.vocab_size), dtype=dsel.dtype)
        dlogits[:, sel] = dsel

        grads: dict[str, np.ndarray] = {}
        dx = self._decode_backward(dlogits, dcache, grads, want_lora="lora" in groups)
        self._prefix_backward(dx, where, pcache, grads, groups)
        return loss, {k: v for k, v in grads.items() if group_of(k) in groups}

    def _decode_backward(self, dlogits, dcache, grads, want_lora=True):
        cfg, p = self.config, self.params
        caches, c_lnf, _ = dcache
        dh = L.layer_norm_backward(dlogits @ p["head.W"].T, c_lnf)
        scale = cfg.lora_scale

        def back(dy, i, site, cache):
            wname, _ = _SITE_PARAMS[site]
            lora = self._lora(i, site, True)
            dx, dA, dB = L.linear_backward(dy, cache, p[f"layers.{i}.{wname}"], lora if want_lora else None, scale)
            if lora is not None and not want_lora:
                # adapter still shapes the forward map, so route the input gradient through it
                A, Bm = lora
                dx = dx + scale * (dy @ Bm) @ A
            if dA is not None:
                grads[f"lora.{i}.{site}.A"] = dA
                grads[f"lora.{i}.{site}.B"] = dB
            return dx

        for i in reversed(range(cfg.n_layers)):
            c_ln1, c_q, c_k, c_v, c_att, c_o, c_ln2, c_in, c_gelu, c_out = caches[i]
            dz = back(dh, i, "mlp_out", c_out)
            du = L.gelu_backward(dz, c_gelu)
            dm = back(du, i, "mlp_in", c_in)
            dh = dh + L.layer_norm_backward(dm, c_ln2)
            datt = back(dh, i, "o", c_o)
            dq, dk, dv = L.causal_attention_backward(datt, c_att)
            da = back(dq, i, "q", c_q) + back(dk, i, "k", c_k) + back(dv, i, "v", c_v)
            dh = dh + L.layer_norm_backward(da, c_ln1)
        return dh

    def _prefix_backward(self, dx, where, pcache, grads, groups):
        p = self.params
        for part, prefix in (("visual", "visual_proj"), ("prior", "prior_proj")):
            if part not in where or part not in groups:
                continue
            W1, _, W2, _ = projector_weights(p, prefix)
            _, g = L.mlp_backward(dx[:, where[part]], pcache[part], W1, W2)
            for k, v in g.items():
                grads[f"{prefix}.{k}"] = v

    def full_gradient(self, batch: Batch) -> dict[str, np.ndarray]:
        """Gradient over every tensor; frozen tensors get exact zeros."""
        _, g = self.loss_and_grads(batch)
        return {n: g[n] if n in g else np.zeros_like(v) for n, v in self.params.items()}

    # --------------------------------------------------------------- inference
    def generate(self, batch: Batch, n_tokens: int) -> np.ndarray:
        """Greedy decoding of ``n_tokens`` answer tokens."""
        prefix, _, _ = self.encode_prefix(batch)
        out = np.zeros((len(batch), 0), dtype=np.int64)
        for _ in range(n_tokens):
            x = np.concatenate([prefix, self.params["tok_emb"][out]], axis=1)
            logits, _ = self.decode(x)
            out = np.concatenate([out, logits[:, -1].argmax(-1)[:, None]], axis=1)
        return out

    def copy(self) -> "ToyEmoLA":
        return ToyEmoLA(self.config, {k: v.copy() for k, v in self.params.items()})
