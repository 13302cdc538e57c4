"""Small bidirectional transformer encoder with a 4-class head.

The computation is the original post-layer-norm ordering:

    h0 = LayerNorm(tok_emb + pos_emb + seg_emb)
    per layer:  a  = MultiHeadAttention(h)             (additive -1e9 pad mask)
                h  = LayerNorm(h + dropout(a))
                f  = W2 . gelu(W1 . h + b1) + b2
                h  = LayerNorm(h + dropout(f))
    pooled = tanh(pooler . h[CLS] + b)
    logits = classifier . pooled + b

GELU uses the exact Gaussian CDF form, x * 0.5 * (1 + erf(x / sqrt(2))).
Dropout (embedding output, attention output, feed-forward output) runs only
in train mode, with seeded masks, so inference and gradient checks are
deterministic. The additive mask constant is -1e9 rather than -inf so no
NaN can propagate through the softmax.

All arithmetic is float64 in memory; checkpoints store little-endian
float32 tensors after a plain-text metadata header.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from scipy.special import erf, ndtr, ndtri

from .errors import DataValidationError, InputPathError
from .tokenizer import Encoding

MASK_ADDEND = -1e9
INIT_STD = 0.02
INIT_CLIP_SIGMAS = 2.0

CHECKPOINT_MAGIC = b"SWCKPT"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class EncoderConfig:
    """Model dimensions. ``d_ff`` of 0 means the conventional 4 * d_model."""

    vocab_size: int
    d_model: int = 128
    n_layers: int = 2
    n_heads: int = 4
    d_ff: int = 0
    max_len: int = 64
    n_classes: int = 4
    dropout_rate: float = 0.1
    layer_norm_eps: float = 1e-12

    def __post_init__(self) -> None:
        if self.d_ff == 0:
            object.__setattr__(self, "d_ff", 4 * self.d_model)
        for name in ("vocab_size", "d_model", "n_layers", "n_heads", "d_ff", "max_len"):
            if getattr(self, name) <= 0:
                raise DataValidationError(f"{name} must be positive, got {getattr(self, name)}")
        if self.d_model % self.n_heads != 0:
            raise DataValidationError(
                f"n_heads ({self.n_heads}) must divide d_model ({self.d_model})"
            )
        if self.n_classes != 4:
            raise DataValidationError(f"n_classes is fixed at 4, got {self.n_classes}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise DataValidationError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")

    @property
    def d_head(self) -> int:
        return self.d_model // self.n_heads

    def to_dict(self) -> dict:
        return {
            "vocab_size": self.vocab_size,
            "d_model": self.d_model,
            "n_layers": self.n_layers,
            "n_heads": self.n_heads,
            "d_ff": self.d_ff,
            "max_len": self.max_len,
            "n_classes": self.n_classes,
            "dropout_rate": self.dropout_rate,
            "layer_norm_eps": self.layer_norm_eps,
        }


@dataclass
class LayerParams:
    wq: np.ndarray
    bq: np.ndarray
    wk: np.ndarray
    bk: np.ndarray
    wv: np.ndarray
    bv: np.ndarray
    wo: np.ndarray
    bo: np.ndarray
    ln1_gain: np.ndarray
    ln1_bias: np.ndarray
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    ln2_gain: np.ndarray
    ln2_bias: np.ndarray


@dataclass
class ModelParams:
    """All learnable tensors plus the metadata the checkpoint header carries."""

    config: EncoderConfig
    tok_emb: np.ndarray
    pos_emb: np.ndarray
    seg_emb: np.ndarray
    emb_ln_gain: np.ndarray
    emb_ln_bias: np.ndarray
    layers: list[LayerParams]
    pooler_w: np.ndarray
    pooler_b: np.ndarray
    classifier_w: np.ndarray
    classifier_b: np.ndarray
    vocab_hash: str | None = None
    init_seed: int | None = None


def tensor_shapes(config: EncoderConfig) -> list[tuple[str, tuple[int, ...]]]:
    """The documented fixed tensor order used by checkpoints and Adam state."""
    d, dff, h = config.d_model, config.d_ff, config.n_heads
    shapes: list[tuple[str, tuple[int, ...]]] = [
        ("tok_emb", (config.vocab_size, d)),
        ("pos_emb", (config.max_len, d)),
        ("seg_emb", (2, d)),
        ("emb_ln_gain", (d,)),
        ("emb_ln_bias", (d,)),
    ]
    for i in range(config.n_layers):
        prefix = f"layer{i}."
        shapes += [
            (prefix + "wq", (d, d)),
            (prefix + "bq", (d,)),
            (prefix + "wk", (d, d)),
            (prefix + "bk", (d,)),
            (prefix + "wv", (d, d)),
            (prefix + "bv", (d,)),
            (prefix + "wo", (d, d)),
            (prefix + "bo", (d,)),
            (prefix + "ln1_gain", (d,)),
            (prefix + "ln1_bias", (d,)),
            (prefix + "w1", (d, dff)),
            (prefix + "b1", (dff,)),
            (prefix + "w2", (dff, d)),
            (prefix + "b2", (d,)),
            (prefix + "ln2_gain", (d,)),
            (prefix + "ln2_bias", (d,)),
        ]
    shapes += [
        ("pooler_w", (d, d)),
        ("pooler_b", (d,)),
        ("classifier_w", (config.n_classes, d)),
        ("classifier_b", (config.n_classes,)),
    ]
    return shapes


def param_tensors(params: ModelParams) -> Iterator[tuple[str, np.ndarray]]:
    """Yield (name, tensor) in the documented fixed order."""
    yield "tok_emb", params.tok_emb
    yield "pos_emb", params.pos_emb
    yield "seg_emb", params.seg_emb
    yield "emb_ln_gain", params.emb_ln_gain
    yield "emb_ln_bias", params.emb_ln_bias
    for i, layer in enumerate(params.layers):
        prefix = f"layer{i}."
        for fname in (
            "wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo",
            "ln1_gain", "ln1_bias", "w1", "b1", "w2", "b2", "ln2_gain", "ln2_bias",
        ):
            yield prefix + fname, getattr(layer, fname)
    yield "pooler_w", params.pooler_w
    yield "pooler_b", params.pooler_b
    yield "classifier_w", params.classifier_w
    yield "classifier_b", params.classifier_b


def _truncated_normal(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    # Inverse-CDF sampling of a normal truncated to +-2 sigma: no rejection
    # loop, so the draw count per tensor is fixed and seeding is stable.
    lo = ndtr(-INIT_CLIP_SIGMAS)
    hi = ndtr(INIT_CLIP_SIGMAS)
    u = rng.random(shape)
    return ndtri(lo + u * (hi - lo)) * INIT_STD


def init_params(
    config: EncoderConfig, seed: int, vocab_hash: str | None = None
) -> ModelParams:
    """Fresh parameters: weights truncated normal(0, 0.02^2) within 2 sigma,
    biases zero, layer-norm gains one. Deterministic per seed."""
    rng = np.random.default_rng(seed)
    d, dff = config.d_model, config.d_ff

    def zeros(*shape: int) -> np.ndarray:
        return np.zeros(shape, dtype=np.float64)

    def ones(*shape: int) -> np.ndarray:
        return np.ones(shape, dtype=np.float64)

    layers = []
    tok = _truncated_normal(rng, (config.vocab_size, d))
    pos = _truncated_normal(rng, (config.max_len, d))
    seg = _truncated_normal(rng, (2, d))
    for _ in range(config.n_layers):
        layers.append(
            LayerParams(
                wq=_truncated_normal(rng, (d, d)), bq=zeros(d),
                wk=_truncated_normal(rng, (d, d)), bk=zeros(d),
                wv=_truncated_normal(rng, (d, d)), bv=zeros(d),
                wo=_truncated_normal(rng, (d, d)), bo=zeros(d),
                ln1_gain=ones(d), ln1_bias=zeros(d),
                w1=_truncated_normal(rng, (d, dff)), b1=zeros(dff),
                w2=_truncated_normal(rng, (dff, d)), b2=zeros(d),
                ln2_gain=ones(d), ln2_bias=zeros(d),
            )
        )
    return ModelParams(
        config=config,
        tok_emb=tok,
        pos_emb=pos,
        seg_emb=seg,
        emb_ln_gain=ones(d),
        emb_ln_bias=zeros(d),
        layers=layers,
        pooler_w=_truncated_normal(rng, (d, d)),
        pooler_b=zeros(d),
        classifier_w=_truncated_normal(rng, (config.n_classes, d)),
        classifier_b=zeros(config.n_classes),
        vocab_hash=vocab_hash,
        init_seed=seed,
    )


def gelu(x: np.ndarray) -> np.ndarray:
    return x * 0.5 * (1.0 + erf(x / np.sqrt(2.0)))


def gelu_grad(x: np.ndarray) -> np.ndarray:
    cdf = 0.5 * (1.0 + erf(x / np.sqrt(2.0)))
    pdf = np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)
    return cdf + x * pdf


def _layernorm_forward(
    x: np.ndarray, gain: np.ndarray, bias: np.ndarray, eps: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Normalize over the last axis. Returns (y, xhat, inv_std) for backprop."""
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv
    return xhat * gain + bias, xhat, inv


def _layernorm_backward(
    dy: np.ndarray, xhat: np.ndarray, inv: np.ndarray, gain: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (dx, dgain, dbias); parameter grads are summed over rows."""
    axes = tuple(range(dy.ndim - 1))
    dgain = (dy * xhat).sum(axis=axes)
    dbias = dy.sum(axis=axes)
    dxhat = dy * gain
    dx = inv * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dx, dgain, dbias


def _softmax_lastaxis(x: np.ndarray) -> np.ndarray:
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def collate(batch: Sequence[Encoding], config: EncoderConfig) -> tuple[np.ndarray, np.ndarray]:
    """Stack encodings into (ids, mask) arrays, validating dimensions."""
    if not batch:
        raise DataValidationError("empty batch")
    for i, enc in enumerate(batch):
        if len(enc.ids) != config.max_len:
            raise DataValidationError(
                f"batch item {i}: encoding length {len(enc.ids)} does not match "
                f"model max_len {config.max_len}"
            )
    ids = np.array([enc.ids for enc in batch], dtype=np.int64)
    if ids.max() >= config.vocab_size:
        raise DataValidationError(
            f"token id {int(ids.max())} out of range for vocab_size {config.vocab_size}"
        )
    mask = np.array([enc.mask for enc in batch], dtype=np.float64)
    return ids, mask


def _dropout_mask(rng: np.random.Generator, shape: tuple[int, ...], rate: float) -> np.ndarray:
    # Inverted dropout: surviving activations are scaled by 1 / keep.
    keep = 1.0 - rate
    return (rng.random(shape) >= rate).astype(np.float64) / keep


def forward_with_cache(
    params: ModelParams,
    ids: np.ndarray,
    mask: np.ndarray,
    train_mode: bool = False,
    dropout_seed: int | np.random.SeedSequence | None = None,
    need_cache: bool = False,
) -> tuple[np.ndarray, dict | None]:
    """Run the encoder on collated arrays; optionally keep activations.

    The cache holds everything the backward pass needs. Dropout masks are
    drawn in a fixed order (embedding, then per layer attention / ffn) from
    a generator seeded with ``dropout_seed``.
    """
    cfg = params.config
    B, T = ids.shape
    dropping = train_mode and cfg.dropout_rate > 0.0
    rng: np.random.Generator | None = None
    if dropping:
        if dropout_seed is None:
            raise DataValidationError("train-mode forward requires an explicit dropout seed")
        rng = np.random.default_rng(dropout_seed)

    addmask = ((1.0 - mask) * MASK_ADDEND)[:, None, None, :]  # (B,1,1,T)

    x = params.tok_emb[ids] + params.pos_emb[None, :T, :] + params.seg_emb[0]
    h, emb_xhat, emb_inv = _layernorm_forward(
        x, params.emb_ln_gain, params.emb_ln_bias, cfg.layer_norm_eps
    )
    emb_drop = None
    if dropping:
        emb_drop = _dropout_mask(rng, h.shape, cfg.dropout_rate)
        h = h * emb_drop

    cache: dict | None = None
    if need_cache:
        cache = {
            "ids": ids,
            "emb_xhat": emb_xhat,
            "emb_inv": emb_inv,
            "emb_drop": emb_drop,
            "layers": [],
        }

    scale = 1.0 / np.sqrt(cfg.d_head)
    for layer in params.layers:
        h_in = h
        q = (h @ layer.wq + layer.bq).reshape(B, T, cfg.n_heads, cfg.d_head).transpose(0, 2, 1, 3)
        k = (h @ layer.wk + layer.bk).reshape(B, T, cfg.n_heads, cfg.d_head).transpose(0, 2, 1, 3)
        v = (h @ layer.wv + layer.bv).reshape(B, T, cfg.n_heads, cfg.d_head).transpose(0, 2, 1, 3)
        scores = q @ k.transpose(0, 1, 3, 2) * scale + addmask
        probs = _softmax_lastaxis(scores)
        ctx = (probs @ v).transpose(0, 2, 1, 3).reshape(B, T, cfg.d_model)
        attn = ctx @ layer.wo + layer.bo
        attn_drop = None
        if dropping:
            attn_drop = _dropout_mask(rng, attn.shape, cfg.dropout_rate)
            attn = attn * attn_drop
        h1, ln1_xhat, ln1_inv = _layernorm_forward(
            h_in + attn, layer.ln1_gain, layer.ln1_bias, cfg.layer_norm_eps
        )
        u = h1 @ layer.w1 + layer.b1
        gu = gelu(u)
        f = gu @ layer.w2 + layer.b2
        ffn_drop = None
        if dropping:
            ffn_drop = _dropout_mask(rng, f.shape, cfg.dropout_rate)
            f = f * ffn_drop
        h, ln2_xhat, ln2_inv = _layernorm_forward(
            h1 + f, layer.ln2_gain, layer.ln2_bias, cfg.layer_norm_eps
        )
        if need_cache:
            cache["layers"].append(
                {
                    "h_in": h_in,
                    "q": q, "k": k, "v": v,
                    "probs": probs,
                    "ctx": ctx,
                    "attn_drop": attn_drop,
                    "ln1_xhat": ln1_xhat, "ln1_inv": ln1_inv,
                    "h1": h1,
                    "u": u, "gu": gu,
                    "ffn_drop": ffn_drop,
                    "ln2_xhat": ln2_xhat, "ln2_inv": ln2_inv,
                }
            )

    h_cls = h[:, 0, :]
    pooled_pre = h_cls @ params.pooler_w + params.pooler_b
    pooled = np.tanh(pooled_pre)
    logits = pooled @ params.classifier_w.T + params.classifier_b
    if need_cache:
        cache["h_cls"] = h_cls
        cache["pooled"] = pooled
        cache["h_last_shape"] = h.shape
    return logits, cache


def forward(
    params: ModelParams,
    batch: Sequence[Encoding],
    train_mode: bool = False,
    dropout_seed: int | np.random.SeedSequence | None = None,
) -> np.ndarray:
    """Class scores for a batch of encodings, shape (batch, 4)."""
    ids, mask = collate(batch, params.config)
    logits, _ = forward_with_cache(params, ids, mask, train_mode, dropout_seed)
    return logits


def backward_from_logits(
    params: ModelParams, cache: dict, dlogits: np.ndarray
) -> dict[str, np.ndarray]:
    """Exact gradients of every parameter tensor given d(loss)/d(logits)."""
    cfg = params.config
    B, T, d = cache["h_last_shape"]
    grads: dict[str, np.ndarray] = {}

    pooled = cache["pooled"]
    grads["classifier_w"] = dlogits.T @ pooled
    grads["classifier_b"] = dlogits.sum(axis=0)
    dpooled = dlogits @ params.classifier_w
    dpooled_pre = dpooled * (1.0 - pooled * pooled)
    grads["pooler_w"] = cache["h_cls"].T @ dpooled_pre
    grads["pooler_b"] = dpooled_pre.sum(axis=0)
    dh = np.zeros((B, T, d), dtype=np.float64)
    dh[:, 0, :] = dpooled_pre @ params.pooler_w.T

    scale = 1.0 / np.sqrt(cfg.d_head)
    for i in range(cfg.n_layers - 1, -1, -1):
        layer = params.layers[i]
        lc = cache["layers"][i]
        prefix = f"layer{i}."

        dr2, dg2, db2 = _layernorm_backward(dh, lc["ln2_xhat"], lc["ln2_inv"], layer.ln2_gain)
        grads[prefix + "ln2_gain"] = dg2
        grads[prefix + "ln2_bias"] = db2
        dh1 = dr2.copy()
        df = dr2
        if lc["ffn_drop"] is not None:
            df = df * lc["ffn_drop"]
        gu = lc["gu"]
        grads[prefix + "w2"] = gu.reshape(-1, cfg.d_ff).T @ df.reshape(-1, d)
        grads[prefix + "b2"] = df.sum(axis=(0, 1))
        du = (df @ layer.w2.T) * gelu_grad(lc["u"])
        h1 = lc["h1"]
        grads[prefix + "w1"] = h1.reshape(-1, d).T @ du.reshape(-1, cfg.d_ff)
        grads[prefix + "b1"] = du.sum(axis=(0, 1))
        dh1 += du @ layer.w1.T

        dr1, dg1, db1 = _layernorm_backward(dh1, lc["ln1_xhat"], lc["ln1_inv"], layer.ln1_gain)
        grads[prefix + "ln1_gain"] = dg1
        grads[prefix + "ln1_bias"] = db1
        dh_prev = dr1.copy()
        dattn = dr1
        if lc["attn_drop"] is not None:
            dattn = dattn * lc["attn_drop"]
        ctx = lc["ctx"]
        grads[prefix + "wo"] = ctx.reshape(-1, d).T @ dattn.reshape(-1, d)
        grads[prefix + "bo"] = dattn.sum(axis=(0, 1))
        dctx = (dattn @ layer.wo.T).reshape(B, T, cfg.n_heads, cfg.d_head).transpose(0, 2, 1, 3)

        probs, q, k, v = lc["probs"], lc["q"], lc["k"], lc["v"]
        dprobs = dctx @ v.transpose(0, 1, 3, 2)
        dv = probs.transpose(0, 1, 3, 2) @ dctx
        dscores = probs * (dprobs - (dprobs * probs).sum(axis=-1, keepdims=True))
        dq = dscores @ k * scale
        dk = dscores.transpose(0, 1, 3, 2) @ q * scale

        h_in = lc["h_in"]
        h_flat = h_in.reshape(-1, d)
        for name, dproj, w in (("q", dq, layer.wq), ("k", dk, layer.wk), ("v", dv, layer.wv)):
            dmat = dproj.transpose(0, 2, 1, 3).reshape(B * T, d)
            grads[prefix + "w" + name] = h_flat.T @ dmat
            grads[prefix + "b" + name] = dmat.sum(axis=0)
            dh_prev += (dmat @ w.T).reshape(B, T, d)
        dh = dh_prev

    if cache["emb_drop"] is not None:
        dh = dh * cache["emb_drop"]
    dx, dge, dbe = _layernorm_backward(dh, cache["emb_xhat"], cache["emb_inv"], params.emb_ln_gain)
    grads["emb_ln_gain"] = dge
    grads["emb_ln_bias"] = dbe

    dtok = np.zeros_like(params.tok_emb)
    np.add.at(dtok, cache["ids"].reshape(-1), dx.reshape(-1, d))
    grads["tok_emb"] = dtok
    grads["pos_emb"] = dx.sum(axis=0)
    dseg = np.zeros_like(params.seg_emb)
    dseg[0] = dx.sum(axis=(0, 1))
    grads["seg_emb"] = dseg
    return grads


def predict_proba(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction; rows sum to 1."""
    return _softmax_lastaxis(np.asarray(logits, dtype=np.float64))


def _header_dict(params: ModelParams) -> dict:
    return {
        "config": params.config.to_dict(),
        "vocab_hash": params.vocab_hash,
        "init_seed": params.init_seed,
    }


def save_checkpoint(params: ModelParams, path: str | Path) -> None:
    """Write magic, version, JSON metadata header, then float32 tensors."""
    header = json.dumps(_header_dict(params), sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for _, arr in param_tensors(params):
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_checkpoint(path: str | Path) -> ModelParams:
    """Read a checkpoint, validating magic, version, and tensor shapes."""
    p = Path(path)
    if not p.is_file():
        raise InputPathError(f"cannot read checkpoint file: {p}")
    blob = p.read_bytes()
    if blob[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise DataValidationError(f"{p} is not a checkpoint (bad magic bytes)")
    off = len(CHECKPOINT_MAGIC)
    (version,) = struct.unpack_from("<I", blob, off)
    off += 4
    if version != CHECKPOINT_VERSION:
        raise DataValidationError(f"unsupported checkpoint version {version}")
    (hlen,) = struct.unpack_from("<I", blob, off)
    off += 4
    try:
        header = json.loads(blob[off : off + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataValidationError(f"corrupt checkpoint header: {exc}")
    off += hlen
    config = EncoderConfig(**header["config"])

    tensors: dict[str, np.ndarray] = {}
    for name, shape in tensor_shapes(config):
        count = int(np.prod(shape))
        nbytes = 4 * count
        if off + nbytes > len(blob):
            raise DataValidationError(
                f"checkpoint truncated: tensor {name} with shape {shape} is incomplete"
            )
        flat = np.frombuffer(blob, dtype="<f4", count=count, offset=off)
        tensors[name] = flat.reshape(shape).astype(np.float64)
        off += nbytes
    if off != len(blob):
        raise DataValidationError(f"checkpoint has {len(blob) - off} unexpected trailing bytes")

    layers = []
    for i in range(config.n_layers):
        prefix = f"layer{i}."
        layers.append(
            LayerParams(**{f: tensors[prefix + f] for f in (
                "wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo",
                "ln1_gain", "ln1_bias", "w1", "b1", "w2", "b2", "ln2_gain", "ln2_bias",
            )})
        )
    return ModelParams(
        config=config,
        tok_emb=tensors["tok_emb"],
        pos_emb=tensors["pos_emb"],
        seg_emb=tensors["seg_emb"],
        emb_ln_gain=tensors["emb_ln_gain"],
        emb_ln_bias=tensors["emb_ln_bias"],
        layers=layers,
        pooler_w=tensors["pooler_w"],
        pooler_b=tensors["pooler_b"],
        classifier_w=tensors["classifier_w"],
        classifier_b=tensors["classifier_b"],
        vocab_hash=header.get("vocab_hash"),
        init_seed=header.get("init_seed"),
    )
