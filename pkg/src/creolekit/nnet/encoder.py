"""A small pre-layer-norm transformer encoder for masked LM, in plain numpy.

Forward and backward passes are written out analytically so gradients can be
audited against central finite differences. Weights are float32; the vocabulary
log-softmax and all loss reductions accumulate in float64. Input/output token
embeddings are tied; PAD keys are excluded from attention so padding content
never influences real positions.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .vocab import PAD_ID

LN_EPS = 1e-5
SQRT1_2 = 1.0 / math.sqrt(2.0)
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class SizePreset:
    name: str
    layers: int
    d: int
    heads: int
    l_max: int

    def __post_init__(self):
        if self.d % self.heads != 0:
            raise ValueError("d must be divisible by heads")


PRESETS = {
    "tiny": SizePreset("tiny", layers=2, d=128, heads=2, l_max=64),
    "small": SizePreset("small", layers=4, d=256, heads=4, l_max=64),
    "base": SizePreset("base", layers=6, d=512, heads=8, l_max=128),
}


def param_count(preset: SizePreset, vocab_size: int) -> int:
    """Closed-form parameter count for a preset and vocabulary size."""
    d = preset.d
    per_layer = 12 * d * d + 13 * d
    return vocab_size * d + preset.l_max * d + preset.layers * per_layer + 2 * d + vocab_size


def _tensor_shapes(preset: SizePreset, vocab_size: int) -> dict[str, tuple[int, ...]]:
    d = preset.d
    shapes = {
        "tok_emb": (vocab_size, d),
        "pos_emb": (preset.l_max, d),
    }
    for i in range(preset.layers):
        p = f"layers.{i}."
        shapes[p + "ln1.g"] = (d,)
        shapes[p + "ln1.b"] = (d,)
        for mat in ("wq", "wk", "wv", "wo"):
            shapes[p + "attn." + mat] = (d, d)
        for vec in ("bq", "bk", "bv", "bo"):
            shapes[p + "attn." + vec] = (d,)
        shapes[p + "ln2.g"] = (d,)
        shapes[p + "ln2.b"] = (d,)
        shapes[p + "ff.w1"] = (d, 4 * d)
        shapes[p + "ff.b1"] = (4 * d,)
        shapes[p + "ff.w2"] = (4 * d, d)
        shapes[p + "ff.b2"] = (d,)
    shapes["ln_f.g"] = (d,)
    shapes["ln_f.b"] = (d,)
    shapes["out_bias"] = (vocab_size,)
    return shapes


class EncoderParams:
    """Named parameter tensors for one encoder instance."""

    def __init__(self, preset: SizePreset, vocab_size: int, tensors: dict[str, np.ndarray]):
        expected = _tensor_shapes(preset, vocab_size)
        if set(tensors) != set(expected):
            missing = set(expected) - set(tensors)
            extra = set(tensors) - set(expected)
            raise ValueError(f"tensor set mismatch (missing {sorted(missing)}, extra {sorted(extra)})")
        for name, shape in expected.items():
            if tensors[name].shape != shape:
                raise ValueError(f"{name}: shape {tensors[name].shape}, expected {shape}")
            if not np.all(np.isfinite(tensors[name])):
                raise ValueError(f"{name}: non-finite values")
        self.preset = preset
        self.vocab_size = vocab_size
        self.tensors = {name: tensors[name] for name in expected}

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def num_params(self) -> int:
        return sum(t.size for t in self.tensors.values())

    def copy(self) -> "EncoderParams":
        return EncoderParams(
            self.preset, self.vocab_size, {k: v.copy() for k, v in self.tensors.items()}
        )

    def astype(self, dtype) -> "EncoderParams":
        return EncoderParams(
            self.preset, self.vocab_size, {k: v.astype(dtype) for k, v in self.tensors.items()}
        )


def init_encoder(preset: SizePreset | str, vocab_size: int, seed: int) -> EncoderParams:
    """Seeded init: weights ~ N(0, 0.02), layer-norm gains 1, all biases 0."""
    if isinstance(preset, str):
        preset = PRESETS[preset]
    if vocab_size < 4:
        raise ValueError("vocab_size must be >= 4")
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in _tensor_shapes(preset, vocab_size).items():
        leaf = name.rsplit(".", 1)[-1]
        if leaf in ("g",):
            tensors[name] = np.ones(shape, dtype=np.float32)
        elif leaf in ("b", "bq", "bk", "bv", "bo", "b1", "b2") or name == "out_bias":
            tensors[name] = np.zeros(shape, dtype=np.float32)
        else:
            tensors[name] = rng.normal(0.0, 0.02, size=shape).astype(np.float32)
    return EncoderParams(preset, vocab_size, tensors)


def zeros_like_params(params: EncoderParams) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in params.tensors.items()}


@dataclass
class MaskedBatch:
    """A token batch with recorded mask positions and their original ids."""

    ids: np.ndarray  # (B, T) int64, post mask replacement
    attn_mask: np.ndarray  # (B, T) bool, True at real tokens
    mask_rows: np.ndarray  # (M,) example index per masked position
    mask_cols: np.ndarray  # (M,) position index
    originals: np.ndarray  # (M,) gold token id at each masked position

    def __post_init__(self):
        if not (len(self.mask_rows) == len(self.mask_cols) == len(self.originals)):
            raise ValueError("mask position arrays must align")
        if len(self.mask_rows) and not np.all(self.attn_mask[self.mask_rows, self.mask_cols]):
            raise ValueError("mask position indexes a PAD token")
        if np.any(self.originals == PAD_ID):
            raise ValueError("original id at a masked position is PAD")
        if len(set(zip(self.mask_rows.tolist(), self.mask_cols.tolist()))) != len(self.mask_rows):
            raise ValueError("duplicate mask positions")

    @property
    def n_examples(self) -> int:
        return self.ids.shape[0]

    def masks_per_example(self) -> np.ndarray:
        return np.bincount(self.mask_rows, minlength=self.n_examples)


def pad_batch(seqs: list[list[int]], l_max: int) -> np.ndarray:
    """Stack variable-length id lists into a PAD-filled (B, T) matrix, T <= l_max."""
    if not seqs:
        raise ValueError("empty batch")
    clipped = [s[:l_max] for s in seqs]
    if any(len(s) == 0 for s in clipped):
        raise ValueError("batch contains an empty sequence")
    t = max(len(s) for s in clipped)
    ids = np.full((len(clipped), t), PAD_ID, dtype=np.int64)
    for i, s in enumerate(clipped):
        ids[i, : len(s)] = s
    return ids


def _gelu(x):
    return 0.5 * x * (1.0 + erf(x * SQRT1_2))


def _gelu_grad(x):
    return 0.5 * (1.0 + erf(x * SQRT1_2)) + x * INV_SQRT_2PI * np.exp(-0.5 * x * x)


def _ln_fwd(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = np.mean(xc * xc, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = xc * inv
    return xhat * g + b, (xhat, inv)

def _ln_bwd(dout, cache, g):
    xhat, inv = cache
    dg = (dout * xhat).sum(axis=(0, 1))
    db = dout.sum(axis=(0, 1))
    dxhat = dout * g
    m1 = dxhat.mean(axis=-1, keepdims=True)
    m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
    dx = inv * (dxhat - m1 - xhat * m2)
    return dx, dg, db


def _split_heads(x, heads):
    b, t, d = x.shape
    return x.reshape(b, t, heads, d // heads).transpose(0, 2, 1, 3)


def _merge_heads(x):
    b, h, t, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, t, h * dh)


def forward_hidden(params: EncoderParams, ids: np.ndarray):
    """Run the encoder stack; returns final hidden states (B, T, d) and a cache."""
    preset = params.preset
    b, t = ids.shape
    if t > preset.l_max:
        raise ValueError(f"sequence length {t} exceeds l_max {preset.l_max}")
    attn_mask = ids != PAD_ID
    if not np.all(attn_mask.any(axis=1)):
        raise ValueError("every example needs at least one non-PAD token")

    x = params["tok_emb"][ids] + params["pos_emb"][:t]
    cache = {"ids": ids, "attn_mask": attn_mask, "layers": []}
    scale = 1.0 / math.sqrt(preset.d // preset.heads)
    for i in range(preset.layers):
        p = f"layers.{i}."
        lc = {"x_in": x}
        h, lc["ln1"] = _ln_fwd(x, params[p + "ln1.g"], params[p + "ln1.b"])
        lc["h"] = h
        q = _split_heads(h @ params[p + "attn.wq"] + params[p + "attn.bq"], preset.heads)
        k = _split_heads(h @ params[p + "attn.wk"] + params[p + "attn.bk"], preset.heads)
        v = _split_heads(h @ params[p + "attn.wv"] + params[p + "attn.bv"], preset.heads)
        s = (q @ k.transpose(0, 1, 3, 2)) * scale
        s = np.where(attn_mask[:, None, None, :], s, -np.inf)
        s_max = s.max(axis=-1, keepdims=True)
        e = np.exp(s - s_max)
        w = e / e.sum(axis=-1, keepdims=True)
        c = _merge_heads(w @ v)
        o = c @ params[p + "attn.wo"] + params[p + "attn.bo"]
        lc.update(q=q, k=k, v=v, w=w, c=c)
        x = x + o
        lc["x_mid"] = x
        h2, lc["ln2"] = _ln_fwd(x, params[p + "ln2.g"], params[p + "ln2.b"])
        lc["h2"] = h2
        u = h2 @ params[p + "ff.w1"] + params[p + "ff.b1"]
        gact = _gelu(u)
        lc.update(u=u, gact=gact)
        x = x + gact @ params[p + "ff.w2"] + params[p + "ff.b2"]
        cache["layers"].append(lc)
    hidden, cache["ln_f"] = _ln_fwd(x, params["ln_f.g"], params["ln_f.b"])
    cache["hidden"] = hidden
    return hidden, cache


def backward_from_hidden(params: EncoderParams, cache, d_hidden) -> dict[str, np.ndarray]:
    """Backprop an upstream gradient on the final hidden states into all parameters."""
    preset = params.preset
    grads = zeros_like_params(params)
    scale = 1.0 / math.sqrt(preset.d // preset.heads)

    dx, grads["ln_f.g"], grads["ln_f.b"] = _ln_bwd(d_hidden, cache["ln_f"], params["ln_f.g"])
    for i in reversed(range(preset.layers)):
        p = f"layers.{i}."
        lc = cache["layers"][i]
        b, t, d = dx.shape
        # feed-forward block
        df = dx
        dgact = df @ params[p + "ff.w2"].T
        grads[p + "ff.w2"] = lc["gact"].reshape(b * t, -1).T @ df.reshape(b * t, d)
        grads[p + "ff.b2"] = df.sum(axis=(0, 1))
        du = dgact * _gelu_grad(lc["u"])
        grads[p + "ff.w1"] = lc["h2"].reshape(b * t, d).T @ du.reshape(b * t, -1)
        grads[p + "ff.b1"] = du.sum(axis=(0, 1))
        dh2 = du @ params[p + "ff.w1"].T
        dx_mid, grads[p + "ln2.g"], grads[p + "ln2.b"] = _ln_bwd(dh2, lc["ln2"], params[p + "ln2.g"])
        dx_mid = dx + dx_mid
        # attention block
        do = dx_mid
        grads[p + "attn.wo"] = lc["c"].reshape(b * t, d).T @ do.reshape(b * t, d)
        grads[p + "attn.bo"] = do.sum(axis=(0, 1))
        dc = _split_heads(do @ params[p + "attn.wo"].T, preset.heads)
        dw = dc @ lc["v"].transpose(0, 1, 3, 2)
        dv = lc["w"].transpose(0, 1, 3, 2) @ dc
        ds = lc["w"] * (dw - (dw * lc["w"]).sum(axis=-1, keepdims=True))
        dq = (ds @ lc["k"]) * scale
        dk = (ds.transpose(0, 1, 3, 2) @ lc["q"]) * scale
        dq, dk, dv = _merge_heads(dq), _merge_heads(dk), _merge_heads(dv)
        h_flat = lc["h"].reshape(b * t, d)
        grads[p + "attn.wq"] = h_flat.T @ dq.reshape(b * t, d)
        grads[p + "attn.bq"] = dq.sum(axis=(0, 1))
        grads[p + "attn.wk"] = h_flat.T @ dk.reshape(b * t, d)
        grads[p + "attn.bk"] = dk.sum(axis=(0, 1))
        grads[p + "attn.wv"] = h_flat.T @ dv.reshape(b * t, d)
        grads[p + "attn.bv"] = dv.sum(axis=(0, 1))
        dh = dq @ params[p + "attn.wq"].T + dk @ params[p + "attn.wk"].T + dv @ params[p + "attn.wv"].T
        dx_in, grads[p + "ln1.g"], grads[p + "ln1.b"] = _ln_bwd(dh, lc["ln1"], params[p + "ln1.g"])
        dx = dx_mid + dx_in

    ids = cache["ids"]
    np.add.at(grads["tok_emb"], ids, dx)
    grads["pos_emb"][: ids.shape[1]] = dx.sum(axis=0)
    dtype = params["tok_emb"].dtype
    return {k: v.astype(dtype, copy=False) for k, v in grads.items()}


def forward_mlm(params: EncoderParams, batch) -> np.ndarray:
    """Per-position log-probabilities (B, T, |V|) in float64; each row log-sums to 0."""
    ids = batch.ids if isinstance(batch, MaskedBatch) else np.asarray(batch)
    hidden, _ = forward_hidden(params, ids)
    logits = (hidden @ params["tok_emb"].T).astype(np.float64) + params["out_bias"].astype(np.float64)
    m = logits.max(axis=-1, keepdims=True)
    lse = m + np.log(np.exp(logits - m).sum(axis=-1, keepdims=True))
    return logits - lse


def _mlm_head(params: EncoderParams, hidden) -> np.ndarray:
    logits = (hidden @ params["tok_emb"].T).astype(np.float64) + params["out_bias"].astype(np.float64)
    m = logits.max(axis=-1, keepdims=True)
    lse = m + np.log(np.exp(logits - m).sum(axis=-1, keepdims=True))
    return logits - lse


def mlm_losses(params: EncoderParams, batch: MaskedBatch) -> np.ndarray:
    """Per-example mean cross-entropy over that example's masked positions (float64)."""
    counts = batch.masks_per_example()
    if np.any(counts == 0):
        raise ValueError(f"examples without mask positions: {np.where(counts == 0)[0].tolist()}")
    hidden, _ = forward_hidden(params, batch.ids)
    logp = _mlm_head(params, hidden)
    nll = -logp[batch.mask_rows, batch.mask_cols, batch.originals]
    per_example = np.zeros(batch.n_examples, dtype=np.float64)
    np.add.at(per_example, batch.mask_rows, nll)
    return per_example / counts


def mlm_forward(params: EncoderParams, batch: MaskedBatch):
    """Forward pass for training: per-example losses plus a backward context."""
    counts = batch.masks_per_example()
    if np.any(counts == 0):
        raise ValueError(f"examples without mask positions: {np.where(counts == 0)[0].tolist()}")
    hidden, cache = forward_hidden(params, batch.ids)
    logp = _mlm_head(params, hidden)
    rows, cols = batch.mask_rows, batch.mask_cols
    nll = -logp[rows, cols, batch.originals]
    losses = np.zeros(batch.n_examples, dtype=np.float64)
    np.add.at(losses, rows, nll)
    losses = losses / counts
    ctx = {"hidden": hidden, "cache": cache, "probs": np.exp(logp[rows, cols]), "counts": counts}
    return losses, ctx


def mlm_backward(params: EncoderParams, batch: MaskedBatch, ctx, example_weights) -> dict[str, np.ndarray]:
    """Analytic gradients of sum_b w_b * loss_b from a forward context."""
    rows, cols, orig = batch.mask_rows, batch.mask_cols, batch.originals
    weights = np.asarray(example_weights, dtype=np.float64)
    # d objective / d logits at masked positions: coef * (softmax - onehot),
    # coef = w_b / masks_in_example
    coef = weights[rows] / ctx["counts"][rows]
    dlogits = coef[:, None] * ctx["probs"]
    dlogits[np.arange(len(rows)), orig] -= coef

    hidden = ctx["hidden"]
    emb64 = params["tok_emb"].astype(np.float64)
    hid_masked = hidden[rows, cols].astype(np.float64)
    d_hidden = np.zeros(hidden.shape, dtype=params["tok_emb"].dtype)
    d_hidden[rows, cols] = (dlogits @ emb64).astype(d_hidden.dtype)

    grads = backward_from_hidden(params, ctx["cache"], d_hidden)
    grads["tok_emb"] += (dlogits.T @ hid_masked).astype(grads["tok_emb"].dtype)
    grads["out_bias"] += dlogits.sum(axis=0).astype(grads["out_bias"].dtype)
    return grads


def loss_and_grad(params: EncoderParams, batch: MaskedBatch, example_weights=None):
    """Losses plus analytic gradients of sum_b w_b * loss_b (weights default to 1).

    Returns (per-example loss vector float64, dict of gradients matching the
    parameter tensors).
    """
    if example_weights is None:
        example_weights = np.ones(batch.n_examples, dtype=np.float64)
    losses, ctx = mlm_forward(params, batch)
    grads = mlm_backward(params, batch, ctx, example_weights)
    return losses, grads
