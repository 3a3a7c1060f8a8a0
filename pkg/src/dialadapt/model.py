"""Character-level encoder-decoder with global attention, in plain numpy.

Both encoder and decoder are 2-layer unidirectional LSTMs.  The decoder is
input-fed: the attentional vector of step t-1 is concatenated to the symbol
embedding at step t.  Attention uses the bilinear score h_t' W_a h_s and the
attentional vector tanh(W_c [c; h]); neither carries a bias.

Gradients are hand-derived.  `gradient_check` compares them against central
finite differences on a 64-bit copy of the model, which is the reason the
whole forward/backward pipeline supports float64.

Checkpoints are a single binary file: an 8-byte magic, a version, a JSON
header (dims, vocabulary, metadata, tensor manifest) and the raw tensor
bytes in a fixed canonical order, everything little-endian.  Saving a loaded
checkpoint reproduces the file byte for byte.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import CheckpointError, ModelError
from .vocab import BOS_ID, EOS_ID, PAD_ID, Vocabulary

MAGIC = b"DLADCKPT"
CHECKPOINT_VERSION = 1

TENSOR_ORDER = (
    "src_emb", "tgt_emb",
    "enc_l1_Wx", "enc_l1_Wh", "enc_l1_b",
    "enc_l2_Wx", "enc_l2_Wh", "enc_l2_b",
    "dec_l1_Wx", "dec_l1_Wh", "dec_l1_b",
    "dec_l2_Wx", "dec_l2_Wh", "dec_l2_b",
    "attn_Wa", "attn_Wc",
    "out_W", "out_b",
)

PARAM_GROUPS = {
    "src_emb": ("src_emb",),
    "tgt_emb": ("tgt_emb",),
    "enc_l1": ("enc_l1_Wx", "enc_l1_Wh", "enc_l1_b"),
    "enc_l2": ("enc_l2_Wx", "enc_l2_Wh", "enc_l2_b"),
    "dec_l1": ("dec_l1_Wx", "dec_l1_Wh", "dec_l1_b"),
    "dec_l2": ("dec_l2_Wx", "dec_l2_Wh", "dec_l2_b"),
    "attn": ("attn_Wa", "attn_Wc"),
    "out": ("out_W", "out_b"),
}

TRANSFER_FROZEN_GROUPS = frozenset({"src_emb", "enc_l1"})

NP_DTYPES = {"float32": np.float32, "float64": np.float64}


@dataclass(frozen=True)
class ModelConfig:
    """Layer widths and arithmetic precision."""

    d_emb: int
    d_h: int
    dtype: str = "float32"

    def __post_init__(self):
        if self.d_emb < 1 or self.d_h < 1:
            raise ModelError(f"non-positive dimensions: d_emb={self.d_emb}, d_h={self.d_h}")
        if self.dtype not in NP_DTYPES:
            raise ModelError(f"unsupported dtype {self.dtype!r}; use one of {sorted(NP_DTYPES)}")

    @property
    def np_dtype(self):
        return NP_DTYPES[self.dtype]


PROFILES = {
    "reference": ModelConfig(d_emb=500, d_h=500),
    "desk": ModelConfig(d_emb=64, d_h=128),
    "tiny": ModelConfig(d_emb=8, d_h=16, dtype="float64"),
}


def tensor_shapes(config: ModelConfig, vocab_size: int) -> dict[str, tuple[int, ...]]:
    e, h, v = config.d_emb, config.d_h, vocab_size
    return {
        "src_emb": (v, e), "tgt_emb": (v, e),
        "enc_l1_Wx": (e, 4 * h), "enc_l1_Wh": (h, 4 * h), "enc_l1_b": (4 * h,),
        "enc_l2_Wx": (h, 4 * h), "enc_l2_Wh": (h, 4 * h), "enc_l2_b": (4 * h,),
        "dec_l1_Wx": (e + h, 4 * h), "dec_l1_Wh": (h, 4 * h), "dec_l1_b": (4 * h,),
        "dec_l2_Wx": (h, 4 * h), "dec_l2_Wh": (h, 4 * h), "dec_l2_b": (4 * h,),
        "attn_Wa": (h, h), "attn_Wc": (2 * h, h),
        "out_W": (h, v), "out_b": (v,),
    }


class ModelParams:
    """All trainable tensors, keyed by canonical name."""

    def __init__(self, config: ModelConfig, vocab_size: int, tensors: dict[str, np.ndarray]):
        expected = tensor_shapes(config, vocab_size)
        if set(tensors) != set(expected):
            missing = sorted(set(expected) - set(tensors))
            extra = sorted(set(tensors) - set(expected))
            raise ModelError(f"tensor set mismatch: missing {missing}, unexpected {extra}")
        np_dtype = config.np_dtype
        for name, shape in expected.items():
            arr = tensors[name]
            if tuple(arr.shape) != shape:
                raise ModelError(f"tensor {name!r} has shape {arr.shape}, expected {shape}")
            if arr.dtype != np_dtype:
                raise ModelError(f"tensor {name!r} has dtype {arr.dtype}, expected {config.dtype}")
        self.config = config
        self.vocab_size = vocab_size
        self.tensors = {name: tensors[name] for name in TENSOR_ORDER}

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    @property
    def dtype(self):
        return self.config.np_dtype

    @classmethod
    def init(cls, config: ModelConfig, vocab_size: int, seed: int = 0) -> "ModelParams":
        """Glorot-uniform matrices, small uniform embeddings, forget bias 1."""
        rng = np.random.default_rng(seed)
        dt = config.np_dtype
        h = config.d_h
        tensors: dict[str, np.ndarray] = {}
        for name, shape in tensor_shapes(config, vocab_size).items():
            if name.endswith("_b") or name == "out_b":
                arr = np.zeros(shape, dtype=dt)
                if name.startswith(("enc_", "dec_")):
                    arr[h : 2 * h] = 1.0
            elif name in ("src_emb", "tgt_emb"):
                arr = rng.uniform(-0.1, 0.1, size=shape).astype(dt)
            else:
                limit = np.sqrt(6.0 / (shape[0] + shape[1]))
                arr = rng.uniform(-limit, limit, size=shape).astype(dt)
            tensors[name] = arr
        return cls(config, vocab_size, tensors)

    def clone(self) -> "ModelParams":
        return ModelParams(self.config, self.vocab_size, {k: v.copy() for k, v in self.tensors.items()})

    def astype(self, dtype: str) -> "ModelParams":
        config = ModelConfig(self.config.d_emb, self.config.d_h, dtype)
        tensors = {k: v.astype(config.np_dtype) for k, v in self.tensors.items()}
        return ModelParams(config, self.vocab_size, tensors)

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.tensors.items()}


@dataclass
class ModelMeta:
    """What kind of inputs the model was trained on.

    mode 'flagged' means every source sequence starts with a dialect flag;
    'plain' means unflagged input, with `dialect` naming the single dialect
    a specialized model was tuned for (None for a generic model).
    """

    mode: str = "plain"
    dialect: str | None = None
    steps: int = 0

    def __post_init__(self):
        if self.mode not in ("flagged", "plain"):
            raise ModelError(f"unknown mode {self.mode!r}; use 'flagged' or 'plain'")
        if self.mode == "flagged" and self.dialect is not None:
            raise ModelError("a flagged model serves all dialects; dialect must be None")

    def to_dict(self) -> dict:
        return {"mode": self.mode, "dialect": self.dialect, "steps": self.steps}

    @classmethod
    def from_dict(cls, data: dict) -> "ModelMeta":
        return cls(mode=data["mode"], dialect=data["dialect"], steps=int(data["steps"]))


@dataclass
class Batch:
    """Padded id matrices for one training step; masks mark real positions."""

    src: np.ndarray
    src_mask: np.ndarray
    tgt_in: np.ndarray
    tgt_out: np.ndarray
    tgt_mask: np.ndarray

    @property
    def size(self) -> int:
        return self.src.shape[0]

    @property
    def n_target_tokens(self) -> float:
        return float(self.tgt_mask.sum())


def make_batch(pairs: list[tuple[list[int], list[int]]], dtype=np.float32) -> Batch:
    """Pad id pairs into matrices; appends EOS to sources and targets, BOS to
    decoder inputs."""
    if not pairs:
        raise ModelError("empty batch")
    for src_ids, tgt_ids in pairs:
        if not src_ids or not tgt_ids:
            raise ModelError("batch contains an empty sequence")
    b = len(pairs)
    s_len = max(len(s) for s, _ in pairs) + 1
    t_len = max(len(t) for _, t in pairs) + 1
    src = np.full((b, s_len), PAD_ID, dtype=np.int32)
    src_mask = np.zeros((b, s_len), dtype=dtype)
    tgt_in = np.full((b, t_len), PAD_ID, dtype=np.int32)
    tgt_out = np.full((b, t_len), PAD_ID, dtype=np.int32)
    tgt_mask = np.zeros((b, t_len), dtype=dtype)
    for i, (src_ids, tgt_ids) in enumerate(pairs):
        n = len(src_ids)
        src[i, :n] = src_ids
        src[i, n] = EOS_ID
        src_mask[i, : n + 1] = 1.0
        m = len(tgt_ids)
        tgt_in[i, 0] = BOS_ID
        tgt_in[i, 1 : m + 1] = tgt_ids
        tgt_out[i, :m] = tgt_ids
        tgt_out[i, m] = EOS_ID
        tgt_mask[i, : m + 1] = 1.0
    return Batch(src, src_mask, tgt_in, tgt_out, tgt_mask)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # exp may overflow to inf for very negative inputs; 1/(1+inf) is the
    # correct 0, so only the warning needs suppressing
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


def _cell_forward(z: np.ndarray, c_prev: np.ndarray):
    h_dim = c_prev.shape[1]
    i = _sigmoid(z[:, :h_dim])
    f = _sigmoid(z[:, h_dim : 2 * h_dim])
    g = np.tanh(z[:, 2 * h_dim : 3 * h_dim])
    o = _sigmoid(z[:, 3 * h_dim :])
    c = f * c_prev + i * g
    ct = np.tanh(c)
    h = o * ct
    return h, c, (i, f, g, o, c_prev, ct)


def _cell_backward(dh: np.ndarray, dc_in: np.ndarray, cache):
    i, f, g, o, c_prev, ct = cache
    do = dh * ct
    dc = dc_in + dh * o * (1.0 - ct * ct)
    di = dc * g
    df = dc * c_prev
    dg = dc * i
    dc_prev = dc * f
    dz = np.concatenate(
        [di * i * (1.0 - i), df * f * (1.0 - f), dg * (1.0 - g * g), do * o * (1.0 - o)],
        axis=1,
    )
    return dz, dc_prev


def _encoder_layer_forward(x, wx, wh, b, mask):
    """Run one LSTM layer over time; padded steps carry the previous state."""
    b_sz, s_len, _ = x.shape
    h_dim = wh.shape[0]
    xz = (x.reshape(b_sz * s_len, -1) @ wx).reshape(b_sz, s_len, 4 * h_dim) + b
    h = np.zeros((b_sz, h_dim), dtype=x.dtype)
    c = np.zeros_like(h)
    hs = np.empty((b_sz, s_len, h_dim), dtype=x.dtype)
    caches = []
    for t in range(s_len):
        z = xz[:, t] + h @ wh
        h_cell, c_cell, cc = _cell_forward(z, c)
        m = mask[:, t][:, None]
        caches.append((h, cc))
        h = m * h_cell + (1.0 - m) * h
        c = m * c_cell + (1.0 - m) * c
        hs[:, t] = h
    return hs, h, c, (x, caches)


def _encoder_layer_backward(d_hs, dh_fin, dc_fin, wx, wh, mask, fwd_cache):
    x, caches = fwd_cache
    b_sz, s_len, d_in = x.shape
    h_dim = wh.shape[0]
    dz_all = np.zeros((b_sz, s_len, 4 * h_dim), dtype=x.dtype)
    d_wh = np.zeros_like(wh)
    dh = dh_fin
    dc = dc_fin
    for t in reversed(range(s_len)):
        dh_out = d_hs[:, t] + dh
        dc_out = dc
        m = mask[:, t][:, None]
        h_prev, cc = caches[t]
        dz, dc_prev = _cell_backward(m * dh_out, m * dc_out, cc)
        dz_all[:, t] = dz
        d_wh += h_prev.T @ dz
        dh = (1.0 - m) * dh_out + dz @ wh.T
        dc = (1.0 - m) * dc_out + dc_prev
    dz_flat = dz_all.reshape(b_sz * s_len, 4 * h_dim)
    dx = (dz_flat @ wx.T).reshape(b_sz, s_len, d_in)
    d_wx = x.reshape(b_sz * s_len, d_in).T @ dz_flat
    d_b = dz_flat.sum(axis=0)
    return dx, d_wx, d_wh, d_b


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _dropout_mask(rng, shape, p, dtype):
    return (rng.random(shape) >= p).astype(dtype) / dtype(1.0 - p)


class _ForwardState:
    """Everything the backward pass needs, bundled to keep signatures sane."""

    __slots__ = (
        "batch", "emb_src", "enc1", "enc2", "hs_enc", "emb_tgt", "dec_caches",
        "htd", "logp", "m_enc12", "m_dec12", "m_ht", "h2_all", "q_all", "a_all",
        "ca_all", "ht_all", "h1d_all",
    )


def _forward(params: ModelParams, batch: Batch, dropout: float = 0.0, rng=None):
    """Teacher-forced forward pass; returns pooled loss, per-example losses
    and the cache for `_backward`."""
    p = params.tensors
    dt = params.dtype
    e_dim = params.config.d_emb
    h_dim = params.config.d_h
    b_sz, s_len = batch.src.shape
    t_len = batch.tgt_in.shape[1]
    if dropout and rng is None:
        raise ModelError("dropout requires a random generator")

    st = _ForwardState()
    st.batch = batch
    st.m_enc12 = st.m_dec12 = st.m_ht = None
    if dropout:
        st.m_enc12 = _dropout_mask(rng, (b_sz, s_len, h_dim), dropout, dt)
        st.m_dec12 = _dropout_mask(rng, (b_sz, t_len, h_dim), dropout, dt)
        st.m_ht = _dropout_mask(rng, (b_sz, t_len, h_dim), dropout, dt)

    st.emb_src = p["src_emb"][batch.src]
    hs1, h1, c1, st.enc1 = _encoder_layer_forward(
        st.emb_src, p["enc_l1_Wx"], p["enc_l1_Wh"], p["enc_l1_b"], batch.src_mask
    )
    hs1_in = hs1 * st.m_enc12 if dropout else hs1
    hs2, h2, c2, st.enc2 = _encoder_layer_forward(
        hs1_in, p["enc_l2_Wx"], p["enc_l2_Wh"], p["enc_l2_b"], batch.src_mask
    )
    st.hs_enc = hs2

    st.emb_tgt = p["tgt_emb"][batch.tgt_in]
    wx_e = p["dec_l1_Wx"][:e_dim]
    wx_f = p["dec_l1_Wx"][e_dim:]
    pre1 = (st.emb_tgt.reshape(b_sz * t_len, e_dim) @ wx_e).reshape(b_sz, t_len, 4 * h_dim)
    pre1 += p["dec_l1_b"]

    src_real = batch.src_mask > 0
    hfeed = np.zeros((b_sz, h_dim), dtype=dt)
    st.dec_caches = []
    st.htd = np.empty((b_sz, t_len, h_dim), dtype=dt)
    st.h2_all = np.empty((b_sz, t_len, h_dim), dtype=dt)
    st.q_all = np.empty((b_sz, t_len, h_dim), dtype=dt)
    st.a_all = np.empty((b_sz, t_len, s_len), dtype=dt)
    st.ca_all = np.empty((b_sz, t_len, 2 * h_dim), dtype=dt)
    st.ht_all = np.empty((b_sz, t_len, h_dim), dtype=dt)
    st.h1d_all = np.empty((b_sz, t_len, h_dim), dtype=dt)
    for t in range(t_len):
        z1 = pre1[:, t] + hfeed @ wx_f + h1 @ p["dec_l1_Wh"]
        h1_new, c1_new, cc1 = _cell_forward(z1, c1)
        h1d = h1_new * st.m_dec12[:, t] if dropout else h1_new
        z2 = h1d @ p["dec_l2_Wx"] + h2 @ p["dec_l2_Wh"] + p["dec_l2_b"]
        h2_new, c2_new, cc2 = _cell_forward(z2, c2)

        q = h2_new @ p["attn_Wa"]
        scores = (st.hs_enc @ q[:, :, None])[:, :, 0]
        scores = np.where(src_real, scores, -np.inf)
        scores -= scores.max(axis=1, keepdims=True)
        exp = np.exp(scores)
        a = exp / exp.sum(axis=1, keepdims=True)
        ctx = (a[:, None, :] @ st.hs_enc)[:, 0, :]
        ca = np.concatenate([ctx, h2_new], axis=1)
        ht = np.tanh(ca @ p["attn_Wc"])
        htd = ht * st.m_ht[:, t] if dropout else ht

        st.dec_caches.append((h1, cc1, h2, cc2, hfeed))
        st.h1d_all[:, t] = h1d
        st.h2_all[:, t] = h2_new
        st.q_all[:, t] = q
        st.a_all[:, t] = a
        st.ca_all[:, t] = ca
        st.ht_all[:, t] = ht
        st.htd[:, t] = htd
        h1, c1, h2, c2, hfeed = h1_new, c1_new, h2_new, c2_new, htd

    logits = st.htd.reshape(b_sz * t_len, h_dim) @ p["out_W"] + p["out_b"]
    st.logp = _log_softmax(logits).reshape(b_sz, t_len, -1)
    nll = -np.take_along_axis(st.logp, batch.tgt_out[:, :, None].astype(np.int64), axis=2)[:, :, 0]
    nll *= batch.tgt_mask
    n_tokens = batch.tgt_mask.sum()
    loss = float(nll.sum() / n_tokens)
    per_example = nll.sum(axis=1) / batch.tgt_mask.sum(axis=1)
    return loss, per_example.astype(np.float64), st


def _backward(params: ModelParams, st: _ForwardState) -> dict[str, np.ndarray]:
    p = params.tensors
    batch = st.batch
    e_dim = params.config.d_emb
    h_dim = params.config.d_h
    b_sz, s_len = batch.src.shape
    t_len = batch.tgt_in.shape[1]
    n_tokens = batch.tgt_mask.sum()
    grads = params.zero_grads()

    probs = np.exp(st.logp)
    d_logits = probs
    rows = np.arange(b_sz)[:, None]
    cols = np.arange(t_len)[None, :]
    d_logits[rows, cols, batch.tgt_out] -= 1.0
    d_logits *= (batch.tgt_mask / n_tokens)[:, :, None]

    d_logits_flat = d_logits.reshape(b_sz * t_len, -1)
    htd_flat = st.htd.reshape(b_sz * t_len, h_dim)
    grads["out_W"] = htd_flat.T @ d_logits_flat
    grads["out_b"] = d_logits_flat.sum(axis=0)
    d_htd_all = (d_logits_flat @ p["out_W"].T).reshape(b_sz, t_len, h_dim)

    wx_f = p["dec_l1_Wx"][e_dim:]
    d_hs_enc = np.zeros_like(st.hs_enc)
    dz1_all = np.empty((b_sz, t_len, 4 * h_dim), dtype=params.dtype)
    dq_all = np.empty((b_sz, t_len, h_dim), dtype=params.dtype)
    d_pre_c = np.empty((b_sz, t_len, h_dim), dtype=params.dtype)
    d_wh1 = np.zeros_like(p["dec_l1_Wh"])
    d_wh2 = np.zeros_like(p["dec_l2_Wh"])
    dz2_all = np.empty((b_sz, t_len, 4 * h_dim), dtype=params.dtype)
    d_feed = np.zeros((b_sz, h_dim), dtype=params.dtype)
    dh1 = np.zeros((b_sz, h_dim), dtype=params.dtype)
    dc1 = np.zeros_like(dh1)
    dh2 = np.zeros_like(dh1)
    dc2 = np.zeros_like(dh1)
    for t in reversed(range(t_len)):
        h1_prev, cc1, h2_prev, cc2, _ = st.dec_caches[t]
        d_htd = d_htd_all[:, t] + d_feed
        d_ht = d_htd * st.m_ht[:, t] if st.m_ht is not None else d_htd
        ht = st.ht_all[:, t]
        d_ca_pre = d_ht * (1.0 - ht * ht)
        d_pre_c[:, t] = d_ca_pre
        d_ca = d_ca_pre @ p["attn_Wc"].T
        d_ctx = d_ca[:, :h_dim]
        dh2_att = d_ca[:, h_dim:]

        a = st.a_all[:, t]
        da = (st.hs_enc @ d_ctx[:, :, None])[:, :, 0]
        d_hs_enc += a[:, :, None] * d_ctx[:, None, :]
        ds = a * (da - (da * a).sum(axis=1, keepdims=True))
        dq = (ds[:, None, :] @ st.hs_enc)[:, 0, :]
        d_hs_enc += ds[:, :, None] * st.q_all[:, t][:, None, :]
        dq_all[:, t] = dq

        dh2_total = dh2_att + dq @ p["attn_Wa"].T + dh2
        dz2, dc2 = _cell_backward(dh2_total, dc2, cc2)
        dz2_all[:, t] = dz2
        d_wh2 += h2_prev.T @ dz2
        dh2 = dz2 @ p["dec_l2_Wh"].T
        d_h1d = dz2 @ p["dec_l2_Wx"].T

        d_h1 = d_h1d * st.m_dec12[:, t] if st.m_dec12 is not None else d_h1d
        dz1, dc1 = _cell_backward(d_h1 + dh1, dc1, cc1)
        dz1_all[:, t] = dz1
        d_wh1 += h1_prev.T @ dz1
        dh1 = dz1 @ p["dec_l1_Wh"].T
        d_feed = dz1 @ wx_f.T

    grads["attn_Wa"] = st.h2_all.reshape(-1, h_dim).T @ dq_all.reshape(-1, h_dim)
    grads["attn_Wc"] = st.ca_all.reshape(-1, 2 * h_dim).T @ d_pre_c.reshape(-1, h_dim)
    dz2_flat = dz2_all.reshape(-1, 4 * h_dim)
    grads["dec_l2_Wx"] = st.h1d_all.reshape(-1, h_dim).T @ dz2_flat
    grads["dec_l2_Wh"] = d_wh2
    grads["dec_l2_b"] = dz2_flat.sum(axis=0)

    feed_stack = np.concatenate(
        [np.zeros((b_sz, 1, h_dim), dtype=params.dtype), st.htd[:, :-1]], axis=1
    )
    dz1_flat = dz1_all.reshape(-1, 4 * h_dim)
    d_wx_e = st.emb_tgt.reshape(-1, e_dim).T @ dz1_flat
    d_wx_f = feed_stack.reshape(-1, h_dim).T @ dz1_flat
    grads["dec_l1_Wx"] = np.concatenate([d_wx_e, d_wx_f], axis=0)
    grads["dec_l1_Wh"] = d_wh1
    grads["dec_l1_b"] = dz1_flat.sum(axis=0)
    d_emb_tgt = (dz1_flat @ p["dec_l1_Wx"][:e_dim].T).reshape(b_sz, t_len, e_dim)
    np.add.at(grads["tgt_emb"], batch.tgt_in, d_emb_tgt)

    d_hs1_in, grads["enc_l2_Wx"], grads["enc_l2_Wh"], grads["enc_l2_b"] = _encoder_layer_backward(
        d_hs_enc, dh2, dc2, p["enc_l2_Wx"], p["enc_l2_Wh"], batch.src_mask, st.enc2
    )
    d_hs1 = d_hs1_in * st.m_enc12 if st.m_enc12 is not None else d_hs1_in
    d_emb_src, grads["enc_l1_Wx"], grads["enc_l1_Wh"], grads["enc_l1_b"] = _encoder_layer_backward(
        d_hs1, dh1, dc1, p["enc_l1_Wx"], p["enc_l1_Wh"], batch.src_mask, st.enc1
    )
    np.add.at(grads["src_emb"], batch.src, d_emb_src)
    return grads


class Seq2SeqModel:
    """Parameters plus the vocabulary and metadata needed to use them."""

    def __init__(self, params: ModelParams, vocab: Vocabulary, meta: ModelMeta | None = None):
        if params.vocab_size != len(vocab):
            raise ModelError(
                f"parameter table built for {params.vocab_size} symbols, vocabulary has {len(vocab)}"
            )
        self.params = params
        self.vocab = vocab
        self.meta = meta if meta is not None else ModelMeta()
        if self.meta.mode == "flagged" and not vocab.flags:
            raise ModelError("flagged mode requires a vocabulary with dialect flags")
        if self.meta.dialect is not None and self.meta.dialect not in vocab.flags:
            raise ModelError(f"meta names dialect {self.meta.dialect!r} absent from the vocabulary")
        banned = [PAD_ID, BOS_ID] + [vocab.flag_id(f) for f in vocab.flags]
        self._banned_output_ids = np.array(sorted(banned), dtype=np.int64)

    @classmethod
    def create(
        cls,
        config: ModelConfig,
        vocab: Vocabulary,
        seed: int = 0,
        meta: ModelMeta | None = None,
    ) -> "Seq2SeqModel":
        return cls(ModelParams.init(config, len(vocab), seed=seed), vocab, meta)

    @property
    def config(self) -> ModelConfig:
        return self.params.config

    def _check_ids(self, batch: Batch) -> None:
        v = self.params.vocab_size
        for side, arr in (("source", batch.src), ("target", batch.tgt_in), ("target", batch.tgt_out)):
            low = int(arr.min())
            high = int(arr.max())
            if low < 0 or high >= v:
                bad = low if low < 0 else high
                raise ModelError(f"{side} id {bad} outside the vocabulary range [0, {v})")

    def loss(self, batch: Batch):
        self._check_ids(batch)
        pooled, per_example, _ = _forward(self.params, batch)
        return pooled, per_example

    def loss_and_grads(self, batch: Batch, dropout: float = 0.0, rng=None):
        self._check_ids(batch)
        pooled, per_example, st = _forward(self.params, batch, dropout=dropout, rng=rng)
        grads = _backward(self.params, st)
        return pooled, per_example, grads

    def _encode_source(self, src_ids: list[int]):
        batch = make_batch([(src_ids, [PAD_ID])], dtype=self.params.dtype)
        self._check_ids(batch)
        p = self.params.tensors
        hs1, h1, c1, _ = _encoder_layer_forward(
            p["src_emb"][batch.src], p["enc_l1_Wx"], p["enc_l1_Wh"], p["enc_l1_b"], batch.src_mask
        )
        hs2, h2, c2, _ = _encoder_layer_forward(
            hs1, p["enc_l2_Wx"], p["enc_l2_Wh"], p["enc_l2_b"], batch.src_mask
        )
        return hs2[0], (h1, c1, h2, c2, np.zeros_like(h1))

    def _decode_step(self, hs_enc: np.ndarray, state, y_id: int):
        p = self.params.tensors
        e_dim = self.config.d_emb
        h1, c1, h2, c2, hfeed = state
        emb = p["tgt_emb"][y_id][None, :]
        z1 = emb @ p["dec_l1_Wx"][:e_dim] + hfeed @ p["dec_l1_Wx"][e_dim:] + h1 @ p["dec_l1_Wh"]
        z1 += p["dec_l1_b"]
        h1n, c1n, _ = _cell_forward(z1, c1)
        z2 = h1n @ p["dec_l2_Wx"] + h2 @ p["dec_l2_Wh"] + p["dec_l2_b"]
        h2n, c2n, _ = _cell_forward(z2, c2)
        q = (h2n @ p["attn_Wa"])[0]
        scores = hs_enc @ q
        scores -= scores.max()
        exp = np.exp(scores)
        a = exp / exp.sum()
        ctx = a @ hs_enc
        ca = np.concatenate([ctx, h2n[0]])
        ht = np.tanh(ca @ p["attn_Wc"])
        logits = ht @ p["out_W"] + p["out_b"]
        logprobs = _log_softmax(logits[None, :])[0].astype(np.float64)
        logprobs[self._banned_output_ids] = -np.inf
        return logprobs, (h1n, c1n, h2n, c2n, ht[None, :])

    def _max_len(self, src_ids: list[int]) -> int:
        return 3 * len(src_ids) + 10

    def _greedy(self, hs_enc, init_state, max_len: int):
        state = init_state
        y = BOS_ID
        ids: list[int] = []
        score = 0.0
        for _ in range(max_len):
            logprobs, state = self._decode_step(hs_enc, state, y)
            y = int(np.argmax(logprobs))
            score += float(logprobs[y])
            if y == EOS_ID:
                return ids, score
            ids.append(y)
        return ids, score

    def greedy_decode(self, src_ids: list[int]):
        """Best-symbol-at-each-step decode; returns (ids, log-probability)."""
        if not src_ids:
            raise ModelError("cannot decode an empty source")
        hs_enc, state = self._encode_source(src_ids)
        return self._greedy(hs_enc, state, self._max_len(src_ids))

    def beam_decode(self, src_ids: list[int], beam_size: int = 4):
        """Beam search over symbol sequences, scored by summed log-probability.

        The greedy hypothesis always competes in the final selection, so the
        returned score is never below the greedy score.  With beam_size 1 the
        result is identical to `greedy_decode`.
        """
        if beam_size < 1:
            raise ModelError(f"beam_size must be positive, got {beam_size}")
        if not src_ids:
            raise ModelError("cannot decode an empty source")
        hs_enc, init_state = self._encode_source(src_ids)
        max_len = self._max_len(src_ids)
        greedy_ids, greedy_score = self._greedy(hs_enc, init_state, max_len)

        beams = [(0.0, [], init_state)]
        done: list[tuple[float, list[int]]] = [(greedy_score, greedy_ids)]
        for step in range(max_len):
            candidates = []
            for bi, (score, ids, state) in enumerate(beams):
                y_prev = ids[-1] if ids else BOS_ID
                logprobs, new_state = self._decode_step(hs_enc, state, y_prev)
                top = np.argsort(-logprobs, kind="stable")[:beam_size]
                for sym in top:
                    candidates.append((score + float(logprobs[sym]), bi, int(sym), new_state))
            candidates.sort(key=lambda c: (-c[0], c[1], c[2]))
            next_beams = []
            for score, bi, sym, new_state in candidates:
                if len(next_beams) >= beam_size:
                    break
                if sym == EOS_ID:
                    done.append((score, beams[bi][1]))
                else:
                    next_beams.append((score, beams[bi][1] + [sym], new_state))
            beams = next_beams
            if not beams or len(done) > 2 * beam_size:
                break
        for score, ids, _ in beams:
            done.append((score, ids))
        best_score, best_ids = max(done, key=lambda d: d[0])
        return best_ids, best_score

    def predict_tokens(self, tokens: list[str], beam_size: int = 1) -> list[str]:
        """Transduce source symbols to output symbols (no EOS, no padding)."""
        src_ids = self.vocab.ids(tokens)
        if beam_size == 1:
            out_ids, _ = self.greedy_decode(src_ids)
        else:
            out_ids, _ = self.beam_decode(src_ids, beam_size=beam_size)
        return self.vocab.tokens(out_ids)


def gradient_check(
    model: Seq2SeqModel,
    batch: Batch,
    coords_per_tensor: int = 8,
    seed: int = 0,
    step: float = 1e-6,
) -> float:
    """Compare hand-derived gradients with central finite differences.

    Samples coordinates from every tensor and returns the worst relative
    error |analytic - numeric| / max(1, |analytic|, |numeric|).  Requires a
    float64 model; 32-bit arithmetic drowns the difference quotient.
    """
    if model.params.dtype != np.float64:
        raise ModelError("gradient_check needs a float64 model; build one with profile 'tiny'")
    rng = np.random.default_rng(seed)
    _, _, grads = model.loss_and_grads(batch)
    worst = 0.0
    for name in TENSOR_ORDER:
        tensor = model.params[name]
        flat = tensor.reshape(-1)
        n = min(coords_per_tensor, flat.size)
        for idx in rng.choice(flat.size, size=n, replace=False):
            original = flat[idx]
            flat[idx] = original + step
            up, _, _ = _forward(model.params, batch)
            flat[idx] = original - step
            down, _, _ = _forward(model.params, batch)
            flat[idx] = original
            numeric = (up - down) / (2.0 * step)
            analytic = float(grads[name].reshape(-1)[idx])
            err = abs(analytic - numeric) / max(1.0, abs(analytic), abs(numeric))
            worst = max(worst, err)
    return worst


def save_checkpoint(model: Seq2SeqModel, path) -> None:
    """Write the versioned binary checkpoint; see the module docstring."""
    config = model.config
    header = {
        "d_emb": config.d_emb,
        "d_h": config.d_h,
        "dtype": config.dtype,
        "meta": model.meta.to_dict(),
        "vocab": model.vocab.to_dict(),
        "tensors": [
            {"name": name, "shape": list(model.params[name].shape), "dtype": config.dtype}
            for name in TENSOR_ORDER
        ],
    }
    header_bytes = json.dumps(header, ensure_ascii=False, sort_keys=True, separators=(",", ":")).encode("utf-8")
    le_dtype = "<f4" if config.dtype == "float32" else "<f8"
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        for name in TENSOR_ORDER:
            fh.write(np.ascontiguousarray(model.params[name], dtype=le_dtype).tobytes())


def _read_header(fh, path) -> dict:
    """Parse magic, version and JSON header; leaves fh at the first tensor."""
    magic = fh.read(len(MAGIC))
    if magic != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic {magic!r})")
    version_raw = fh.read(4)
    header_len_raw = fh.read(8)
    if len(version_raw) < 4 or len(header_len_raw) < 8:
        raise CheckpointError(f"{path}: truncated checkpoint")
    (version,) = struct.unpack("<I", version_raw)
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    (header_len,) = struct.unpack("<Q", header_len_raw)
    header_bytes = fh.read(header_len)
    if len(header_bytes) < header_len:
        raise CheckpointError(f"{path}: truncated checkpoint header")
    try:
        return json.loads(header_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise CheckpointError(f"{path}: corrupt checkpoint header: {err}") from None


def _header_parts(header: dict, path):
    try:
        config = ModelConfig(d_emb=int(header["d_emb"]), d_h=int(header["d_h"]), dtype=header["dtype"])
        vocab = Vocabulary.from_dict(header["vocab"])
        meta = ModelMeta.from_dict(header["meta"])
        manifest = header["tensors"]
    except (KeyError, TypeError, ModelError) as err:
        raise CheckpointError(f"{path}: bad checkpoint header: {err}") from None
    if [entry["name"] for entry in manifest] != list(TENSOR_ORDER):
        raise CheckpointError(f"{path}: checkpoint tensor manifest is out of order")
    return config, vocab, meta, manifest


def read_checkpoint_header(path) -> dict:
    with open(path, "rb") as fh:
        return _read_header(fh, path)


def load_checkpoint(path) -> Seq2SeqModel:
    with open(path, "rb") as fh:
        header = _read_header(fh, path)
        config, vocab, meta, manifest = _header_parts(header, path)
        expected = tensor_shapes(config, len(vocab))
        le_dtype = np.dtype("<f4" if config.dtype == "float32" else "<f8")
        tensors: dict[str, np.ndarray] = {}
        for entry in manifest:
            name = entry["name"]
            shape = tuple(entry["shape"])
            if shape != expected[name] or entry["dtype"] != config.dtype:
                raise CheckpointError(
                    f"{path}: tensor {name!r} declared as {entry['dtype']}{list(shape)}, "
                    f"expected {config.dtype}{list(expected[name])}"
                )
            n_bytes = int(np.prod(shape, dtype=np.int64)) * le_dtype.itemsize
            blob = fh.read(n_bytes)
            if len(blob) < n_bytes:
                raise CheckpointError(f"{path}: checkpoint ends inside tensor {name!r}")
            tensors[name] = np.frombuffer(blob, dtype=le_dtype).reshape(shape).astype(config.np_dtype)
        if fh.read(1):
            raise CheckpointError(f"{path}: trailing bytes after the last tensor")
    params = ModelParams(config, len(vocab), tensors)
    return Seq2SeqModel(params, vocab, meta)


def checkpoint_tensor_bytes(path, name: str) -> bytes:
    """Raw serialized bytes of one tensor, straight from the file."""
    if name not in TENSOR_ORDER:
        raise CheckpointError(f"unknown tensor name {name!r}")
    with open(path, "rb") as fh:
        header = _read_header(fh, path)
        config, vocab, _, _ = _header_parts(header, path)
        expected = tensor_shapes(config, len(vocab))
        itemsize = np.dtype("<f4" if config.dtype == "float32" else "<f8").itemsize
        for tensor_name in TENSOR_ORDER:
            n_bytes = int(np.prod(expected[tensor_name], dtype=np.int64)) * itemsize
            if tensor_name == name:
                blob = fh.read(n_bytes)
                if len(blob) < n_bytes:
                    raise CheckpointError(f"{path}: checkpoint ends inside tensor {name!r}")
                return blob
            fh.seek(n_bytes, 1)
    raise CheckpointError(f"{path}: tensor {name!r} not found")
