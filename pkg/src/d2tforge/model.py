"""Attention-based RNN decoder over the structured data table.

A single-layer, layer-normalized LSTM generates one subword symbol per
time step. At every step the previous hidden state is projected to a
query, compared against the table row keys with scaled dot product
attention, and the attended value is concatenated with the previous
output symbol's embedding to form the cell input. A few delay steps are
fed before the first real symbol so the cell can read the table first.

Forward and backward passes are written out explicitly in numpy; the
backward pass computes exact gradients for every parameter group
(verified against central finite differences in the test suite).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .data_table import EncoderParams, project, project_backward
from .tokenizer import BOS, DELAY, EOS, PAD

LN_EPS = 1e-6


class ModelError(ValueError):
    pass


@dataclass
class LstmState:
    h: np.ndarray  # [B, H]
    c: np.ndarray  # [B, H]

    @classmethod
    def zeros(cls, batch: int, hidden: int, dtype=np.float64) -> "LstmState":
        return cls(h=np.zeros((batch, hidden), dtype=dtype), c=np.zeros((batch, hidden), dtype=dtype))


@dataclass
class ModelParams:
    """All trainable tensors of the decoder, encoder included."""

    encoder: EncoderParams
    emb_symbol: np.ndarray  # [V, E_sym] previous-output embedding
    w_query: np.ndarray  # [H, W_k]
    b_query: np.ndarray  # [W_k]
    w_x: np.ndarray  # [D, 4H], D = E_sym + W_v
    w_h: np.ndarray  # [H, 4H]
    b_gates: np.ndarray  # [4H]
    ln_x_gain: np.ndarray  # [4H]
    ln_h_gain: np.ndarray  # [4H]
    ln_c_gain: np.ndarray  # [H]
    ln_c_bias: np.ndarray  # [H]
    w_out: np.ndarray  # [H, V]
    b_out: np.ndarray  # [V]
    delay_steps: int = 3

    @property
    def hidden(self) -> int:
        return self.w_h.shape[0]

    @property
    def vocab_size(self) -> int:
        return self.w_out.shape[1]

    @property
    def dtype(self):
        return self.w_h.dtype

    @classmethod
    def init(
        cls,
        rng: np.random.Generator,
        encoder: EncoderParams,
        vocab_size: int,
        symbol_width: int = 64,
        hidden: int = 1024,
        delay_steps: int = 3,
        dtype=np.float64,
    ) -> "ModelParams":
        key_width = encoder.w_key.shape[1]
        value_width = encoder.w_value.shape[1]
        d_in = symbol_width + value_width

        def dense(n_in, n_out):
            return (rng.standard_normal((n_in, n_out)) / np.sqrt(n_in)).astype(dtype)

        b_gates = np.zeros(4 * hidden, dtype=dtype)
        b_gates[hidden : 2 * hidden] = 1.0  # forget gate bias starts open
        return cls(
            encoder=encoder,
            emb_symbol=(rng.standard_normal((vocab_size, symbol_width)) * 0.1).astype(dtype),
            w_query=dense(hidden, key_width),
            b_query=np.zeros(key_width, dtype=dtype),
            w_x=dense(d_in, 4 * hidden),
            w_h=dense(hidden, 4 * hidden),
            b_gates=b_gates,
            ln_x_gain=np.ones(4 * hidden, dtype=dtype),
            ln_h_gain=np.ones(4 * hidden, dtype=dtype),
            ln_c_gain=np.ones(hidden, dtype=dtype),
            ln_c_bias=np.zeros(hidden, dtype=dtype),
            w_out=dense(hidden, vocab_size),
            b_out=np.zeros(vocab_size, dtype=dtype),
            delay_steps=delay_steps,
        )

    def param_items(self):
        """(name, array) pairs in a fixed order, encoder tables included."""
        for f in fields(EncoderParams):
            yield f"encoder.{f.name}", getattr(self.encoder, f.name)
        for f in fields(ModelParams):
            if f.name in ("encoder", "delay_steps"):
                continue
            yield f.name, getattr(self, f.name)

    def grads_like(self) -> "ModelParams":
        enc = EncoderParams(**{f.name: np.zeros_like(getattr(self.encoder, f.name)) for f in fields(EncoderParams)})
        kw = {
            f.name: np.zeros_like(getattr(self, f.name))
            for f in fields(ModelParams)
            if f.name not in ("encoder", "delay_steps")
        }
        return ModelParams(encoder=enc, delay_steps=self.delay_steps, **kw)

    def copy(self) -> "ModelParams":
        enc = EncoderParams(**{f.name: getattr(self.encoder, f.name).copy() for f in fields(EncoderParams)})
        kw = {
            f.name: getattr(self, f.name).copy()
            for f in fields(ModelParams)
            if f.name not in ("encoder", "delay_steps")
        }
        return ModelParams(encoder=enc, delay_steps=self.delay_steps, **kw)


# -- primitive ops -------------------------------------------------------------


def layer_norm(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Normalize each row to zero mean, unit variance. Returns (v_hat, inv_std)."""
    mean = v.mean(axis=-1, keepdims=True)
    var = v.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + LN_EPS)
    return (v - mean) * inv_std, inv_std


def layer_norm_backward(g: np.ndarray, v_hat: np.ndarray, inv_std: np.ndarray) -> np.ndarray:
    """Gradient through layer_norm given upstream gradient on v_hat."""
    g_mean = g.mean(axis=-1, keepdims=True)
    gv_mean = (g * v_hat).mean(axis=-1, keepdims=True)
    return (g - g_mean - v_hat * gv_mean) * inv_std


def _sigmoid(v: np.ndarray) -> np.ndarray:
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def attend(
    query: np.ndarray, keys: np.ndarray, values: np.ndarray, mask: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Scaled dot product attention over table rows.

    query [B, W_k], keys [B, S, W_k], values [B, S, W_v], mask [B, S].
    Returns (attended [B, W_v], weights [B, S]); masked rows get exactly
    zero weight.
    """
    if not mask.any(axis=1).all():
        raise ModelError("attention over fully masked rows")
    scale = 1.0 / math.sqrt(keys.shape[-1])
    scores = np.einsum("bk,bsk->bs", query, keys) * scale
    scores = np.where(mask, scores, -np.inf)
    scores -= scores.max(axis=1, keepdims=True)
    weights = np.exp(scores)
    weights = np.where(mask, weights, 0.0)
    weights /= weights.sum(axis=1, keepdims=True)
    attended = np.einsum("bs,bsv->bv", weights, values)
    return attended, weights


# -- single step (inference view) ----------------------------------------------


def step(
    state: LstmState,
    prev_symbols: np.ndarray,
    keys: np.ndarray,
    values: np.ndarray,
    mask: np.ndarray,
    params: ModelParams,
) -> tuple[LstmState, np.ndarray]:
    """One decoder step without dropout. Returns (new_state, logits [B, V])."""
    new_state, logits, _ = _step_full(state, prev_symbols, keys, values, mask, params, None, None)
    return new_state, logits


def _step_full(state, prev_symbols, keys, values, mask, params, drop_in, drop_out):
    h_prev, c_prev = state.h, state.c
    hidden = params.hidden
    x_sym = params.emb_symbol[prev_symbols]
    query = h_prev @ params.w_query + params.b_query
    ctx, alpha = attend(query, keys, values, mask)
    x = np.concatenate([x_sym, ctx], axis=1)
    if drop_in is not None:
        x = x * drop_in
    zx = x @ params.w_x
    zh = h_prev @ params.w_h
    nx_hat, inv_sx = layer_norm(zx)
    nh_hat, inv_sh = layer_norm(zh)
    z = nx_hat * params.ln_x_gain + nh_hat * params.ln_h_gain + params.b_gates
    gi = _sigmoid(z[:, :hidden])
    gf = _sigmoid(z[:, hidden : 2 * hidden])
    gg = np.tanh(z[:, 2 * hidden : 3 * hidden])
    go = _sigmoid(z[:, 3 * hidden :])
    c = gf * c_prev + gi * gg
    c_hat, inv_sc = layer_norm(c)
    hc = np.tanh(c_hat * params.ln_c_gain + params.ln_c_bias)
    h = go * hc
    h_out = h * drop_out if drop_out is not None else h
    logits = h_out @ params.w_out + params.b_out
    cache = (
        prev_symbols, h_prev, c_prev, query, alpha, x, nx_hat, inv_sx, nh_hat, inv_sh,
        gi, gf, gg, go, c_hat, inv_sc, hc, go * hc, h_out, drop_in, drop_out,
    )
    return LstmState(h=h, c=c), logits, cache


# -- teacher-forced forward/backward -------------------------------------------


def make_teacher_batch(
    target_seqs: list[list[int]], delay_steps: int, dtype=np.float64
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Build decoder inputs, targets, and loss mask for teacher forcing.

    Inputs are delay symbols, then the start symbol, then the target
    shifted right. Loss positions cover exactly the target symbols
    (end symbol included); the delay prefix and padding are masked out.
    """
    batch = len(target_seqs)
    steps = delay_steps + max(len(t) for t in target_seqs)
    inputs = np.full((batch, steps), PAD, dtype=np.int64)
    targets = np.full((batch, steps), PAD, dtype=np.int64)
    loss_mask = np.zeros((batch, steps), dtype=dtype)
    for b, seq in enumerate(target_seqs):
        if not seq or seq[-1] != EOS:
            raise ModelError("target sequences must end with the end symbol")
        inputs[b, :delay_steps] = DELAY
        inputs[b, delay_steps] = BOS
        inputs[b, delay_steps + 1 : delay_steps + len(seq)] = seq[:-1]
        targets[b, delay_steps : delay_steps + len(seq)] = seq
        loss_mask[b, delay_steps : delay_steps + len(seq)] = 1.0
    return inputs, targets, loss_mask


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def loss_and_gradients(
    idx: np.ndarray,
    table_mask: np.ndarray,
    target_seqs: list[list[int]],
    weights: np.ndarray,
    params: ModelParams,
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
) -> tuple[float, ModelParams]:
    """Weighted mean per-token cross entropy and exact parameter gradients.

    ``idx``/``table_mask`` are the batched data tables, ``weights`` the
    per-example loss multipliers. Dropout (when enabled) applies to the
    LSTM input and output activations with inverted scaling; gradients
    are exact for the sampled dropout realization.
    """
    dtype = params.dtype
    weights = np.asarray(weights, dtype=dtype)
    if (weights < 0).any():
        raise ModelError("per-example weights must be non-negative")
    if dropout and rng is None:
        raise ModelError("dropout requires an rng")

    keys, values, _, concat = project(idx, table_mask, params.encoder)
    inputs, targets, loss_mask = make_teacher_batch(target_seqs, params.delay_steps, dtype=dtype)
    batch, steps = inputs.shape
    hidden = params.hidden
    d_in = params.w_x.shape[0]

    weighted_mask = loss_mask * weights[:, None]
    denom = weighted_mask.sum()
    grads = params.grads_like()
    if denom == 0.0:
        return 0.0, grads

    keep = 1.0 - dropout
    state = LstmState.zeros(batch, hidden, dtype=dtype)
    caches = []
    probs_by_step = []
    loss = 0.0
    for t in range(steps):
        if dropout:
            drop_in = (rng.random((batch, d_in)) < keep).astype(dtype) / keep
            drop_out = (rng.random((batch, hidden)) < keep).astype(dtype) / keep
        else:
            drop_in = drop_out = None
        state, logits, cache = _step_full(
            state, inputs[:, t], keys, values, table_mask, params, drop_in, drop_out
        )
        probs = _softmax(logits)
        token_nll = -np.log(
            np.maximum(probs[np.arange(batch), targets[:, t]], np.finfo(dtype).tiny)
        )
        loss += float((token_nll * weighted_mask[:, t]).sum())
        caches.append(cache)
        probs_by_step.append(probs)
    loss /= float(denom)
    if not math.isfinite(loss):
        raise ModelError(f"non-finite loss over {steps} steps (got {loss})")

    # backward
    d_keys = np.zeros_like(keys)
    d_values = np.zeros_like(values)
    dh_next = np.zeros((batch, hidden), dtype=dtype)
    dc_next = np.zeros((batch, hidden), dtype=dtype)
    scale_attn = 1.0 / math.sqrt(keys.shape[-1])
    for t in reversed(range(steps)):
        (
            prev_symbols, h_prev, c_prev, query, alpha, x, nx_hat, inv_sx, nh_hat, inv_sh,
            gi, gf, gg, go, c_hat, inv_sc, hc, h, h_out, drop_in, drop_out,
        ) = caches[t]
        dlogits = probs_by_step[t].copy()
        dlogits[np.arange(batch), targets[:, t]] -= 1.0
        dlogits *= (weighted_mask[:, t] / denom)[:, None]

        grads.w_out += h_out.T @ dlogits
        grads.b_out += dlogits.sum(axis=0)
        dh_out = dlogits @ params.w_out.T
        if drop_out is not None:
            dh_out = dh_out * drop_out
        dh = dh_out + dh_next

        dgo = dh * hc
        dhc = dh * go
        dcn = dhc * (1.0 - hc * hc)
        grads.ln_c_gain += (dcn * c_hat).sum(axis=0)
        grads.ln_c_bias += dcn.sum(axis=0)
        dc = layer_norm_backward(dcn * params.ln_c_gain, c_hat, inv_sc) + dc_next
        dgi = dc * gg
        dgg = dc * gi
        dgf = dc * c_prev
        dc_next = dc * gf

        dz = np.concatenate(
            [
                dgi * gi * (1.0 - gi),
                dgf * gf * (1.0 - gf),
                dgg * (1.0 - gg * gg),
                dgo * go * (1.0 - go),
            ],
            axis=1,
        )
        grads.b_gates += dz.sum(axis=0)
        grads.ln_x_gain += (dz * nx_hat).sum(axis=0)
        grads.ln_h_gain += (dz * nh_hat).sum(axis=0)
        dzx = layer_norm_backward(dz * params.ln_x_gain, nx_hat, inv_sx)
        dzh = layer_norm_backward(dz * params.ln_h_gain, nh_hat, inv_sh)

        grads.w_x += x.T @ dzx
        dx = dzx @ params.w_x.T
        if drop_in is not None:
            dx = dx * drop_in
        grads.w_h += h_prev.T @ dzh
        dh_prev = dzh @ params.w_h.T

        e_sym = params.emb_symbol.shape[1]
        np.add.at(grads.emb_symbol, prev_symbols, dx[:, :e_sym])
        dctx = dx[:, e_sym:]

        dalpha = np.einsum("bv,bsv->bs", dctx, values)
        d_values += alpha[:, :, None] * dctx[:, None, :]
        dscores = alpha * (dalpha - (dalpha * alpha).sum(axis=1, keepdims=True))
        dquery = np.einsum("bs,bsk->bk", dscores, keys) * scale_attn
        d_keys += dscores[:, :, None] * query[:, None, :] * scale_attn

        grads.w_query += h_prev.T @ dquery
        grads.b_query += dquery.sum(axis=0)
        dh_next = dh_prev + dquery @ params.w_query.T

    project_backward(idx, concat, params.encoder, d_keys, d_values, grads.encoder)
    return loss, grads


# -- greedy decoding -----------------------------------------------------------


@dataclass
class DecodeResult:
    text: str
    ids: list[int]
    truncated: bool


def greedy_decode_ids(
    idx: np.ndarray, table_mask: np.ndarray, params: ModelParams, max_len: int
) -> tuple[list[list[int]], list[bool]]:
    """Batched greedy decode. Returns per-example symbol ids (no control
    symbols) and truncation flags."""
    keys, values, _, _ = project(idx, table_mask, params.encoder)
    batch = idx.shape[0]
    state = LstmState.zeros(batch, params.hidden, dtype=params.dtype)
    prev = np.full(batch, DELAY, dtype=np.int64)
    for _ in range(params.delay_steps):
        state, _ = step(state, prev, keys, values, table_mask, params)
    prev = np.full(batch, BOS, dtype=np.int64)
    done = np.zeros(batch, dtype=bool)
    outputs: list[list[int]] = [[] for _ in range(batch)]
    for _ in range(max_len):
        state, logits = step(state, prev, keys, values, table_mask, params)
        nxt = logits.argmax(axis=1)
        for b in range(batch):
            if done[b]:
                continue
            if nxt[b] == EOS:
                done[b] = True
            else:
                outputs[b].append(int(nxt[b]))
        if done.all():
            break
        prev = np.where(done, EOS, nxt)
    return outputs, [not d for d in done]


def decode_greedy(example, params: ModelParams, schema, vocab, max_len: int = 128) -> DecodeResult:
    """Greedy decode one structured example to text."""
    from .data_table import batch_tables, encode_table

    table = encode_table(example, schema, vocab)
    # trim padding to the example's own length; masked rows cannot matter
    idx, mask = batch_tables([table])
    ids, truncated = greedy_decode_ids(idx, mask, params, max_len)
    return DecodeResult(text=vocab.decode(ids[0]), ids=ids[0], truncated=truncated[0])
