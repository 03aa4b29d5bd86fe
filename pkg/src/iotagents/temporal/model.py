"""Attentional grid-LSTM forecaster: parameters, forward pass, checkpoints.

The network carries two recurrent streams through every cell: a time
stream (horizontal) and a depth stream (vertical across stacked layers).
Encoder inputs are rescaled per-feature by softmax attention before they
enter the grid; a cross-attention block then lets decoder queries from
the time stream read the depth stream, and a final affine head emits one
scalar per window.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .. import autodiff as ad
from ..numerics import NormalizationParams
from ..validation import as_float_array

CHECKPOINT_VERSION = "grid-lstm-v1"

_STREAMS = ("time", "depth")
_GATES = ("u", "f", "o", "c")


@dataclass
class GridLstmModel:
    """Plain parameter container; immutable by convention after training."""

    hidden_size: int
    n_features: int
    layers: int = 2
    share_decoder: bool = False
    seed: int = 0
    params: dict = field(default_factory=dict)
    target_norm: NormalizationParams | None = None

    def copy(self) -> "GridLstmModel":
        return GridLstmModel(
            hidden_size=self.hidden_size,
            n_features=self.n_features,
            layers=self.layers,
            share_decoder=self.share_decoder,
            seed=self.seed,
            params={k: v.copy() for k, v in self.params.items()},
            target_norm=self.target_norm,
        )

    def cell_param_names(self, prefix: str, layer: int) -> list[str]:
        if prefix == "dec" and self.share_decoder:
            prefix = "enc"
        return [
            f"{prefix}_l{layer}_{stream}_{gate}_{kind}"
            for stream in _STREAMS
            for gate in _GATES
            for kind in ("w", "b")
        ]


def _uniform_init(rng: np.random.Generator, fan_in: int, shape: tuple) -> np.ndarray:
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape)


def init_model(
    n_features: int,
    hidden_size: int = 32,
    layers: int = 2,
    share_decoder: bool = False,
    seed: int = 0,
) -> GridLstmModel:
    """Seed-pinned init: weights uniform in +-1/sqrt(fan_in), biases zero."""
    if hidden_size < 1 or layers < 1 or n_features < 1:
        raise ValueError("hidden_size, layers and n_features must be positive")
    rng = np.random.default_rng(seed)
    d = hidden_size
    p: dict[str, np.ndarray] = {}

    # Encoder feature-attention scorer over [x_t, previous time hidden].
    p["att_w"] = _uniform_init(rng, n_features + d, (n_features + d, n_features))
    p["att_b"] = np.zeros(n_features)

    # Input is projected into the grid along the depth side.
    for tag, in_dim in (("enc", n_features), ("dec", d)):
        p[f"{tag}_in_h_w"] = _uniform_init(rng, in_dim, (in_dim, d))
        p[f"{tag}_in_h_b"] = np.zeros(d)
        p[f"{tag}_in_m_w"] = _uniform_init(rng, in_dim, (in_dim, d))
        p[f"{tag}_in_m_b"] = np.zeros(d)

    prefixes = ["enc"] if share_decoder else ["enc", "dec"]
    for prefix in prefixes:
        for layer in range(layers):
            for stream in _STREAMS:
                for gate in _GATES:
                    p[f"{prefix}_l{layer}_{stream}_{gate}_w"] = _uniform_init(
                        rng, 2 * d, (2 * d, d)
                    )
                    # Forget gates open at init so memories survive early training.
                    bias = 1.0 if gate == "f" else 0.0
                    p[f"{prefix}_l{layer}_{stream}_{gate}_b"] = np.full(d, bias)

    # Cross-attention query/key projections; values pass through unprojected.
    p["xatt_q_w"] = _uniform_init(rng, d, (d, d))
    p["xatt_k_w"] = _uniform_init(rng, d, (d, d))

    p["head_w"] = _uniform_init(rng, d, (d, 1))
    p["head_b"] = np.zeros(1)

    return GridLstmModel(
        hidden_size=d,
        n_features=n_features,
        layers=layers,
        share_decoder=share_decoder,
        seed=seed,
        params=p,
    )


def _as_tensors(params: dict) -> dict:
    return {k: ad.Tensor(v) for k, v in params.items()}


def _cell_forward(tp, prefix, layer, h_concat, m_time, m_depth, share_decoder):
    """One grid cell: per-stream LSTM gate algebra over the shared concat."""
    if prefix == "dec" and share_decoder:
        prefix = "enc"
    outs = []
    for stream, mem in (("time", m_time), ("depth", m_depth)):
        key = f"{prefix}_l{layer}_{stream}"
        u = ad.sigmoid(ad.affine(h_concat, tp[f"{key}_u_w"], tp[f"{key}_u_b"]))
        f = ad.sigmoid(ad.affine(h_concat, tp[f"{key}_f_w"], tp[f"{key}_f_b"]))
        o = ad.sigmoid(ad.affine(h_concat, tp[f"{key}_o_w"], tp[f"{key}_o_b"]))
        c = ad.tanh(ad.affine(h_concat, tp[f"{key}_c_w"], tp[f"{key}_c_b"]))
        mem_new = ad.add(ad.mul(f, mem), ad.mul(u, c))
        hidden_new = ad.mul(o, ad.tanh(mem_new))
        outs.append((hidden_new, mem_new))
    (h_t, m_t), (h_d, m_d) = outs
    return h_t, m_t, h_d, m_d


def _zeros(batch: int, d: int) -> ad.Tensor:
    return ad.Tensor(np.zeros((batch, d)))


def _run_grid(tp, prefix, inputs, layers, d, share_decoder):
    """Unroll the grid over a list of per-step (B, d)-projected inputs.

    Time memories flow horizontally per layer; the depth stream enters at
    the bottom from the projected input and climbs through the stack.
    Returns per-step top-layer time hiddens and final depth hiddens.
    """
    batch = inputs[0][0].shape[0]
    h_time = [_zeros(batch, d) for _ in range(layers)]
    m_time = [_zeros(batch, d) for _ in range(layers)]
    time_seq, depth_seq = [], []
    for h_in, m_in in inputs:
        h_depth, m_depth = h_in, m_in
        for layer in range(layers):
            concat = ad.concat([h_time[layer], h_depth], axis=-1)
            h_t, m_t, h_depth, m_depth = _cell_forward(
                tp, prefix, layer, concat, m_time[layer], m_depth, share_decoder
            )
            h_time[layer], m_time[layer] = h_t, m_t
        time_seq.append(h_time[layers - 1])
        depth_seq.append(h_depth)
    return time_seq, depth_seq, h_time


def _encode_tape(tp, windows: np.ndarray, model: GridLstmModel):
    """Interleaved feature attention + grid recurrence over (B, T, N)."""
    batch, steps, n = windows.shape
    d = model.hidden_size
    alphas, weighted = [], []
    h_prev = _zeros(batch, d)  # layer-0 time hidden drives the scorer
    time_seq, depth_seq = [], []
    h_time = [_zeros(batch, d) for _ in range(model.layers)]
    m_time = [_zeros(batch, d) for _ in range(model.layers)]
    for t in range(steps):
        x_t = ad.Tensor(windows[:, t, :])
        score = ad.affine(ad.concat([x_t, h_prev], axis=-1), tp["att_w"], tp["att_b"])
        alpha = ad.softmax(score, axis=-1)
        x_hat = ad.mul(alpha, x_t)
        alphas.append(alpha)
        weighted.append(x_hat)

        h_depth = ad.affine(x_hat, tp["enc_in_h_w"], tp["enc_in_h_b"])
        m_depth = ad.affine(x_hat, tp["enc_in_m_w"], tp["enc_in_m_b"])
        for layer in range(model.layers):
            concat = ad.concat([h_time[layer], h_depth], axis=-1)
            h_t, m_t, h_depth, m_depth = _cell_forward(
                tp, "enc", layer, concat, m_time[layer], m_depth, model.share_decoder
            )
            h_time[layer], m_time[layer] = h_t, m_t
        h_prev = h_time[0]
        time_seq.append(h_time[model.layers - 1])
        depth_seq.append(h_depth)
    return {
        "alpha": ad.stack(alphas, axis=1),
        "weighted": ad.stack(weighted, axis=1),
        "time_states": time_seq,
        "depth_states": depth_seq,
    }


def _cross_attention_tape(tp, queries: list, keys_values: list, d: int):
    """Scaled dot-product attention; raw depth states serve as values."""
    q = ad.matmul(ad.stack(queries, axis=1), tp["xatt_q_w"])
    k = ad.matmul(ad.stack(keys_values, axis=1), tp["xatt_k_w"])
    v = ad.stack(keys_values, axis=1)
    scores = ad.mul(ad.matmul(q, ad.transpose_last2(k)), ad.Tensor(1.0 / np.sqrt(d)))
    weights = ad.softmax(scores, axis=-1)
    return weights, ad.matmul(weights, v)


def _forward_tape(tp, windows: np.ndarray, model: GridLstmModel):
    """Full forward pass; returns every intermediate plus the prediction."""
    enc = _encode_tape(tp, windows, model)
    weights, contexts = _cross_attention_tape(
        tp, enc["time_states"], enc["depth_states"], model.hidden_size
    )
    steps = windows.shape[1]
    dec_inputs = []
    for t in range(steps):
        ctx = ad.index_axis(contexts, t, axis=1)
        dec_inputs.append(
            (
                ad.affine(ctx, tp["dec_in_h_w"], tp["dec_in_h_b"]),
                ad.affine(ctx, tp["dec_in_m_w"], tp["dec_in_m_b"]),
            )
        )
    dec_time, _, _ = _run_grid(
        tp, "dec", dec_inputs, model.layers, model.hidden_size, model.share_decoder
    )
    pred = ad.affine(dec_time[-1], tp["head_w"], tp["head_b"])
    return {
        "encoder": enc,
        "attention_weights": weights,
        "contexts": contexts,
        "prediction": pred,
    }


def _check_window(window, model: GridLstmModel) -> np.ndarray:
    arr = as_float_array(window, "window")
    if arr.ndim == 2:
        arr = arr[None, :, :]
    if arr.ndim != 3 or arr.shape[2] != model.n_features:
        raise ValueError(
            f"window must be (T, {model.n_features}) or batched, got {arr.shape}"
        )
    return arr


# ---------------------------------------------------------------------------
# Public numpy-facing operations.
# ---------------------------------------------------------------------------


def feature_attention(window, model: GridLstmModel):
    """Attention weights and the reweighted window for one (T, N) input.

    Rows of the returned weights are softmax-normalized across features.
    """
    arr = _check_window(window, model)
    enc = _encode_tape(_as_tensors(model.params), arr, model)
    alpha = enc["alpha"].value
    weighted = enc["weighted"].value
    if np.asarray(window).ndim == 2:
        return alpha[0], weighted[0]
    return alpha, weighted


def grid_cell_step(concat_hidden, m_time, m_depth, model: GridLstmModel,
                   prefix: str = "enc", layer: int = 0):
    """Single grid-cell update given the concatenated incoming hiddens."""
    tp = _as_tensors(model.params)
    h = ad.Tensor(np.atleast_2d(as_float_array(concat_hidden, "concat_hidden")))
    mt = ad.Tensor(np.atleast_2d(as_float_array(m_time, "m_time")))
    md = ad.Tensor(np.atleast_2d(as_float_array(m_depth, "m_depth")))
    d = model.hidden_size
    if h.shape[-1] != 2 * d or mt.shape[-1] != d or md.shape[-1] != d:
        raise ValueError("grid cell dimension mismatch")
    outs = _cell_forward(tp, prefix, layer, h, mt, md, model.share_decoder)
    return tuple(np.squeeze(o.value, axis=0) if np.asarray(concat_hidden).ndim == 1
                 else o.value for o in outs)


def encode(window, model: GridLstmModel):
    """Per-step hidden states of the time and depth streams."""
    arr = _check_window(window, model)
    enc = _encode_tape(_as_tensors(model.params), arr, model)
    time = np.stack([t.value for t in enc["time_states"]], axis=1)
    depth = np.stack([t.value for t in enc["depth_states"]], axis=1)
    if np.asarray(window).ndim == 2:
        return time[0], depth[0]
    return time, depth


def cross_attention(queries, keys_values, model: GridLstmModel):
    """Attention weights and contexts for query/key-value state sequences."""
    q = as_float_array(queries, "queries")
    kv = as_float_array(keys_values, "keys_values")
    single = q.ndim == 2
    if single:
        q, kv = q[None], kv[None]
    if kv.shape[1] == 0:
        raise ValueError("cross_attention requires a nonempty key set")
    tp = _as_tensors(model.params)
    q_list = [ad.Tensor(q[:, t, :]) for t in range(q.shape[1])]
    kv_list = [ad.Tensor(kv[:, t, :]) for t in range(kv.shape[1])]
    weights, contexts = _cross_attention_tape(tp, q_list, kv_list, model.hidden_size)
    if single:
        return weights.value[0], contexts.value[0]
    return weights.value, contexts.value


def decode(window, model: GridLstmModel):
    """Scalar (normalized-scale) prediction for each window."""
    arr = _check_window(window, model)
    out = _forward_tape(_as_tensors(model.params), arr, model)
    pred = out["prediction"].value[:, 0]
    return float(pred[0]) if np.asarray(window).ndim == 2 else pred


def predict(model: GridLstmModel, window, norm: NormalizationParams | None = None):
    """Forecast for a normalized window; denormalized when params are given."""
    raw = decode(window, model)
    norm = norm if norm is not None else model.target_norm
    if norm is None:
        return raw
    out = norm.denormalize(np.atleast_1d(np.asarray(raw, dtype=np.float64)))
    return float(out[0]) if np.isscalar(raw) else out


# ---------------------------------------------------------------------------
# Checkpoints.
# ---------------------------------------------------------------------------


def save_model(model: GridLstmModel, path) -> None:
    meta = {
        "version": CHECKPOINT_VERSION,
        "hidden_size": model.hidden_size,
        "n_features": model.n_features,
        "layers": model.layers,
        "share_decoder": model.share_decoder,
        "seed": model.seed,
        "target_norm": None
        if model.target_norm is None
        else {
            "mins": model.target_norm.mins.tolist(),
            "maxs": model.target_norm.maxs.tolist(),
        },
    }
    arrays = {f"param::{k}": v for k, v in model.params.items()}
    np.savez(path, __meta__=np.array(json.dumps(meta)), **arrays)


def load_model(path) -> GridLstmModel:
    with np.load(path) as data:
        meta = json.loads(str(data["__meta__"]))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version: {meta.get('version')}")
        params = {
            k[len("param::"):]: data[k] for k in data.files if k.startswith("param::")
        }
    norm = None
    if meta["target_norm"] is not None:
        norm = NormalizationParams(
            mins=np.array(meta["target_norm"]["mins"]),
            maxs=np.array(meta["target_norm"]["maxs"]),
        )
    return GridLstmModel(
        hidden_size=meta["hidden_size"],
        n_features=meta["n_features"],
        layers=meta["layers"],
        share_decoder=meta["share_decoder"],
        seed=meta["seed"],
        params=params,
        target_norm=norm,
    )
