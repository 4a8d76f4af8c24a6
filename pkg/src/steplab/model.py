"""Attention-LSTM regressor mapping a variable-length signal to a step count.

The network is a unidirectional stacked LSTM over the (L, input_size) signal,
an attention layer that scores every timestep against a column-sum summary of
the hidden sequence, and a small dense head that reads out one real number.
Sequences are processed one sample at a time; nothing is padded or masked.

Two forward routes exist on purpose. model_forward() is plain numpy and is
what prediction, evaluation, and export use. forward_graph() builds a tape
graph for training; its LSTM layers are registered as fused tape ops with a
hand-written time-reversed backward, and the finite-difference oracle in
steplab.tape is the independent check on the whole route.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import tape
from .tape import Matrix, Node, ShapeError

VALID_INPUT_SIZES = (1, 3, 4)
HEAD_ACTIVATIONS = ("identity", "tanh")


@dataclass
class ModelConfig:
    input_size: int
    hidden_size: int
    num_layers: int = 2
    use_attention: bool = True
    head_layers: int = 2            # 1 = single linear readout on concat(c, s)
    head_activation: str = "identity"
    attention_bias: bool = True

    def __post_init__(self):
        if self.input_size not in VALID_INPUT_SIZES:
            raise ValueError(f"input_size must be one of {VALID_INPUT_SIZES}, got {self.input_size}")
        if self.hidden_size < 1:
            raise ValueError("hidden_size must be >= 1")
        if self.num_layers < 1:
            raise ValueError("num_layers must be >= 1")
        if self.head_layers not in (1, 2):
            raise ValueError("head_layers must be 1 or 2")
        if self.head_activation not in HEAD_ACTIVATIONS:
            raise ValueError(f"head_activation must be one of {HEAD_ACTIVATIONS}")


@dataclass
class LayerParams:
    """One LSTM layer. Gate order within the leading 4H axis is fixed:
    input, forget, cell, output."""
    w_x: Matrix    # (4H, D_in)
    w_h: Matrix    # (4H, H)
    b: Matrix      # (4H, 1)


@dataclass
class AttentionParams:
    w: Matrix                 # (H, H)
    b: Optional[Matrix]       # (H, 1), or None when the bias is disabled


@dataclass
class HeadParams:
    w1: Matrix                # (H, 2H), or (1, 2H) for a single-layer head
    b1: Matrix                # (H, 1), or (1, 1)
    w2: Optional[Matrix]      # (1, H); None for a single-layer head
    b2: Optional[Matrix]      # (1, 1); None for a single-layer head


@dataclass
class ModelParams:
    layers: list[LayerParams]
    attention: Optional[AttentionParams]
    head: HeadParams

    def flat(self) -> list[Matrix]:
        """All parameter arrays in a fixed, documented order: per layer
        (w_x, w_h, b), then attention (w, b if present), then head
        (w1, b1, w2, b2 as present). Optimizer state, checkpoints, and
        gradient checks all rely on this order."""
        out: list[Matrix] = []
        for layer in self.layers:
            out.extend([layer.w_x, layer.w_h, layer.b])
        if self.attention is not None:
            out.append(self.attention.w)
            if self.attention.b is not None:
                out.append(self.attention.b)
        out.extend([self.head.w1, self.head.b1])
        if self.head.w2 is not None:
            out.extend([self.head.w2, self.head.b2])
        return out


@dataclass
class Diagnostics:
    """Per-timestep attention readout for one sample."""
    weights: np.ndarray       # (L,) softmax weights, sums to 1
    scores: np.ndarray        # (L,) pre-softmax scores
    proj: np.ndarray          # (L, H) projected hidden states
    summary: np.ndarray       # (H,) column-sum of the hidden sequence


def init_params(config: ModelConfig, seed: int) -> ModelParams:
    """Uniform [-1/sqrt(H), +1/sqrt(H)] weights, zero biases, except each
    LSTM forget-gate bias block which starts at 1."""
    rng = np.random.default_rng(seed)
    h = config.hidden_size
    bound = 1.0 / np.sqrt(h)

    def w(shape):
        return rng.uniform(-bound, bound, shape)

    layers = []
    for k in range(config.num_layers):
        d_in = config.input_size if k == 0 else h
        b = np.zeros((4 * h, 1))
        b[h:2 * h] = 1.0
        layers.append(LayerParams(w_x=w((4 * h, d_in)), w_h=w((4 * h, h)), b=b))

    attention = None
    if config.use_attention:
        ab = np.zeros((h, 1)) if config.attention_bias else None
        attention = AttentionParams(w=w((h, h)), b=ab)

    if config.head_layers == 2:
        head = HeadParams(w1=w((h, 2 * h)), b1=np.zeros((h, 1)),
                          w2=w((1, h)), b2=np.zeros((1, 1)))
    else:
        head = HeadParams(w1=w((1, 2 * h)), b1=np.zeros((1, 1)), w2=None, b2=None)
    return ModelParams(layers=layers, attention=attention, head=head)


# ---------------------------------------------------------------------------
# LSTM layer: shared cache-producing forward and time-reversed backward


def _sigmoid_raw(z: np.ndarray) -> np.ndarray:
    # Hot path. exp overflow for very negative z still yields the correct
    # 0.0 limit; the caller silences the warning once per sequence.
    return 1.0 / (1.0 + np.exp(-z))


@dataclass
class _LayerCache:
    x: np.ndarray
    gi: np.ndarray
    gf: np.ndarray
    gg: np.ndarray
    go: np.ndarray
    c: np.ndarray
    tc: np.ndarray
    hout: np.ndarray


def _layer_run(w_x: Matrix, w_h: Matrix, b: Matrix, x: Matrix) -> _LayerCache:
    """One layer over the full sequence. x (L, D) -> hidden (L, H), with all
    gate activations cached for the backward sweep."""
    seq_len = x.shape[0]
    h = w_h.shape[1]
    pre = x @ w_x.T + b.T                      # (L, 4H), input-to-hidden for all t
    gi = np.empty((seq_len, h)); gf = np.empty((seq_len, h))
    gg = np.empty((seq_len, h)); go = np.empty((seq_len, h))
    cs = np.empty((seq_len, h)); tcs = np.empty((seq_len, h))
    hout = np.empty((seq_len, h))
    h_prev = np.zeros(h)
    c_prev = np.zeros(h)
    with np.errstate(over="ignore"):
        for t in range(seq_len):
            z = pre[t] + w_h @ h_prev
            sig = _sigmoid_raw(z[0:2 * h])     # input and forget gates share one call
            i = sig[0:h]
            f = sig[h:2 * h]
            g = np.tanh(z[2 * h:3 * h])
            o = _sigmoid_raw(z[3 * h:4 * h])
            c = f * c_prev + i * g
            tc = np.tanh(c)
            h_t = o * tc
            gi[t] = i; gf[t] = f; gg[t] = g; go[t] = o
            cs[t] = c; tcs[t] = tc; hout[t] = h_t
            h_prev = h_t
            c_prev = c
    return _LayerCache(x=x, gi=gi, gf=gf, gg=gg, go=go, c=cs, tc=tcs, hout=hout)


def _layer_backward(w_x: Matrix, w_h: Matrix, cache: _LayerCache,
                    d_hout: np.ndarray) -> tuple[Matrix, Matrix, Matrix, Matrix]:
    """Gradient of a scalar objective through one layer, given the gradient
    d_hout (L, H) with respect to every emitted hidden state. Returns
    (d_wx, d_wh, d_b, d_x)."""
    seq_len, h = cache.hout.shape
    gi, gf, gg, go = cache.gi, cache.gf, cache.gg, cache.go
    # Local activation derivatives, vectorized over the whole sequence.
    di_act = gi * (1.0 - gi)
    df_act = gf * (1.0 - gf)
    do_act = go * (1.0 - go)
    dg_act = 1.0 - gg * gg
    dtc = 1.0 - cache.tc * cache.tc
    c_prev_all = np.vstack([np.zeros((1, h)), cache.c[:-1]])
    w_h_t = np.ascontiguousarray(w_h.T)

    dz_all = np.empty((seq_len, 4 * h))
    dh_next = np.zeros(h)
    dc_next = np.zeros(h)
    for t in range(seq_len - 1, -1, -1):
        dh = d_hout[t] + dh_next
        do = dh * cache.tc[t]
        dc = dh * go[t] * dtc[t] + dc_next
        dz = dz_all[t]
        dz[0:h] = dc * gg[t] * di_act[t]
        dz[h:2 * h] = dc * c_prev_all[t] * df_act[t]
        dz[2 * h:3 * h] = dc * gi[t] * dg_act[t]
        dz[3 * h:4 * h] = do * do_act[t]
        dc_next = dc * gf[t]
        dh_next = w_h_t @ dz
    d_wx = dz_all.T @ cache.x
    d_b = dz_all.sum(axis=0)[:, None]
    # h_{t-1} is zero at t = 0, so that term drops out of d_wh.
    d_wh = dz_all[1:].T @ cache.hout[:-1] if seq_len > 1 else np.zeros_like(w_h)
    d_x = dz_all @ w_x
    return d_wx, d_wh, d_b, d_x


def lstm_layer_node(w_x: Node, w_h: Node, b: Node, x: Node) -> Node:
    """Fused tape op: one LSTM layer over a full sequence."""
    cache = _layer_run(w_x.value, w_h.value, b.value, x.value)

    def backprop(up):
        d_wx, d_wh, d_b, d_x = _layer_backward(w_x.value, w_h.value, cache, up)
        w_x.grad += d_wx
        w_h.grad += d_wh
        b.grad += d_b
        x.grad += d_x

    return Node.from_op(cache.hout, (w_x, w_h, b, x), backprop)


# ---------------------------------------------------------------------------
# plain-numpy forward route


def lstm_cell_step(layer: LayerParams, x_t: Matrix, h_prev: Matrix,
                   c_prev: Matrix) -> tuple[Matrix, Matrix]:
    """Single recurrence step on column vectors: x_t (D,1), h_prev/c_prev
    (H,1) -> (h_t, c_t), both (H,1)."""
    h = layer.w_h.shape[1]
    if x_t.shape != (layer.w_x.shape[1], 1):
        raise ShapeError(f"x_t must be ({layer.w_x.shape[1]},1), got {x_t.shape}")
    if h_prev.shape != (h, 1) or c_prev.shape != (h, 1):
        raise ShapeError(f"state must be ({h},1), got {h_prev.shape} and {c_prev.shape}")
    z = layer.w_x @ x_t + layer.w_h @ h_prev + layer.b
    i = tape.sigmoid(z[0:h])
    f = tape.sigmoid(z[h:2 * h])
    g = np.tanh(z[2 * h:3 * h])
    o = tape.sigmoid(z[3 * h:4 * h])
    c_t = f * c_prev + i * g
    h_t = o * np.tanh(c_t)
    return h_t, c_t


def lstm_forward(params: ModelParams, x: Matrix) -> Matrix:
    """Stacked layers over the whole sequence, zero initial state per layer.
    x (L, input_size) -> hidden sequence of the last layer (L, H)."""
    if x.ndim != 2 or x.shape[0] < 1:
        raise ShapeError(f"input must be a non-empty (L, D) matrix, got {x.shape}")
    seq = x
    for layer in params.layers:
        seq = _layer_run(layer.w_x, layer.w_h, layer.b, seq).hout
    return seq


def attention_forward(h: Matrix, attn: AttentionParams
                      ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Score every timestep of h (L, H) against the column-sum summary.

    Returns (context (H,), summary (H,), weights (L,), proj (L, H)) where
    proj = h W^T (+ bias), weights = softmax(proj @ summary), and
    context = weights @ h.
    """
    s = h.sum(axis=0)
    proj = h @ attn.w.T
    if attn.b is not None:
        proj = proj + attn.b[:, 0]
    scores = proj @ s
    w = tape.softmax(scores)
    c = w @ h
    return c, s, w, proj


def head_forward(c: np.ndarray, s: np.ndarray, head: HeadParams,
                 activation: str = "identity") -> float:
    """Dense readout on concat(c, s) -> one real number."""
    z = np.concatenate([c, s])
    if head.w2 is None:
        return float((head.w1 @ z)[0] + head.b1[0, 0])
    a = head.w1 @ z + head.b1[:, 0]
    if activation == "tanh":
        a = np.tanh(a)
    return float((head.w2 @ a)[0] + head.b2[0, 0])


def model_forward(params: ModelParams, config: ModelConfig, x: Matrix,
                  want_diagnostics: bool = False
                  ) -> tuple[float, Optional[Diagnostics]]:
    """Full model on one preprocessed sample. x (L, input_size) -> scalar.

    Diagnostics are only defined for attention models; None otherwise.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != config.input_size:
        raise ShapeError(
            f"input must be (L, {config.input_size}), got {x.shape}")
    if x.shape[0] < 1:
        raise ShapeError("input sequence is empty")
    h = lstm_forward(params, x)
    if config.use_attention:
        c, s, w, proj = attention_forward(h, params.attention)
        y = head_forward(c, s, params.head, config.head_activation)
        diag = None
        if want_diagnostics:
            diag = Diagnostics(weights=w, scores=proj @ s, proj=proj, summary=s)
        return y, diag
    s = h.sum(axis=0)
    y = head_forward(h[-1], s, params.head, config.head_activation)
    return y, None


def predict(params: ModelParams, config: ModelConfig, x: Matrix) -> float:
    return model_forward(params, config, x)[0]


# ---------------------------------------------------------------------------
# tape route for training


def wrap_params(params: ModelParams) -> tuple[ModelParams, list[Node]]:
    """Wrap every parameter array in a leaf Node, sharing storage with the
    originals (Node does not copy float64 input). Returns the node-valued
    mirror plus the leaves in flat() order."""
    leaves: list[Node] = []

    def leaf(a: Matrix) -> Node:
        n = Node(a)
        assert n.value is a  # optimizer updates must be visible to the graph
        leaves.append(n)
        return n

    layers = [LayerParams(w_x=leaf(l.w_x), w_h=leaf(l.w_h), b=leaf(l.b))
              for l in params.layers]
    attention = None
    if params.attention is not None:
        attention = AttentionParams(
            w=leaf(params.attention.w),
            b=leaf(params.attention.b) if params.attention.b is not None else None)
    head = HeadParams(
        w1=leaf(params.head.w1), b1=leaf(params.head.b1),
        w2=leaf(params.head.w2) if params.head.w2 is not None else None,
        b2=leaf(params.head.b2) if params.head.b2 is not None else None)
    return ModelParams(layers=layers, attention=attention, head=head), leaves


def forward_graph(node_params: ModelParams, config: ModelConfig,
                  x: Matrix) -> Node:
    """Build the training graph for one sample and return the scalar output
    node. node_params comes from wrap_params()."""
    if x.ndim != 2 or x.shape[1] != config.input_size or x.shape[0] < 1:
        raise ShapeError(f"input must be non-empty (L, {config.input_size}), got {x.shape}")
    seq = Node(x)
    for layer in node_params.layers:
        seq = lstm_layer_node(layer.w_x, layer.w_h, layer.b, seq)
    s = seq.sum_rows()                                   # (1, H)
    if config.use_attention:
        attn = node_params.attention
        proj = seq.matmul(attn.w.transpose())            # (L, H)
        if attn.b is not None:
            proj = tape.add_rowvec(proj, attn.b.transpose())
        scores = proj.matmul(s.transpose())              # (L, 1)
        w = scores.softmax()
        context = w.transpose().matmul(seq)              # (1, H)
        z = tape.concat_cols(context, s)                 # (1, 2H)
    else:
        last = seq.slice_rows(x.shape[0] - 1, x.shape[0])
        z = tape.concat_cols(last, s)
    head = node_params.head
    if head.w2 is None:
        return z.matmul(head.w1.transpose()) + head.b1.transpose()
    a = z.matmul(head.w1.transpose()) + head.b1.transpose()   # (1, H)
    if config.head_activation == "tanh":
        a = a.tanh()
    return a.matmul(head.w2.transpose()) + head.b2
