"""Temporal graph network: graph-attention spatial encoder, GRU temporal encoder, action head.

Everything is plain numpy with hand-written backpropagation. Snapshots of a
whole batch are stacked along a leading axis so the spatial encoder runs
once per epoch; the GRU runs over padded sequences with a loss mask.

Parameter blocks, in checkpoint order::

    gat{l}.W      (heads, d_in, F)     l = 0..2
    gat{l}.a_src  (heads, F)
    gat{l}.a_dst  (heads, F)
    bn{l}.gamma   (heads*F,)
    bn{l}.beta    (heads*F,)
    gru{k}.W_ih   (3H, d_in)           k = 0..1, gate rows ordered r, z, n
    gru{k}.W_hh   (3H, H)
    gru{k}.b_ih   (3H,)
    gru{k}.b_hh   (3H,)
    head.W        (N*A, H)
    head.b        (N*A,)

Buffers ``bn{l}.running_mean`` and ``bn{l}.running_var`` follow the parameters.
"""

from __future__ import annotations

import base64
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import NumericError, ParameterError, TrainingError

log = logging.getLogger(__name__)

LEAKY_SLOPE = 0.2
BN_EPS = 1e-5
BN_MOMENTUM = 0.1
INIT_SCALE = 0.1
EARLY_STOP_LOSS = 1e-4
DIVERGENCE_LOSS = 1e6
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class TgnConfig:
    num_nodes: int
    num_actions: int
    gat_hidden: int = 32
    heads: int = 2
    gat_layers: int = 3
    gru_hidden: int = 128
    gru_layers: int = 2
    dropout_rate: float = 0.2
    learning_rate: float = 1e-3
    max_epochs: int = 300
    seed: int = 0
    bounds: tuple = (0.0, 0.0, 10.0, 10.0)

    def __post_init__(self):
        object.__setattr__(self, "bounds", tuple(float(b) for b in self.bounds))
        if self.heads != 2 or self.gat_layers != 3 or self.gru_layers != 2:
            raise ParameterError("the architecture fixes heads=2, gat_layers=3, gru_layers=2")
        for name in ("num_nodes", "num_actions", "gat_hidden", "gru_hidden", "max_epochs"):
            if getattr(self, name) < 1:
                raise ParameterError(f"{name} must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ParameterError("dropout_rate must lie in [0, 1)")
        if self.learning_rate <= 0:
            raise ParameterError("learning_rate must be positive")
        x0, y0, x1, y1 = self.bounds
        if not (x1 > x0 and y1 > y0):
            raise ParameterError(f"degenerate workspace bounds {self.bounds}")

    @property
    def embed_dim(self) -> int:
        return self.heads * self.gat_hidden


def param_shapes(cfg: TgnConfig) -> dict:
    K, F, H = cfg.heads, cfg.gat_hidden, cfg.gru_hidden
    shapes = {}
    d_in = 2
    for l in range(cfg.gat_layers):
        shapes[f"gat{l}.W"] = (K, d_in, F)
        shapes[f"gat{l}.a_src"] = (K, F)
        shapes[f"gat{l}.a_dst"] = (K, F)
        shapes[f"bn{l}.gamma"] = (K * F,)
        shapes[f"bn{l}.beta"] = (K * F,)
        d_in = K * F
    for k in range(cfg.gru_layers):
        shapes[f"gru{k}.W_ih"] = (3 * H, d_in)
        shapes[f"gru{k}.W_hh"] = (3 * H, H)
        shapes[f"gru{k}.b_ih"] = (3 * H,)
        shapes[f"gru{k}.b_hh"] = (3 * H,)
        d_in = H
    shapes["head.W"] = (cfg.num_nodes * cfg.num_actions, H)
    shapes["head.b"] = (cfg.num_nodes * cfg.num_actions,)
    return shapes


@dataclass(eq=False)
class TgnModel:
    config: TgnConfig
    params: dict
    buffers: dict = field(default_factory=dict)

    @classmethod
    def initialize(cls, cfg: TgnConfig) -> "TgnModel":
        """Uniform(-0.1, 0.1) weights from the config seed; BN scale 1, shift 0."""
        rng = np.random.default_rng(cfg.seed)
        params, buffers = {}, {}
        for name, shape in param_shapes(cfg).items():
            if name.endswith(".gamma"):
                params[name] = np.ones(shape)
            elif name.endswith(".beta"):
                params[name] = np.zeros(shape)
            else:
                params[name] = rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape)
        for l in range(cfg.gat_layers):
            buffers[f"bn{l}.running_mean"] = np.zeros(cfg.embed_dim)
            buffers[f"bn{l}.running_var"] = np.ones(cfg.embed_dim)
        return cls(cfg, params, buffers)

    def copy(self) -> "TgnModel":
        return TgnModel(self.config, {k: v.copy() for k, v in self.params.items()},
                        {k: v.copy() for k, v in self.buffers.items()})

    def layer(self, l: int) -> dict:
        return {"W": self.params[f"gat{l}.W"], "a_src": self.params[f"gat{l}.a_src"],
                "a_dst": self.params[f"gat{l}.a_dst"], "gamma": self.params[f"bn{l}.gamma"],
                "beta": self.params[f"bn{l}.beta"],
                "running_mean": self.buffers[f"bn{l}.running_mean"],
                "running_var": self.buffers[f"bn{l}.running_var"]}


@dataclass(frozen=True, eq=False)
class ActionStep:
    actions: np.ndarray      # (N,) int
    logits: np.ndarray       # (N, A)

    def all_idle(self) -> bool:
        return not np.any(self.actions)


# --------------------------------------------------------------------- inputs

def attention_mask(edges, node_ids) -> np.ndarray:
    """Boolean ``mask[i, j]``: node i attends to node j.

    Each refined edge contributes both directions; every node has a self-loop.
    Edges naming nodes outside ``node_ids`` are ignored.
    """
    index = {nid: i for i, nid in enumerate(node_ids)}
    mask = np.eye(len(node_ids), dtype=bool)
    for e in edges:
        s, t = (e.source, e.target) if hasattr(e, "source") else e
        if s in index and t in index:
            mask[index[s], index[t]] = mask[index[t], index[s]] = True
    return mask


def normalize_positions(X: np.ndarray, bounds) -> np.ndarray:
    x0, y0, x1, y1 = bounds
    X = np.asarray(X, dtype=float)
    return (X - np.array([x0, y0])) / np.array([x1 - x0, y1 - y0])


def _check(a: np.ndarray, where: str):
    if not np.all(np.isfinite(a)):
        raise NumericError(f"non-finite values in {where}")


# -------------------------------------------------------------- spatial encoder

def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _gat_forward(H, mask, p, mode, drop, rate):
    """Batched layer over ``H`` of shape (B, N, d). Returns (out, cache)."""
    B, N, _ = H.shape
    K, _, F = p["W"].shape
    Z = H[:, None] @ p["W"][None]                       # (B, K, N, F)
    s_dst = (Z @ p["a_dst"][:, :, None])[..., 0]          # (B, K, N)
    s_src = (Z @ p["a_src"][:, :, None])[..., 0]
    E = s_dst[..., :, None] + s_src[..., None, :]
    Lk = np.where(E > 0, E, LEAKY_SLOPE * E)
    Lm = np.where(mask, Lk, -np.inf)
    Lm = Lm - Lm.max(axis=-1, keepdims=True)
    ex = np.exp(Lm)
    alpha = ex / ex.sum(axis=-1, keepdims=True)
    O = alpha @ Z
    X = O.transpose(0, 2, 1, 3).reshape(B, N, K * F)

    if mode == "train":
        mu = X.mean(axis=1, keepdims=True)
        var = X.var(axis=1, keepdims=True)
    else:
        mu, var = p["running_mean"], p["running_var"]
    inv = 1.0 / np.sqrt(var + BN_EPS)
    Xh = (X - mu) * inv
    Y = p["gamma"] * Xh + p["beta"]
    keep = drop / (1.0 - rate) if drop is not None else 1.0
    Yd = Y * keep
    out = np.maximum(Yd, 0.0)
    cache = dict(H=H, Z=Z, E=E, alpha=alpha, Xh=Xh, inv=inv, keep=keep, Yd=Yd,
                 mu=mu, var=var, mode=mode)
    return out, cache


def _gat_backward(dout, p, c):
    B, N, _ = c["H"].shape
    K, _, F = p["W"].shape
    dY = dout * (c["Yd"] > 0) * c["keep"]
    dgamma = np.sum(dY * c["Xh"], axis=(0, 1))
    dbeta = np.sum(dY, axis=(0, 1))
    dXh = dY * p["gamma"]
    if c["mode"] == "train":
        dX = c["inv"] / N * (N * dXh - dXh.sum(axis=1, keepdims=True)
                             - c["Xh"] * np.sum(dXh * c["Xh"], axis=1, keepdims=True))
    else:
        dX = dXh * c["inv"]
    dO = dX.reshape(B, N, K, F).transpose(0, 2, 1, 3)
    Z, alpha = c["Z"], c["alpha"]
    dalpha = dO @ Z.swapaxes(-1, -2)
    dZ = alpha.swapaxes(-1, -2) @ dO
    dL = alpha * (dalpha - np.sum(dalpha * alpha, axis=-1, keepdims=True))
    dE = dL * np.where(c["E"] > 0, 1.0, LEAKY_SLOPE)
    ds_dst = dE.sum(axis=-1)
    ds_src = dE.sum(axis=-2)
    dZ += ds_dst[..., None] * p["a_dst"][None, :, None, :]
    dZ += ds_src[..., None] * p["a_src"][None, :, None, :]
    Hf = c["H"].reshape(B * N, -1)
    dZk = dZ.transpose(1, 0, 2, 3).reshape(K, B * N, F)
    Zk = Z.transpose(1, 0, 2, 3).reshape(K, B * N, F)
    grads = {
        "W": Hf.T @ dZk,
        "a_dst": (ds_dst.transpose(1, 0, 2).reshape(K, 1, B * N) @ Zk)[:, 0],
        "a_src": (ds_src.transpose(1, 0, 2).reshape(K, 1, B * N) @ Zk)[:, 0],
        "gamma": dgamma, "beta": dbeta,
    }
    dH = (dZ @ p["W"].swapaxes(-1, -2)[None]).sum(axis=1)
    return dH, grads


def gat_layer_forward(H, edges_or_mask, layer_params: dict, mode: str = "eval",
                      rng=None, rate: float = 0.0) -> np.ndarray:
    """One attention layer on a single snapshot ``H`` of shape (N, d).

    ``edges_or_mask`` is an N x N boolean mask or a list of (source, target)
    pairs over node indices 0..N-1.
    """
    H = np.asarray(H, dtype=float)
    mask = _as_mask(edges_or_mask, H.shape[0])
    drop = None
    if mode == "train" and rate > 0:
        K, _, F = layer_params["W"].shape
        drop = (rng.random((1, H.shape[0], K * F)) >= rate).astype(float)
    out, _ = _gat_forward(H[None], mask, layer_params, mode, drop, rate)
    _check(out, "attention layer")
    return out[0]


def attention_weights(H, edges_or_mask, layer_params: dict) -> np.ndarray:
    """Per-head attention matrices (heads, N, N) of one layer, rows indexed by destination."""
    H = np.asarray(H, dtype=float)
    mask = _as_mask(edges_or_mask, H.shape[0])
    _, cache = _gat_forward(H[None], mask, layer_params, "eval", None, 0.0)
    return cache["alpha"][0]


def _as_mask(edges_or_mask, n):
    m = np.asarray(edges_or_mask) if not isinstance(edges_or_mask, (list, tuple)) else None
    if m is not None and m.dtype == bool and m.shape == (n, n):
        return m | np.eye(n, dtype=bool)
    return attention_mask(edges_or_mask, list(range(n)))


def _dropout_masks(model, B, rng, mode):
    cfg = model.config
    if mode != "train" or cfg.dropout_rate == 0 or rng is None:
        return [None] * cfg.gat_layers
    return [(rng.random((B, cfg.num_nodes, cfg.embed_dim)) >= cfg.dropout_rate).astype(float)
            for _ in range(cfg.gat_layers)]


def _encode_batch(model, Xn, mask, mode, drops):
    h, caches = Xn, []
    for l in range(model.config.gat_layers):
        h, c = _gat_forward(h, mask, model.layer(l), mode, drops[l], model.config.dropout_rate)
        _check(h, f"attention layer {l}")
        caches.append(c)
    return h.mean(axis=1), h, caches


def spatial_encode(X, mask, model: TgnModel, mode: str = "eval", rng=None) -> np.ndarray:
    """Graph embedding of one raw-coordinate snapshot ``X`` of shape (N, 2)."""
    Xn = normalize_positions(X, model.config.bounds)[None]
    g, _, _ = _encode_batch(model, Xn, mask, mode, _dropout_masks(model, 1, rng, mode))
    return g[0]


# ------------------------------------------------------------- temporal encoder

def _gru_cell(x, h, p, k):
    H = h.shape[-1]
    gi = x @ p[f"gru{k}.W_ih"].T + p[f"gru{k}.b_ih"]
    gh = h @ p[f"gru{k}.W_hh"].T + p[f"gru{k}.b_hh"]
    r = _sigmoid(gi[..., :H] + gh[..., :H])
    z = _sigmoid(gi[..., H:2 * H] + gh[..., H:2 * H])
    hn = gh[..., 2 * H:]
    n = np.tanh(gi[..., 2 * H:] + r * hn)
    h_new = (1.0 - z) * n + z * h
    return h_new, (x, h, r, z, n, hn)


def _gru_cell_backward(dh_new, cache, p, k, grads):
    x, h, r, z, n, hn = cache
    dn = dh_new * (1.0 - z)
    dz = dh_new * (h - n)
    dh = dh_new * z
    dn_pre = dn * (1.0 - n * n)
    dr = dn_pre * hn
    dr_pre = dr * r * (1.0 - r)
    dz_pre = dz * z * (1.0 - z)
    di = np.concatenate([dr_pre, dz_pre, dn_pre], axis=-1)
    dgh = np.concatenate([dr_pre, dz_pre, dn_pre * r], axis=-1)
    grads[f"gru{k}.W_ih"] += di.T @ x
    grads[f"gru{k}.b_ih"] += di.sum(axis=0)
    grads[f"gru{k}.W_hh"] += dgh.T @ h
    grads[f"gru{k}.b_hh"] += dgh.sum(axis=0)
    dx = di @ p[f"gru{k}.W_ih"]
    dh = dh + dgh @ p[f"gru{k}.W_hh"]
    return dx, dh


def zero_state(model: TgnModel) -> np.ndarray:
    return np.zeros((model.config.gru_layers, model.config.gru_hidden))


def temporal_step(g, s_prev, model: TgnModel) -> np.ndarray:
    """One GRU step through both layers; ``s_prev`` has shape (layers, hidden)."""
    s_prev = np.asarray(s_prev, dtype=float)
    x, out = np.asarray(g, dtype=float), []
    for k in range(model.config.gru_layers):
        x, _ = _gru_cell(x, s_prev[k], model.params, k)
        out.append(x)
    return np.stack(out)


def _logits(top, model):
    cfg = model.config
    z = top @ model.params["head.W"].T + model.params["head.b"]
    return z.reshape(*top.shape[:-1], cfg.num_nodes, cfg.num_actions)


def predict_actions(s, model: TgnModel) -> ActionStep:
    logits = _logits(np.asarray(s)[-1], model)
    return ActionStep(np.argmax(logits, axis=-1).astype(np.int64), logits)


def predict_next_step(model: TgnModel, X, mask, s_prev=None):
    """Eval-mode policy query: encode ``X``, advance the GRU, read out actions."""
    if s_prev is None:
        s_prev = zero_state(model)
    g = spatial_encode(X, mask, model, "eval")
    s_new = temporal_step(g, s_prev, model)
    return predict_actions(s_new, model), s_new


# ---------------------------------------------------------------------- loss

@dataclass(frozen=True, eq=False)
class _Batch:
    X: np.ndarray        # (B, N, 2) normalized snapshots, sequences concatenated
    Y: np.ndarray        # (S, T, N) target label rows, padded
    lengths: np.ndarray  # (S,)
    offsets: np.ndarray  # (S,) index of each sequence's first snapshot in X


def sequence_targets(ks) -> np.ndarray:
    """Target label row of each keyframe: the next keyframe's labels, then the final frame's."""
    rows = [k.labels for k in ks.keyframes[1:]] + [ks.terminal_labels]
    return np.array(rows, dtype=np.int64)


def _make_batch(model, seqs) -> _Batch:
    usable = []
    for ks in seqs:
        if len(ks) < 2:
            log.warning("demonstration %d has fewer than 2 keyframes; skipped", ks.demo_index)
            continue
        usable.append(ks)
    if not usable:
        raise TrainingError("no sequence with at least 2 keyframes")
    N = model.config.num_nodes
    lengths = np.array([len(ks) for ks in usable])
    T = int(lengths.max())
    Y = np.zeros((len(usable), T, N), dtype=np.int64)
    X = []
    for s, ks in enumerate(usable):
        if len(ks.node_ids) != N:
            raise ParameterError(f"sequence has {len(ks.node_ids)} nodes, model expects {N}")
        Y[s, :lengths[s]] = sequence_targets(ks)
        X.extend(k.positions for k in ks.keyframes)
    Xn = normalize_positions(np.array(X), model.config.bounds)
    offsets = np.concatenate([[0], np.cumsum(lengths)[:-1]])
    return _Batch(Xn, Y, lengths, offsets)


def _forward_backward(model, batch: _Batch, mask, mode, rng, need_grad=True):
    cfg, p = model.config, model.params
    S, T, N = batch.Y.shape
    Hd = cfg.gru_hidden
    drops = _dropout_masks(model, batch.X.shape[0], rng, mode)
    g, _, gat_caches = _encode_batch(model, batch.X, mask, mode, drops)

    G = np.zeros((S, T, g.shape[1]))
    valid = np.zeros((S, T), dtype=bool)
    for s in range(S):
        n = batch.lengths[s]
        G[s, :n] = g[batch.offsets[s]:batch.offsets[s] + n]
        valid[s, :n] = True

    h = [np.zeros((S, Hd)) for _ in range(cfg.gru_layers)]
    caches, tops = [], []
    for t in range(T):
        x, step = G[:, t], []
        for k in range(cfg.gru_layers):
            h[k], c = _gru_cell(x, h[k], p, k)
            step.append(c)
            x = h[k]
        caches.append(step)
        tops.append(x)
    top = np.stack(tops, axis=1)                      # (S, T, H)
    logits = _logits(top, model)                      # (S, T, N, A)
    _check(logits, "action head")

    m = logits.max(axis=-1, keepdims=True)
    lse = m[..., 0] + np.log(np.exp(logits - m).sum(axis=-1))
    picked = np.take_along_axis(logits, batch.Y[..., None], axis=-1)[..., 0]
    cell = lse - picked                               # (S, T, N)
    w = valid[..., None] / (S * batch.lengths[:, None, None] * N)
    loss = float(np.sum(cell * w))
    stats = [(c["mu"], c["var"]) for c in gat_caches]
    if not need_grad:
        return loss, None, stats

    grads = {k: np.zeros_like(v) for k, v in p.items()}
    prob = np.exp(logits - lse[..., None])
    dlog = prob
    np.put_along_axis(dlog, batch.Y[..., None], np.take_along_axis(prob, batch.Y[..., None], -1) - 1.0, -1)
    dlog = (dlog * w[..., None]).reshape(S, T, -1)
    grads["head.W"] = np.einsum("sto,sth->oh", dlog, top)
    grads["head.b"] = dlog.sum(axis=(0, 1))
    dtop = dlog @ p["head.W"]                         # (S, T, H)

    dh = [np.zeros((S, Hd)) for _ in range(cfg.gru_layers)]
    dG = np.zeros_like(G)
    for t in reversed(range(T)):
        dx = dtop[:, t]
        for k in reversed(range(cfg.gru_layers)):
            dx, dh[k] = _gru_cell_backward(dx + dh[k], caches[t][k], p, k, grads)
        dG[:, t] = dx

    dg = np.zeros_like(g)
    for s in range(S):
        n = batch.lengths[s]
        dg[batch.offsets[s]:batch.offsets[s] + n] = dG[s, :n]
    dh3 = np.repeat(dg[:, None, :] / N, N, axis=1)
    for l in reversed(range(cfg.gat_layers)):
        dh3, gl = _gat_backward(dh3, model.layer(l), gat_caches[l])
        grads[f"gat{l}.W"] = gl["W"]
        grads[f"gat{l}.a_src"] = gl["a_src"]
        grads[f"gat{l}.a_dst"] = gl["a_dst"]
        grads[f"bn{l}.gamma"] = gl["gamma"]
        grads[f"bn{l}.beta"] = gl["beta"]
    for name, gr in grads.items():
        if not np.all(np.isfinite(gr)):
            raise NumericError(f"non-finite gradient in {name}")
    return loss, grads, stats


def batch_loss(model: TgnModel, seqs, mask, mode: str = "eval", rng=None) -> float:
    """Mean over sequences of each sequence's mean per-cell cross-entropy."""
    return _forward_backward(model, _make_batch(model, seqs), mask, mode, rng, need_grad=False)[0]


def sequence_loss(model: TgnModel, ks, mask, mode: str = "eval", rng=None) -> float:
    return batch_loss(model, [ks], mask, mode, rng)


def loss_and_gradients(model: TgnModel, seqs, mask, mode: str = "train", rng=None):
    loss, grads, _ = _forward_backward(model, _make_batch(model, seqs), mask, mode, rng)
    return loss, grads


def gradients(model: TgnModel, seqs, mask, rng=None, mode: str = "train") -> dict:
    return loss_and_gradients(model, seqs, mask, mode, rng)[1]


# ------------------------------------------------------------------ training

def train(seqs, mask, config: TgnConfig):
    """Full-batch Adam. Returns ``(model, loss_history)``.

    The history records the train-mode loss of every epoch, taken before
    that epoch's update. Training stops early once it drops below 1e-4.
    """
    model = TgnModel.initialize(config)
    batch = _make_batch(model, seqs)
    rng = np.random.default_rng(config.seed + 1)
    b1, b2, eps, lr = 0.9, 0.999, 1e-8, config.learning_rate
    m = {k: np.zeros_like(v) for k, v in model.params.items()}
    v = {k: np.zeros_like(v) for k, v in model.params.items()}
    history = []
    for epoch in range(1, config.max_epochs + 1):
        try:
            loss, grads, stats = _forward_backward(model, batch, mask, "train", rng)
        except NumericError as exc:
            raise TrainingError(str(exc), epoch) from None
        if not np.isfinite(loss) or loss > DIVERGENCE_LOSS:
            raise TrainingError(f"loss diverged ({loss})", epoch)
        history.append(loss)
        for l, (mu, var) in enumerate(stats):
            rm, rv = f"bn{l}.running_mean", f"bn{l}.running_var"
            model.buffers[rm] = (1 - BN_MOMENTUM) * model.buffers[rm] + BN_MOMENTUM * mu.mean(axis=(0, 1))
            model.buffers[rv] = (1 - BN_MOMENTUM) * model.buffers[rv] + BN_MOMENTUM * var.mean(axis=(0, 1))
        if loss < EARLY_STOP_LOSS:
            break
        for k in model.params:
            m[k] = b1 * m[k] + (1 - b1) * grads[k]
            v[k] = b2 * v[k] + (1 - b2) * grads[k] ** 2
            mhat = m[k] / (1 - b1 ** epoch)
            vhat = v[k] / (1 - b2 ** epoch)
            model.params[k] = model.params[k] - lr * mhat / (np.sqrt(vhat) + eps)
    return model, history


# ----------------------------------------------------------------------- I/O

def _encode(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _decode(rec: dict) -> np.ndarray:
    return np.frombuffer(base64.b64decode(rec["data"]), dtype="<f8").reshape(rec["shape"]).copy()


def save_model(model: TgnModel, path) -> None:
    """JSON container: version, config, then every block as little-endian float64 in base64."""
    cfg = asdict(model.config)
    cfg["bounds"] = list(cfg["bounds"])
    doc = {
        "format": "ddace-tgn", "version": CHECKPOINT_VERSION, "config": cfg,
        "params": [[name, _encode(model.params[name])] for name in param_shapes(model.config)],
        "buffers": [[name, _encode(model.buffers[name])] for name in sorted(model.buffers)],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def load_model(path) -> TgnModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != "ddace-tgn" or doc.get("version") != CHECKPOINT_VERSION:
        raise ParameterError(f"{path}: not a version-{CHECKPOINT_VERSION} TGN checkpoint")
    cfg = TgnConfig(**doc["config"])
    params = {name: _decode(rec) for name, rec in doc["params"]}
    shapes = param_shapes(cfg)
    if list(params) != list(shapes) or any(params[k].shape != shapes[k] for k in shapes):
        raise ParameterError(f"{path}: parameter blocks do not match the stored config")
    return TgnModel(cfg, params, {name: _decode(rec) for name, rec in doc["buffers"]})


def write_loss_csv(history, path) -> None:
    lines = ["epoch,loss"] + [f"{i},{loss!r}" for i, loss in enumerate(history, start=1)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_loss_csv(path) -> list:
    rows = Path(path).read_text(encoding="utf-8").splitlines()[1:]
    return [float(r.split(",")[1]) for r in rows if r.strip()]
