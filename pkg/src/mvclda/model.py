"""Forward and backward computation for the MVC-LDA and MVC-RLDA models.

The architecture, per document of length l:

  X  = W_e[token_ids]                              (l x d_e)  embedded input
  Z_i = zero-padded 1-d convolution with kernel s_i (l x d_c) per channel
  C  = tanh(elementwise max over channels of Z_i)  (l x d_c)
  a_j = C V_j          per-label attention scores  (l,)
  P_j = C^T a_j        attention-pooled features   (d_c,)
  T_j = sigmoid(K_j * l/10000 + d_j)               length feature
  y_j = sigmoid(U_j . P_j + b_j + T_j)

MVC-LDA minimizes summed per-label binary cross entropy; MVC-RLDA adds
g_j * lambda * ||V_j - f(D_j)||^2 for gold-positive labels, where f encodes
the label description with a tied-embedding convolution, spatial max pool,
and sigmoid dense layer.

Gradients are analytic and exact for this fixed architecture (the max
operations route their full subgradient to the lowest-index winner).
Everything is float64; no autodiff framework is involved.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

CHECKPOINT_FORMAT_VERSION = 1

# Document lengths are divided by this before entering the length feature;
# it equals the training-time truncation window.
LENGTH_SCALE = 10000.0

LOSS_CLAMP = 1e-12

MODEL_KINDS = ("mvc-lda", "mvc-rlda")


class NumericalError(RuntimeError):
    """Non-finite value encountered during forward/backward computation."""


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ModelConfig:
    kind: str = "mvc-lda"
    kernel_sizes: tuple[int, ...] = (6, 8, 10, 12)
    n_filters: int = 90
    embed_dim: int = 100
    lambda_: float = 0.0005
    attention_softmax: bool = False
    use_length: bool = True
    length_scale: float = LENGTH_SCALE
    freeze_embeddings: bool = False
    freeze_desc_encoder: bool = False

    def validate(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        ks = tuple(self.kernel_sizes)
        if not ks or any(s < 1 for s in ks):
            raise ValueError("kernel sizes must be positive")
        if list(ks) != sorted(ks):
            raise ValueError("kernel sizes must be ascending")
        if len(ks) == 4 and any(b - a != 2 for a, b in zip(ks, ks[1:])):
            raise ValueError("four-channel kernel sizes must step by 2")
        if self.lambda_ < 0:
            raise ValueError("regularization weight must be >= 0")
        if self.n_filters < 1 or self.embed_dim < 1:
            raise ValueError("filter count and embedding dim must be positive")


@dataclass
class ModelParams:
    config: ModelConfig
    W_e: np.ndarray                 # d_v x d_e
    conv: list[np.ndarray]          # per channel: s_i x d_e x d_c
    V: np.ndarray                   # n_labels x d_c, attention weights
    U: np.ndarray                   # n_labels x d_c, output weights
    b: np.ndarray                   # n_labels
    K: np.ndarray                   # n_labels, length-feature weight
    d: np.ndarray                   # n_labels, length-feature bias
    desc_conv: np.ndarray | None = None   # s_max x d_e x d_c
    desc_W: np.ndarray | None = None      # d_c x d_c
    desc_b: np.ndarray | None = None      # d_c

    @property
    def vocab_size(self) -> int:
        return self.W_e.shape[0]

    @property
    def n_labels(self) -> int:
        return self.V.shape[0]

    def tensors(self):
        """(name, array) pairs in the fixed serialization order."""
        yield "W_e", self.W_e
        for i, w in enumerate(self.conv):
            yield f"conv{i}", w
        yield "V", self.V
        yield "U", self.U
        yield "b", self.b
        yield "K", self.K
        yield "d", self.d
        if self.config.kind == "mvc-rlda":
            yield "desc_conv", self.desc_conv
            yield "desc_W", self.desc_W
            yield "desc_b", self.desc_b

    def copy(self) -> "ModelParams":
        return ModelParams(
            config=self.config,
            W_e=self.W_e.copy(),
            conv=[w.copy() for w in self.conv],
            V=self.V.copy(), U=self.U.copy(), b=self.b.copy(),
            K=self.K.copy(), d=self.d.copy(),
            desc_conv=None if self.desc_conv is None else self.desc_conv.copy(),
            desc_W=None if self.desc_W is None else self.desc_W.copy(),
            desc_b=None if self.desc_b is None else self.desc_b.copy(),
        )


class GradientSet:
    """Per-tensor gradients, shape-congruent with ModelParams."""

    def __init__(self, data: dict[str, np.ndarray]):
        self.data = data

    @classmethod
    def zeros_like(cls, params: ModelParams) -> "GradientSet":
        return cls({name: np.zeros_like(arr) for name, arr in params.tensors()})

    def __getitem__(self, name: str) -> np.ndarray:
        return self.data[name]

    def __setitem__(self, name: str, value: np.ndarray) -> None:
        self.data[name] = value

    def add_(self, other: "GradientSet") -> None:
        for name, arr in other.data.items():
            self.data[name] += arr

    def scale_(self, factor: float) -> None:
        for arr in self.data.values():
            arr *= factor

    def check_finite(self) -> None:
        for name, arr in self.data.items():
            if not np.all(np.isfinite(arr)):
                raise NumericalError(f"non-finite gradient in tensor {name!r}")


def _glorot(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_params(
    cfg: ModelConfig,
    vocab_size: int,
    n_labels: int,
    rng,
    embeddings: np.ndarray | None = None,
) -> ModelParams:
    """Variance-preserving initialization; biases and length weights start
    at zero. `embeddings` supplies pretrained W_e (copied, then fine-tuned
    during training unless frozen)."""
    cfg.validate()
    d_e, d_c = cfg.embed_dim, cfg.n_filters
    if embeddings is not None:
        if embeddings.shape != (vocab_size, d_e):
            raise ValueError(
                f"embedding table shape {embeddings.shape} does not match "
                f"(vocab {vocab_size}, dim {d_e})"
            )
        W_e = embeddings.astype(np.float64).copy()
    else:
        W_e = (rng.random((vocab_size, d_e)) - 0.5) / d_e
    conv = [
        _glorot(rng, (s, d_e, d_c), s * d_e, s * d_c) for s in cfg.kernel_sizes
    ]
    V = _glorot(rng, (n_labels, d_c), d_c, 1)
    U = _glorot(rng, (n_labels, d_c), d_c, 1)
    b = np.zeros(n_labels)
    K = np.zeros(n_labels)
    d = np.zeros(n_labels)
    desc_conv = desc_W = desc_b = None
    if cfg.kind == "mvc-rlda":
        s_max = max(cfg.kernel_sizes)
        desc_conv = _glorot(rng, (s_max, d_e, d_c), s_max * d_e, s_max * d_c)
        desc_W = _glorot(rng, (d_c, d_c), d_c, d_c)
        desc_b = np.zeros(d_c)
    return ModelParams(cfg, W_e, conv, V, U, b, K, d, desc_conv, desc_W, desc_b)


# ---------------------------------------------------------------------------
# Dropout
# ---------------------------------------------------------------------------

@dataclass
class DropoutMasks:
    """Keep-masks for one forward/backward pair (inverted dropout).

    Rows of the embedded input are dropped whole; pooled features are
    dropped elementwise.
    """

    x_keep: np.ndarray      # (l,) bool
    p_keep: np.ndarray      # (n_labels, d_c) bool
    rate: float


def make_dropout_masks(rng, l: int, n_labels: int, d_c: int, rate: float) -> DropoutMasks | None:
    if rate <= 0.0:
        return None
    if not 0.0 < rate < 1.0:
        raise ValueError("dropout rate must lie in [0, 1)")
    return DropoutMasks(
        x_keep=rng.random(l) >= rate,
        p_keep=rng.random((n_labels, d_c)) >= rate,
        rate=rate,
    )


# ---------------------------------------------------------------------------
# Layer operations
# ---------------------------------------------------------------------------

def _pad_amounts(s: int) -> tuple[int, int]:
    # length-preserving zero padding; even kernels get one extra on the left
    return s // 2, (s - 1) // 2


def _pad(X: np.ndarray, s: int) -> np.ndarray:
    left, right = _pad_amounts(s)
    if left == 0 and right == 0:
        return X
    return np.concatenate(
        [np.zeros((left, X.shape[1])), X, np.zeros((right, X.shape[1]))], axis=0
    )


def _conv_windows(Xp: np.ndarray, s: int) -> np.ndarray:
    # (l, s*d_e) row-major over (offset, embedding-dim)
    win = np.lib.stride_tricks.sliding_window_view(Xp, s, axis=0)
    win = win.transpose(0, 2, 1)
    return win.reshape(win.shape[0], -1)


def _conv_channel(X: np.ndarray, W: np.ndarray) -> np.ndarray:
    s, d_e, d_c = W.shape
    if X.shape[0] == 0:
        return np.zeros((0, d_c))
    return _conv_windows(_pad(X, s), s) @ W.reshape(s * d_e, d_c)


def multi_view_conv(X: np.ndarray, channel_weights) -> np.ndarray:
    """tanh of the elementwise cross-channel max of length-preserving
    zero-padded convolutions; output has one row per input row."""
    weights = list(channel_weights)
    if not weights:
        raise ValueError("at least one convolution channel is required")
    d_e = weights[0].shape[1]
    if X.ndim != 2 or X.shape[1] != d_e:
        raise ValueError(f"input width {X.shape} does not match kernels (d_e={d_e})")
    if any(w.shape[1] != d_e or w.shape[2] != weights[0].shape[2] for w in weights):
        raise ValueError("channel weight shapes are inconsistent")
    stack = np.stack([_conv_channel(X, w) for w in weights])
    return np.tanh(stack.max(axis=0))


def attention_pool(C: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Pool convolution frames with their own linear attention scores:
    P = C^T (C v). Scores are used unnormalized."""
    if C.shape[0] == 0:
        raise ValueError("cannot pool an empty frame sequence")
    return C.T @ (C @ v)


def length_embed(length: int, K_j: float, d_j: float, scale: float = LENGTH_SCALE) -> float:
    """Per-label scalar length feature: sigmoid(K * length/scale + d)."""
    if length < 0:
        raise ValueError("length must be >= 0")
    return float(sigmoid(K_j * (length / scale) + d_j))


def _softmax_columns(A: np.ndarray) -> np.ndarray:
    shifted = A - A.max(axis=0, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=0, keepdims=True)


def _forward_cached(token_ids, length: int, params: ModelParams, masks: DropoutMasks | None):
    cfg = params.config
    ids = np.asarray(token_ids, dtype=np.int64)
    if len(ids) == 0:
        raise ValueError("cannot run the model on a zero-length document")
    if ids.min() < 0 or ids.max() >= params.vocab_size:
        raise ValueError("token id out of range for the embedding table")

    X = params.W_e[ids]
    if masks is not None:
        x_scale = masks.x_keep / (1.0 - masks.rate)
        Xd = X * x_scale[:, None]
    else:
        x_scale = None
        Xd = X

    stack = np.stack([_conv_channel(Xd, w) for w in params.conv])
    winner = stack.argmax(axis=0)
    M = np.take_along_axis(stack, winner[None], axis=0)[0]
    C = np.tanh(M)

    A = C @ params.V.T                        # (l, J) attention scores
    if cfg.attention_softmax:
        S = _softmax_columns(A)
        P_pre = S.T @ C
    else:
        S = None
        P_pre = A.T @ C

    if masks is not None:
        p_scale = masks.p_keep / (1.0 - masks.rate)
        P = P_pre * p_scale
    else:
        p_scale = None
        P = P_pre

    logits = np.sum(params.U * P, axis=1) + params.b
    if cfg.use_length:
        lt = length / cfg.length_scale
        T = sigmoid(params.K * lt + params.d)
        logits = logits + T
    else:
        lt = 0.0
        T = None
    y = sigmoid(logits)
    if not np.all(np.isfinite(y)):
        raise NumericalError("non-finite model output")
    cache = {
        "ids": ids, "X": X, "Xd": Xd, "x_scale": x_scale, "winner": winner,
        "C": C, "A": A, "S": S, "P_pre": P_pre, "P": P, "p_scale": p_scale,
        "T": T, "lt": lt, "y": y,
    }
    return y, cache


def forward(token_ids, length: int, params: ModelParams, masks: DropoutMasks | None = None) -> np.ndarray:
    """Per-label presence probabilities for one document.

    `length` is the untruncated token count (feeds the length feature);
    `masks` enables training-mode dropout, eval mode passes None.
    """
    y, _ = _forward_cached(token_ids, length, params, masks)
    return y


def _encode_description_cached(desc_ids, params: ModelParams):
    ids = np.asarray(desc_ids, dtype=np.int64)
    if len(ids) == 0:
        raise ValueError("cannot encode an empty description")
    Xd = params.W_e[ids]
    Zd = _conv_channel(Xd, params.desc_conv)
    amax = Zd.argmax(axis=0)
    m = Zd[amax, np.arange(Zd.shape[1])]
    pre = params.desc_W @ m + params.desc_b
    f = sigmoid(pre)
    return f, {"ids": ids, "Xd": Xd, "amax": amax, "m": m, "f": f}


def encode_description(desc_ids, params: ModelParams) -> np.ndarray:
    """Map a description token sequence into (0,1)^{d_c}: tied embedding,
    largest-kernel convolution, spatial max pool, sigmoid dense layer."""
    if params.config.kind != "mvc-rlda":
        raise ValueError("description encoder exists only for mvc-rlda parameters")
    f, _ = _encode_description_cached(desc_ids, params)
    return f


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------

def loss_mvc_lda(y: np.ndarray, gold: np.ndarray) -> float:
    """Per-sample loss: binary cross entropy summed over labels.

    Outputs are clamped into [1e-12, 1-1e-12] inside the loss only.
    """
    yc = np.clip(y, LOSS_CLAMP, 1.0 - LOSS_CLAMP)
    g = np.asarray(gold, dtype=np.float64)
    return float(-np.sum(g * np.log(yc) + (1.0 - g) * np.log(1.0 - yc)))


def regularization_term(params: ModelParams, gold: np.ndarray, desc_ids_list) -> float:
    total = 0.0
    for j in np.flatnonzero(np.asarray(gold) > 0):
        f, _ = _encode_description_cached(desc_ids_list[j], params)
        diff = params.V[j] - f
        total += params.config.lambda_ * float(diff @ diff)
    return total


def loss_mvc_rlda(y: np.ndarray, gold: np.ndarray, params: ModelParams, desc_ids_list) -> float:
    """MVC-LDA loss plus the attention regularizer, active only for labels
    present in the gold standard."""
    if params.config.kind != "mvc-rlda":
        raise ValueError("regularized loss needs mvc-rlda parameters")
    return loss_mvc_lda(y, gold) + regularization_term(params, gold, desc_ids_list)


def sample_loss(y, gold, params: ModelParams, desc_ids_list=None) -> float:
    if params.config.kind == "mvc-rlda":
        if desc_ids_list is None:
            raise ValueError("mvc-rlda loss requires encoded label descriptions")
        return loss_mvc_rlda(y, gold, params, desc_ids_list)
    return loss_mvc_lda(y, gold)


# ---------------------------------------------------------------------------
# Backward
# ---------------------------------------------------------------------------

def _conv_backward(Xd: np.ndarray, W: np.ndarray, dZ: np.ndarray):
    s, d_e, d_c = W.shape
    l = Xd.shape[0]
    Xp = _pad(Xd, s)
    win = _conv_windows(Xp, s)
    dW = (win.T @ dZ).reshape(s, d_e, d_c)
    dXp = np.zeros_like(Xp)
    for a in range(s):
        dXp[a : a + l] += dZ @ W[a].T
    left, _ = _pad_amounts(s)
    return dW, dXp[left : left + l]


def backward(
    token_ids,
    length: int,
    gold: np.ndarray,
    params: ModelParams,
    masks: DropoutMasks | None = None,
    desc_ids_list=None,
) -> tuple[float, GradientSet]:
    """Per-sample loss and analytic gradients for every trainable tensor.

    The dropout masks are fixed for the forward/backward pair. For
    mvc-rlda, `desc_ids_list` holds the encoded description of every label.
    """
    cfg = params.config
    y, cache = _forward_cached(token_ids, length, params, masks)
    g = np.asarray(gold, dtype=np.float64)
    loss = sample_loss(y, g, params, desc_ids_list)
    if not np.isfinite(loss):
        raise NumericalError("non-finite loss")

    grads = GradientSet.zeros_like(params)
    C, A, S = cache["C"], cache["A"], cache["S"]
    P, P_pre = cache["P"], cache["P_pre"]

    dlogits = y - g                                  # (J,)
    grads["U"][:] = dlogits[:, None] * P
    grads["b"][:] = dlogits
    dP = dlogits[:, None] * params.U
    if cfg.use_length:
        T = cache["T"]
        dz = dlogits * T * (1.0 - T)
        grads["K"][:] = dz * cache["lt"]
        grads["d"][:] = dz

    dP_pre = dP if cache["p_scale"] is None else dP * cache["p_scale"]

    if cfg.attention_softmax:
        dS = C @ dP_pre.T                            # (l, J)
        dA = S * (dS - np.sum(S * dS, axis=0, keepdims=True))
        dC = S @ dP_pre + dA @ params.V
        grads["V"][:] = dA.T @ C
    else:
        dC = A @ dP_pre + (C @ dP_pre.T) @ params.V
        grads["V"][:] = dP_pre @ (C.T @ C)

    # attention regularizer and description encoder
    if cfg.kind == "mvc-rlda" and cfg.lambda_ > 0.0:
        if desc_ids_list is None:
            raise ValueError("mvc-rlda backward requires encoded label descriptions")
        for j in np.flatnonzero(g > 0):
            f, dcache = _encode_description_cached(desc_ids_list[j], params)
            diff = params.V[j] - f
            grads["V"][j] += 2.0 * cfg.lambda_ * diff
            if cfg.freeze_desc_encoder:
                continue
            df = -2.0 * cfg.lambda_ * diff
            dpre = df * f * (1.0 - f)
            grads["desc_W"] += np.outer(dpre, dcache["m"])
            grads["desc_b"] += dpre
            dm = params.desc_W.T @ dpre
            dZd = np.zeros((dcache["Xd"].shape[0], params.desc_conv.shape[2]))
            dZd[dcache["amax"], np.arange(dZd.shape[1])] = dm
            dWc, dXdesc = _conv_backward(dcache["Xd"], params.desc_conv, dZd)
            grads["desc_conv"] += dWc
            if not cfg.freeze_embeddings:
                np.add.at(grads["W_e"], dcache["ids"], dXdesc)

    dM = dC * (1.0 - C * C)
    dXd = np.zeros_like(cache["Xd"])
    winner = cache["winner"]
    for i, W in enumerate(params.conv):
        dZ = np.where(winner == i, dM, 0.0)
        dW, dX_part = _conv_backward(cache["Xd"], W, dZ)
        grads[f"conv{i}"] += dW
        dXd += dX_part

    dX = dXd if cache["x_scale"] is None else dXd * cache["x_scale"][:, None]
    if not cfg.freeze_embeddings:
        np.add.at(grads["W_e"], cache["ids"], dX)

    grads.check_finite()
    return loss, grads


def predict_matrix(params: ModelParams, docs) -> np.ndarray:
    """Eval-mode score matrix (n_docs x n_labels) for encoded documents."""
    out = np.zeros((len(docs), params.n_labels))
    for i, doc in enumerate(docs):
        out[i] = forward(doc.token_ids, doc.length, params)
    return out


# ---------------------------------------------------------------------------
# Checkpoint serialization
# ---------------------------------------------------------------------------

def save_checkpoint(path, params: ModelParams, vocab_checksum: str) -> None:
    """One JSON header line, then every tensor as little-endian float64 in
    the fixed `tensors()` order. Round-trips bit-exactly."""
    cfg = params.config
    names_shapes = [[name, list(arr.shape)] for name, arr in params.tensors()]
    header = {
        "format": "mvclda.checkpoint",
        "version": CHECKPOINT_FORMAT_VERSION,
        "kind": cfg.kind,
        "vocab_size": params.vocab_size,
        "embed_dim": cfg.embed_dim,
        "n_filters": cfg.n_filters,
        "n_labels": params.n_labels,
        "kernel_sizes": list(cfg.kernel_sizes),
        "lambda": cfg.lambda_,
        "attention_softmax": cfg.attention_softmax,
        "use_length": cfg.use_length,
        "length_scale": cfg.length_scale,
        "vocab_sha256": vocab_checksum,
        "tensors": names_shapes,
    }
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode("utf-8"))
        for _name, arr in params.tensors():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[ModelParams, dict]:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        if header.get("format") != "mvclda.checkpoint":
            raise ValueError(f"{path}: not a checkpoint file")
        if header.get("version") != CHECKPOINT_FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version")
        cfg = ModelConfig(
            kind=header["kind"],
            kernel_sizes=tuple(header["kernel_sizes"]),
            n_filters=header["n_filters"],
            embed_dim=header["embed_dim"],
            lambda_=header["lambda"],
            attention_softmax=header["attention_softmax"],
            use_length=header["use_length"],
            length_scale=header["length_scale"],
        )
        arrays = {}
        for name, shape in header["tensors"]:
            n = int(np.prod(shape)) if shape else 1
            buf = fh.read(8 * n)
            if len(buf) != 8 * n:
                raise ValueError(f"{path}: truncated tensor {name!r}")
            arrays[name] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
    conv = [arrays[f"conv{i}"] for i in range(len(cfg.kernel_sizes))]
    params = ModelParams(
        config=cfg,
        W_e=arrays["W_e"], conv=conv,
        V=arrays["V"], U=arrays["U"], b=arrays["b"],
        K=arrays["K"], d=arrays["d"],
        desc_conv=arrays.get("desc_conv"),
        desc_W=arrays.get("desc_W"),
        desc_b=arrays.get("desc_b"),
    )
    return params, header
