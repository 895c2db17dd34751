"""Continuous bag-of-words embedding pretraining with negative sampling.

Single-threaded and deterministic: the same corpus and seed reproduce the
table to the last bit. Returns the input-side vectors.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

EMBED_FORMAT_VERSION = 1


@dataclass(frozen=True)
class CbowConfig:
    dim: int = 100
    window: int = 5
    epochs: int = 5
    negative: int = 5
    lr_start: float = 0.025
    lr_end: float = 0.0001
    seed: int = 0

    def validate(self) -> None:
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.negative < 0:
            raise ValueError("negative sample count must be >= 0")
        if self.dim < 1:
            raise ValueError("embedding dimensionality must be >= 1")


def _sigmoid(x):
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _noise_cumulative(docs, vocab_size: int) -> np.ndarray:
    counts = np.zeros(vocab_size, dtype=np.float64)
    for ids in docs:
        if len(ids):
            counts += np.bincount(np.asarray(ids, dtype=np.int64), minlength=vocab_size)
    weights = counts ** 0.75
    total = weights.sum()
    if total == 0.0:
        raise ValueError("corpus contains no tokens")
    return np.cumsum(weights / total)


def _init_tables(vocab_size: int, cfg: CbowConfig, rng) -> tuple[np.ndarray, np.ndarray]:
    w_in = (rng.random((vocab_size, cfg.dim)) - 0.5) / cfg.dim
    # the OOV row (last id) starts at the centroid and then trains normally
    w_in[-1] = w_in.mean(axis=0)
    w_out = np.zeros((vocab_size, cfg.dim))
    return w_in, w_out


def _iter_centers(ids: np.ndarray, window: int):
    l = len(ids)
    for n in range(l):
        lo = max(0, n - window)
        ctx = np.concatenate([ids[lo:n], ids[n + 1 : n + 1 + window]])
        if len(ctx):
            yield n, ctx


def train_cbow_tables(docs, vocab_size: int, cfg: CbowConfig) -> tuple[np.ndarray, np.ndarray]:
    """Train CBOW and return (input, output) tables; the input table is the
    embedding, the output table is needed to evaluate the objective."""
    cfg.validate()
    docs = [np.asarray(d, dtype=np.int64) for d in docs]
    if not docs or all(len(d) == 0 for d in docs):
        raise ValueError("cannot pretrain embeddings on an empty corpus")
    rng = np.random.default_rng(cfg.seed)
    cum = _noise_cumulative(docs, vocab_size)
    w_in, w_out = _init_tables(vocab_size, cfg, rng)

    # single-token documents contribute no context windows
    total = cfg.epochs * sum(len(d) for d in docs if len(d) > 1)
    if total == 0:
        raise ValueError("corpus has no usable context windows")
    processed = 0
    for _epoch in range(cfg.epochs):
        for ids in docs:
            for n, ctx in _iter_centers(ids, cfg.window):
                lr = cfg.lr_start + (cfg.lr_end - cfg.lr_start) * (processed / total)
                processed += 1
                center = ids[n]
                h = w_in[ctx].mean(axis=0)
                negatives = np.searchsorted(cum, rng.random(cfg.negative))
                negatives = negatives[negatives != center]
                targets = np.concatenate(([center], negatives))
                labels = np.zeros(len(targets))
                labels[0] = 1.0
                scores = w_out[targets] @ h
                grad = (_sigmoid(scores) - labels) * lr
                dh = grad @ w_out[targets]
                w_out[targets] -= np.outer(grad, h)
                w_in[ctx] -= dh / len(ctx)
    return w_in, w_out


def train_cbow(docs, vocab_size: int, cfg: CbowConfig) -> np.ndarray:
    """Train CBOW vectors on encoded documents (sequences of token ids).

    Context vectors are averaged to predict the center word against
    `cfg.negative` noise words drawn from the unigram^0.75 distribution;
    the learning rate decays linearly from lr_start to lr_end.
    """
    w_in, _ = train_cbow_tables(docs, vocab_size, cfg)
    return w_in


def cbow_pass_loss(docs, w_in: np.ndarray, w_out: np.ndarray, cfg: CbowConfig, seed: int) -> float:
    """Mean negative-sampling loss over one full pass with seeded noise.

    Evaluates fixed tables; used to confirm that training reduced the
    objective relative to initialization.
    """
    docs = [np.asarray(d, dtype=np.int64) for d in docs]
    rng = np.random.default_rng(seed)
    cum = _noise_cumulative(docs, w_in.shape[0])
    total_loss = 0.0
    n_centers = 0
    for ids in docs:
        for n, ctx in _iter_centers(ids, cfg.window):
            center = ids[n]
            h = w_in[ctx].mean(axis=0)
            negatives = np.searchsorted(cum, rng.random(cfg.negative))
            negatives = negatives[negatives != center]
            pos = float(w_out[center] @ h)
            neg = w_out[negatives] @ h
            eps = 1e-12
            loss = -np.log(max(_sigmoid(np.array([pos]))[0], eps))
            loss -= float(np.sum(np.log(np.maximum(_sigmoid(-neg), eps))))
            total_loss += loss
            n_centers += 1
    if n_centers == 0:
        raise ValueError("corpus has no usable context windows")
    return total_loss / n_centers


def initial_tables(docs, vocab_size: int, cfg: CbowConfig) -> tuple[np.ndarray, np.ndarray]:
    """The exact initialization train_cbow starts from (for objective checks)."""
    rng = np.random.default_rng(cfg.seed)
    return _init_tables(vocab_size, cfg, rng)


def embed_lookup(token_ids, table: np.ndarray) -> np.ndarray:
    """Row-lookup of a document's token ids; output has one row per token."""
    ids = np.asarray(token_ids, dtype=np.int64)
    if len(ids) == 0:
        return np.zeros((0, table.shape[1]))
    if ids.min() < 0 or ids.max() >= table.shape[0]:
        raise ValueError("token id out of range for the embedding table")
    return table[ids]


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def save_embeddings(path, table: np.ndarray, vocab_checksum: str) -> None:
    """Binary table: one header line, then little-endian float64 rows.

    A sidecar `<path>.vocab.sha256` pins the vocabulary file the table was
    trained against.
    """
    table = np.ascontiguousarray(table, dtype="<f8")
    with open(path, "wb") as fh:
        header = f"#emb\tversion={EMBED_FORMAT_VERSION}\td_v={table.shape[0]}\td_e={table.shape[1]}\n"
        fh.write(header.encode("utf-8"))
        fh.write(table.tobytes())
    with open(str(path) + ".vocab.sha256", "w", encoding="utf-8") as fh:
        fh.write(vocab_checksum + "\n")


def load_embeddings(path, expected_vocab_checksum: str | None = None) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.readline().decode("utf-8").rstrip("\n")
        if not header.startswith("#emb\t"):
            raise ValueError(f"{path}: not an embedding file")
        fields = dict(p.split("=", 1) for p in header.split("\t")[1:])
        if int(fields["version"]) != EMBED_FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported embedding format version")
        d_v, d_e = int(fields["d_v"]), int(fields["d_e"])
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != d_v * d_e:
        raise ValueError(f"{path}: truncated embedding payload")
    if expected_vocab_checksum is not None:
        with open(str(path) + ".vocab.sha256", "r", encoding="utf-8") as fh:
            stored = fh.read().strip()
        if stored != expected_vocab_checksum:
            raise ValueError(
                "embedding table was trained against a different vocabulary "
                f"(checksum {stored[:12]}… != {expected_vocab_checksum[:12]}…)"
            )
    return data.reshape(d_v, d_e).copy()
