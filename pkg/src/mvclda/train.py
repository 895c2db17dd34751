"""Training regimen: Adam, batches of 4, random 10,000-word truncation,
dropout, early stopping on dev micro F1, and the component-ablation harness.

Runs are bitwise reproducible under a fixed seed: shuffling, truncation
offsets, and dropout masks all derive from (seed, epoch, document index),
so results do not depend on batch composition or worker scheduling.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .metrics import binarize, compare_reports, evaluate_predictions, micro_f1
from .model import (
    GradientSet,
    ModelConfig,
    ModelParams,
    NumericalError,
    backward,
    init_params,
    make_dropout_masks,
    predict_matrix,
)

ABLATION_COMPONENTS = ("regularization", "multi_view", "length_embedding", "extra_notes")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 4
    max_segment: int = 10_000
    patience: int = 10
    max_epochs: int = 100
    dropout: float = 0.2
    seed: int = 0

    def validate(self) -> None:
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.max_segment < 1:
            raise ValueError("max segment must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")


def truncate_segment(token_ids: np.ndarray, max_segment: int, rng) -> np.ndarray:
    """Identity for short documents; otherwise a uniformly random contiguous
    window of exactly `max_segment` tokens."""
    if max_segment < 1:
        raise ValueError("max segment must be >= 1")
    if len(token_ids) <= max_segment:
        return token_ids
    offset = int(rng.integers(0, len(token_ids) - max_segment + 1))
    return token_ids[offset : offset + max_segment]


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def for_params(cls, params: ModelParams) -> "AdamState":
        return cls(
            m={name: np.zeros_like(a) for name, a in params.tensors()},
            v={name: np.zeros_like(a) for name, a in params.tensors()},
        )


def adam_step(params: ModelParams, grads: GradientSet, state: AdamState, cfg: TrainConfig) -> None:
    """Bias-corrected Adam update, applied in place."""
    state.t += 1
    bc1 = 1.0 - cfg.beta1 ** state.t
    bc2 = 1.0 - cfg.beta2 ** state.t
    for name, arr in params.tensors():
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient in tensor {name!r}")
        m, v = state.m[name], state.v[name]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * g * g
        arr -= cfg.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + cfg.epsilon)


class EarlyStopper:
    """Strict-improvement tracker: stop once `patience` consecutive epochs
    pass without a new best score (ties keep the earlier best)."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best_score = -math.inf
        self.best_epoch = 0
        self.stale = 0

    def update(self, epoch: int, score: float) -> bool:
        if score > self.best_score:
            self.best_score = score
            self.best_epoch = epoch
            self.stale = 0
        else:
            self.stale += 1
        return self.stale >= self.patience


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    dev_micro_f1: float
    wall_time_s: float


@dataclass
class TrainHistory:
    epochs: list[EpochStats] = field(default_factory=list)
    best_epoch: int = 0

    @property
    def best_dev_micro_f1(self) -> float:
        return self.epochs[self.best_epoch - 1].dev_micro_f1

    def to_jsonl(self) -> str:
        lines = []
        for e in self.epochs:
            lines.append(
                json.dumps(
                    {
                        "epoch": e.epoch,
                        "train_loss": e.train_loss,
                        "dev_micro_f1": e.dev_micro_f1,
                        "wall_time_s": e.wall_time_s,
                        "best": e.epoch == self.best_epoch,
                    },
                    sort_keys=True,
                )
            )
        return "\n".join(lines) + "\n"


def gold_matrix(docs) -> np.ndarray:
    return np.stack([doc.gold for doc in docs])


def dev_micro_f1(params: ModelParams, docs) -> float:
    scores = predict_matrix(params, docs)
    return micro_f1(binarize(scores), gold_matrix(docs))


def train(
    params: ModelParams,
    train_docs,
    dev_docs,
    desc_ids_list,
    cfg: TrainConfig,
) -> tuple[ModelParams, TrainHistory]:
    """Optimize a (copied) parameter set; returns the parameters of the epoch
    with the best dev micro F1 together with the per-epoch history.

    `desc_ids_list` holds each label's encoded description (required for
    mvc-rlda, ignored for mvc-lda).
    """
    cfg.validate()
    if not train_docs or not dev_docs:
        raise ValueError("training and development sets must be non-empty")
    params = params.copy()
    n_labels = params.n_labels
    d_c = params.config.n_filters
    state = AdamState.for_params(params)
    stopper = EarlyStopper(cfg.patience)
    history = TrainHistory()
    best_params = params.copy()

    for epoch in range(1, cfg.max_epochs + 1):
        started = time.perf_counter()
        order = np.random.default_rng([cfg.seed, epoch]).permutation(len(train_docs))
        epoch_loss = 0.0
        for batch_idx, start in enumerate(range(0, len(order), cfg.batch_size)):
            batch = order[start : start + cfg.batch_size]
            accum = GradientSet.zeros_like(params)
            batch_loss = 0.0
            try:
                for di in batch:
                    doc = train_docs[int(di)]
                    srng = np.random.default_rng([cfg.seed, epoch, int(di)])
                    ids = truncate_segment(doc.token_ids, cfg.max_segment, srng)
                    masks = make_dropout_masks(srng, len(ids), n_labels, d_c, cfg.dropout)
                    loss, grads = backward(
                        ids, doc.length, doc.gold, params,
                        masks=masks, desc_ids_list=desc_ids_list,
                    )
                    accum.add_(grads)
                    batch_loss += loss
                accum.scale_(1.0 / len(batch))
                adam_step(params, accum, state, cfg)
            except NumericalError as exc:
                raise NumericalError(
                    f"training diverged at epoch {epoch}, batch {batch_idx}: {exc}"
                ) from exc
            epoch_loss += batch_loss
        epoch_loss /= len(train_docs)

        f1 = dev_micro_f1(params, dev_docs)
        stop = stopper.update(epoch, f1)
        if stopper.best_epoch == epoch:
            best_params = params.copy()
        history.epochs.append(
            EpochStats(epoch, epoch_loss, f1, time.perf_counter() - started)
        )
        history.best_epoch = stopper.best_epoch
        if stop:
            break
    return best_params, history


# ---------------------------------------------------------------------------
# Ablation harness
# ---------------------------------------------------------------------------

def reduce_document(doc):
    """Reduced-text variant of a document: its first ceil(l/2) tokens."""
    keep = max(1, (doc.length + 1) // 2)
    from .corpus import EncodedDocument

    return EncodedDocument(doc.token_ids[:keep], keep, doc.gold, doc_id=doc.doc_id)


def _variant_config(base: ModelConfig, component: str) -> ModelConfig:
    if component == "regularization":
        return replace(base, lambda_=0.0)
    if component == "multi_view":
        return replace(base, kernel_sizes=(max(base.kernel_sizes),))
    if component == "length_embedding":
        return replace(base, use_length=False)
    if component == "extra_notes":
        return base
    raise ValueError(f"unknown ablation component {component!r}")


def ablate(
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    train_docs,
    dev_docs,
    eval_docs,
    desc_ids_list,
    components,
    *,
    vocab_size: int,
    p_at: int = 8,
    embeddings: np.ndarray | None = None,
    embeddings_reduced: np.ndarray | None = None,
) -> dict:
    """Train the full model plus one model per named component with that
    component removed, and report metric deltas (full minus ablated) on the
    evaluation set, recomputed from raw predictions by compare_reports.

    Components: regularization (lambda=0), multi_view (single channel with
    the largest kernel), length_embedding (length feature removed from the
    output layer), extra_notes (first half of every document's tokens, a
    reduced-text corpus stand-in).
    """
    components = list(components)
    for c in components:
        if c not in ABLATION_COMPONENTS:
            raise ValueError(f"unknown ablation component {c!r}")
    n_labels = len(train_docs[0].gold)

    def run(cfg: ModelConfig, tr, dv, ev, emb):
        params0 = init_params(
            cfg, vocab_size, n_labels, np.random.default_rng(train_cfg.seed),
            embeddings=emb,
        )
        best, history = train(params0, tr, dv, desc_ids_list, train_cfg)
        scores = predict_matrix(best, ev)
        report = evaluate_predictions(scores, gold_matrix(ev), p_at=(p_at,))
        return report, history

    full_report, full_history = run(model_cfg, train_docs, dev_docs, eval_docs, embeddings)

    def summarize(report, history):
        return {
            "best_dev_micro_f1": history.best_dev_micro_f1,
            "micro_f1": report.micro_f1,
            "pr_auc": report.pr_auc,
            "p_at": report.p_at,
        }

    result = {
        "format_version": 1,
        "p_at": p_at,
        "full": summarize(full_report, full_history),
        "ablations": {},
    }
    for component in components:
        cfg_v = _variant_config(model_cfg, component)
        if component == "extra_notes":
            tr = [reduce_document(d) for d in train_docs]
            dv = [reduce_document(d) for d in dev_docs]
            ev = [reduce_document(d) for d in eval_docs]
            emb = embeddings_reduced if embeddings_reduced is not None else embeddings
        else:
            tr, dv, ev, emb = train_docs, dev_docs, eval_docs, embeddings
        report, history = run(cfg_v, tr, dv, ev, emb)
        # compare_reports returns (full - ablated): positive means the
        # component helps
        delta = compare_reports(report, full_report)
        entry = summarize(report, history)
        entry["delta"] = {
            "micro_f1": delta["micro_f1"],
            "pr_auc": delta["pr_auc"],
            "p_at": delta["p_at"],
            "dev_micro_f1": result["full"]["best_dev_micro_f1"] - history.best_dev_micro_f1,
        }
        result["ablations"][component] = entry
    return result
