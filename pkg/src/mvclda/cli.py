"""Command-line pipelines: corpus synthesis, model training, evaluation,
hyperparameter search, ablation, and linear baselines.

One binary, subcommand style; every command writes its outputs as files
plus a manifest sufficient to reproduce the run. Exit codes: 0 success,
1 usage error, 2 data error, 3 numerical error. Any config-file key can be
overridden with an environment variable `MVC_<KEY>` (upper-cased key).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, baseline, corpus, embed, hyperband as hb, metrics, model, train as train_mod

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

ENV_PREFIX = "MVC_"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_int_list(text: str) -> tuple[int, ...]:
    return tuple(int(p) for p in text.split(",") if p.strip())


def _parse_float_list(text: str) -> tuple[float, ...]:
    return tuple(float(p) for p in text.split(",") if p.strip())


TRAIN_SCHEMA = {
    "learning_rate": float,
    "beta1": float,
    "beta2": float,
    "epsilon": float,
    "batch_size": int,
    "max_segment": int,
    "patience": int,
    "max_epochs": int,
    "dropout": float,
    "lambda": float,
    "kernel_sizes": _parse_int_list,
    "n_filters": int,
    "embed_dim": int,
    "attention_softmax": _parse_bool,
    "use_length": _parse_bool,
    "freeze_embeddings": _parse_bool,
    "freeze_desc_encoder": _parse_bool,
    "length_scale": float,
    "min_doc_freq": int,
    "cbow_window": int,
    "cbow_epochs": int,
    "cbow_negative": int,
}

SYNTH_SCHEMA = {
    "n_codes": int,
    "zipf_exponent": float,
    "n_train": int,
    "n_dev": int,
    "n_test": int,
    "background_vocab": int,
    "evidence_len_min": int,
    "evidence_len_max": int,
    "doc_len_min": int,
    "doc_len_max": int,
    "coupling": float,
    "seed": int,
}

HYPERBAND_SCHEMA = dict(
    TRAIN_SCHEMA,
    **{
        "s0_min": int,
        "s0_max": int,
        "dc_min": int,
        "dc_max": int,
        "lambda_candidates": _parse_float_list,
    },
)

BASELINE_SCHEMA = {
    "max_features": int,
    "svm_epochs": int,
    "svm_reg": float,
    "min_doc_freq": int,
}


def parse_kv_config(text: str, schema: dict, source: str = "<config>") -> dict:
    """Flat `key = value` lines; blank lines and '#' comments are allowed;
    keys outside the schema are rejected."""
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise corpus.DataFormatError(f"{source}:{lineno}: expected key = value")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in schema:
            raise corpus.DataFormatError(f"{source}:{lineno}: unknown config key {key!r}")
        try:
            values[key] = schema[key](raw)
        except ValueError as exc:
            raise corpus.DataFormatError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from exc
    return values


def _apply_env_overrides(values: dict, schema: dict) -> dict:
    for key, caster in schema.items():
        raw = os.environ.get(ENV_PREFIX + key.upper())
        if raw is not None:
            try:
                values[key] = caster(raw)
            except ValueError as exc:
                raise corpus.DataFormatError(
                    f"environment override {ENV_PREFIX}{key.upper()}: bad value: {exc}"
                ) from exc
    return values


def load_config(path, schema: dict) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        values = parse_kv_config(fh.read(), schema, source=str(path))
    return _apply_env_overrides(values, schema)


def _write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _write_manifest(out_dir: Path, command: str, seed, config: dict, inputs: dict, artifacts: dict) -> Path:
    manifest = {
        "command": command,
        "version": __version__,
        "seed": seed,
        "config": config,
        "inputs": {
            name: {"path": str(p), "sha256": embed.sha256_file(p)}
            for name, p in inputs.items()
        },
        "artifacts": {name: str(p) for name, p in artifacts.items()},
    }
    path = out_dir / "manifest.json"
    _write_json(path, manifest)
    return path


def _train_config_from(values: dict, seed: int) -> train_mod.TrainConfig:
    kw = {}
    for key in ("learning_rate", "beta1", "beta2", "epsilon", "batch_size",
                "max_segment", "patience", "max_epochs", "dropout"):
        if key in values:
            kw[key] = values[key]
    return train_mod.TrainConfig(seed=seed, **kw)


def _model_config_from(values: dict, kind: str) -> model.ModelConfig:
    kw = {"kind": kind}
    mapping = {
        "kernel_sizes": "kernel_sizes",
        "n_filters": "n_filters",
        "embed_dim": "embed_dim",
        "lambda": "lambda_",
        "attention_softmax": "attention_softmax",
        "use_length": "use_length",
        "length_scale": "length_scale",
        "freeze_embeddings": "freeze_embeddings",
        "freeze_desc_encoder": "freeze_desc_encoder",
    }
    for key, attr in mapping.items():
        if key in values:
            kw[attr] = values[key]
    cfg = model.ModelConfig(**kw)
    cfg.validate()
    return cfg


def _cbow_config_from(values: dict, dim: int, seed: int) -> embed.CbowConfig:
    return embed.CbowConfig(
        dim=dim,
        window=values.get("cbow_window", 5),
        epochs=values.get("cbow_epochs", 5),
        negative=values.get("cbow_negative", 5),
        seed=seed,
    )


def _load_label_space(desc_path, hierarchy_path=None) -> corpus.LabelSpace:
    descriptions = corpus.read_descriptions_tsv(desc_path)
    parents = corpus.read_hierarchy_tsv(hierarchy_path) if hierarchy_path else None
    return corpus.make_label_space(descriptions, parents)


def _prepare_training_data(args, values):
    """Shared front half of train/hyperband/ablate: read corpora, build the
    vocabulary from the training split only, encode everything."""
    raw_train = corpus.read_corpus_jsonl(args.train)
    raw_dev = corpus.read_corpus_jsonl(args.dev)
    labels = _load_label_space(args.labels)
    token_docs = [corpus.preprocess_text(d.text) for d in raw_train]
    vocab = corpus.build_vocabulary(token_docs, values.get("min_doc_freq", corpus.MIN_DOC_FREQ))
    train_docs, _ = corpus.encode_corpus(raw_train, vocab, labels)
    dev_docs, _ = corpus.encode_corpus(raw_dev, vocab, labels)
    desc_ids = [vocab.encode(toks) for toks in labels.descriptions]
    return raw_train, labels, vocab, train_docs, dev_docs, desc_ids


def _pretrained_embeddings(args, values, vocab, train_docs, out_dir, seed, artifacts, inputs):
    """Load --embeddings (with vocabulary checksum verification) or pretrain
    CBOW vectors on the encoded training text."""
    vocab_path = out_dir / "vocab.tsv"
    corpus.save_vocabulary(vocab_path, vocab)
    artifacts["vocab"] = vocab_path
    vocab_checksum = embed.sha256_file(vocab_path)
    if getattr(args, "embeddings", None):
        table = embed.load_embeddings(args.embeddings, expected_vocab_checksum=vocab_checksum)
        if table.shape[0] != vocab.size:
            raise ValueError(
                f"embedding rows {table.shape[0]} do not match vocabulary size {vocab.size}"
            )
        inputs["embeddings"] = Path(args.embeddings)
    else:
        cbow_cfg = _cbow_config_from(values, values.get("embed_dim", 100), seed)
        table = embed.train_cbow([d.token_ids for d in train_docs], vocab.size, cbow_cfg)
        emb_path = out_dir / "embeddings.bin"
        embed.save_embeddings(emb_path, table, vocab_checksum)
        artifacts["embeddings"] = emb_path
    return table, vocab_checksum


def _train_counts(train_docs, labels) -> dict[str, int]:
    counts = np.zeros(labels.n_labels, dtype=np.int64)
    for doc in train_docs:
        counts += (doc.gold > 0).astype(np.int64)
    return {code: int(counts[j]) for j, code in enumerate(labels.codes)}


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    values = load_config(args.config, SYNTH_SCHEMA)
    values["seed"] = args.seed
    cfg = corpus.SynthConfig(**values)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    synth = corpus.generate_synthetic_corpus(cfg)
    artifacts = {}
    for split, docs in (("train", synth.train), ("dev", synth.dev), ("test", synth.test)):
        path = out_dir / f"{split}.jsonl"
        corpus.write_corpus_jsonl(path, docs)
        artifacts[split] = path
    desc_path = out_dir / "descriptions.tsv"
    corpus.write_descriptions_tsv(desc_path, synth.labels)
    artifacts["descriptions"] = desc_path
    hier_path = out_dir / "hierarchy.tsv"
    corpus.write_hierarchy_tsv(hier_path, synth.labels.parents or {})
    artifacts["hierarchy"] = hier_path
    groups_path = out_dir / "groups.tsv"
    corpus.write_groups_tsv(groups_path, synth.groups)
    artifacts["groups"] = groups_path
    _write_manifest(out_dir, "synth", args.seed, values, {"config": Path(args.config)}, artifacts)
    print(f"wrote {len(synth.train)}/{len(synth.dev)}/{len(synth.test)} documents to {out_dir}")
    return EXIT_OK


def cmd_train(args) -> int:
    values = load_config(args.config, TRAIN_SCHEMA)
    if args.model == "mvc-lda" and "lambda" in values:
        print("warning: --model mvc-lda ignores the lambda config key", file=sys.stderr)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    raw_train, labels, vocab, train_docs, dev_docs, desc_ids = _prepare_training_data(args, values)
    inputs = {"train": Path(args.train), "dev": Path(args.dev), "labels": Path(args.labels),
              "config": Path(args.config)}
    artifacts: dict = {}
    table, vocab_checksum = _pretrained_embeddings(
        args, values, vocab, train_docs, out_dir, args.seed, artifacts, inputs
    )
    model_cfg = _model_config_from(values, args.model)
    if model_cfg.embed_dim != table.shape[1]:
        model_cfg = replace(model_cfg, embed_dim=table.shape[1])
    train_cfg = _train_config_from(values, args.seed)
    params0 = model.init_params(
        model_cfg, vocab.size, labels.n_labels,
        np.random.default_rng(args.seed), embeddings=table,
    )
    best, history = train_mod.train(params0, train_docs, dev_docs, desc_ids, train_cfg)

    ckpt_path = out_dir / "checkpoint.bin"
    model.save_checkpoint(ckpt_path, best, vocab_checksum)
    artifacts["checkpoint"] = ckpt_path
    hist_path = out_dir / "history.jsonl"
    with open(hist_path, "w", encoding="utf-8") as fh:
        fh.write(history.to_jsonl())
    artifacts["history"] = hist_path
    counts_path = out_dir / "train_counts.tsv"
    corpus.write_counts_tsv(counts_path, _train_counts(train_docs, labels))
    artifacts["train_counts"] = counts_path
    _write_manifest(out_dir, "train", args.seed, values, inputs, artifacts)
    print(
        f"best epoch {history.best_epoch} dev micro F1 {history.best_dev_micro_f1:.5f}; "
        f"checkpoint at {ckpt_path}"
    )
    return EXIT_OK


def cmd_evaluate(args) -> int:
    params, header = model.load_checkpoint(args.checkpoint)
    vocab = corpus.load_vocabulary(args.vocab)
    if embed.sha256_file(args.vocab) != header["vocab_sha256"]:
        raise ValueError(
            "vocabulary file does not match the checkpoint's vocabulary checksum"
        )
    labels = _load_label_space(args.labels)
    if labels.n_labels != header["n_labels"]:
        raise ValueError(
            f"checkpoint was trained for {header['n_labels']} labels, "
            f"label file defines {labels.n_labels}"
        )
    raw_docs = corpus.read_corpus_jsonl(args.test)
    docs, _ = corpus.encode_corpus(raw_docs, vocab, labels)
    scores = model.predict_matrix(params, docs)
    gold = train_mod.gold_matrix(docs)

    groups = None
    if args.groups:
        by_code = corpus.read_groups_tsv(args.groups)
        groups = [by_code.get(code, "none") for code in labels.codes]
    train_counts = None
    if args.train_counts:
        by_code = corpus.read_counts_tsv(args.train_counts)
        train_counts = np.array([by_code.get(code, 0) for code in labels.codes], dtype=np.float64)
    support = gold.sum(axis=0)
    macro_labels = np.flatnonzero(support > 0)
    report = metrics.evaluate_predictions(
        scores, gold,
        p_at=tuple(args.p_at),
        groups=groups,
        train_counts=train_counts,
        macro_labels=macro_labels if macro_labels.size else None,
    )
    out_path = Path(args.metrics_out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
    inputs = {"checkpoint": Path(args.checkpoint), "test": Path(args.test),
              "labels": Path(args.labels), "vocab": Path(args.vocab)}
    if args.groups:
        inputs["groups"] = Path(args.groups)
    if args.train_counts:
        inputs["train_counts"] = Path(args.train_counts)
    _write_manifest(out_path.parent, "evaluate", None, {"p_at": list(args.p_at)}, inputs,
                    {"metrics": out_path})
    print(f"micro F1 {report.micro_f1:.5f}  PR AUC {report.pr_auc:.5f} -> {out_path}")
    return EXIT_OK


def cmd_hyperband(args) -> int:
    values = load_config(args.config, HYPERBAND_SCHEMA)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _, labels, vocab, train_docs, dev_docs, desc_ids = _prepare_training_data(args, values)
    inputs = {"train": Path(args.train), "dev": Path(args.dev), "labels": Path(args.labels),
              "config": Path(args.config)}
    artifacts: dict = {}
    table, _ = _pretrained_embeddings(
        args, values, vocab, train_docs, out_dir, args.seed, artifacts, inputs
    )
    lambdas = values.get("lambda_candidates", hb.LAMBDA_CANDIDATES)
    space = hb.SearchSpace(
        s0_min=values.get("s0_min", 2),
        s0_max=values.get("s0_max", 8),
        dc_min=values.get("dc_min", 30),
        dc_max=values.get("dc_max", 100),
        lambdas=tuple(lambdas) if args.model == "mvc-rlda" else None,
    )
    base_model_cfg = _model_config_from(values, args.model)
    if base_model_cfg.embed_dim != table.shape[1]:
        base_model_cfg = replace(base_model_cfg, embed_dim=table.shape[1])

    def evaluate(trial_cfg: hb.TrialConfig, epochs: int) -> float:
        cfg = replace(
            base_model_cfg,
            kernel_sizes=trial_cfg.kernel_sizes,
            n_filters=trial_cfg.n_filters,
            lambda_=trial_cfg.lambda_ if trial_cfg.lambda_ is not None else base_model_cfg.lambda_,
        )
        tcfg = replace(
            _train_config_from(values, args.seed),
            max_epochs=epochs, patience=max(epochs, 1),
        )
        params0 = model.init_params(
            cfg, vocab.size, labels.n_labels,
            np.random.default_rng(args.seed), embeddings=table,
        )
        _, history = train_mod.train(params0, train_docs, dev_docs, desc_ids, tcfg)
        return max(e.dev_micro_f1 for e in history.epochs)

    best_cfg, best_score, log = hb.hyperband_search(
        space, evaluate, R=args.R, eta=args.eta, seed=args.seed
    )
    schedule = [
        {"s": s, "n": n, "r": r} for s, n, r in hb.bracket_schedule(args.R, args.eta)
    ]
    trials_path = out_dir / "trials.jsonl"
    with open(trials_path, "w", encoding="utf-8") as fh:
        fh.write(hb.trials_to_jsonl(log))
    artifacts["trials"] = trials_path
    best_path = out_dir / "best_config.json"
    _write_json(best_path, {
        "R": args.R, "eta": args.eta, "schedule": schedule,
        "best_config": best_cfg.to_json_obj(), "best_dev_micro_f1": best_score,
    })
    artifacts["best_config"] = best_path
    _write_manifest(out_dir, "hyperband", args.seed,
                    dict(values, R=args.R, eta=args.eta), inputs, artifacts)
    print(f"best dev micro F1 {best_score:.5f} with {best_cfg.to_json_obj()}")
    return EXIT_OK


def cmd_ablate(args) -> int:
    values = load_config(args.config, TRAIN_SCHEMA)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    raw_train, labels, vocab, train_docs, dev_docs, desc_ids = _prepare_training_data(args, values)
    inputs = {"train": Path(args.train), "dev": Path(args.dev), "labels": Path(args.labels),
              "config": Path(args.config)}
    eval_docs = dev_docs
    if args.test:
        raw_eval = corpus.read_corpus_jsonl(args.test)
        eval_docs, _ = corpus.encode_corpus(raw_eval, vocab, labels)
        inputs["test"] = Path(args.test)
    artifacts: dict = {}
    table, _ = _pretrained_embeddings(
        args, values, vocab, train_docs, out_dir, args.seed, artifacts, inputs
    )
    components = (
        list(train_mod.ABLATION_COMPONENTS)
        if args.components == "all"
        else [c.strip() for c in args.components.split(",") if c.strip()]
    )
    table_reduced = None
    if "extra_notes" in components:
        reduced = [train_mod.reduce_document(d) for d in train_docs]
        cbow_cfg = _cbow_config_from(values, table.shape[1], args.seed)
        table_reduced = embed.train_cbow([d.token_ids for d in reduced], vocab.size, cbow_cfg)
    model_cfg = _model_config_from(values, args.model)
    if model_cfg.embed_dim != table.shape[1]:
        model_cfg = replace(model_cfg, embed_dim=table.shape[1])
    report = train_mod.ablate(
        model_cfg, _train_config_from(values, args.seed),
        train_docs, dev_docs, eval_docs, desc_ids, components,
        vocab_size=vocab.size, p_at=args.p_at,
        embeddings=table, embeddings_reduced=table_reduced,
    )
    out_path = out_dir / "ablation.json"
    _write_json(out_path, report)
    artifacts["ablation"] = out_path
    _write_manifest(out_dir, "ablate", args.seed, values, inputs, artifacts)
    for name, entry in report["ablations"].items():
        d = entry["delta"]
        print(
            f"{name}: micro F1 delta {d['micro_f1']:+.5f}  "
            f"PR AUC delta {d['pr_auc']:+.5f}"
        )
    return EXIT_OK


def cmd_baseline(args) -> int:
    values = load_config(args.config, BASELINE_SCHEMA) if args.config else {}
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    raw_train = corpus.read_corpus_jsonl(args.train)
    raw_test = corpus.read_corpus_jsonl(args.test)
    labels = _load_label_space(args.labels, args.hierarchy)
    train_tokens = [corpus.preprocess_text(d.text) for d in raw_train]
    test_tokens = [corpus.preprocess_text(d.text) for d in raw_test]

    def gold_of(raws):
        g = np.zeros((len(raws), labels.n_labels))
        for i, raw in enumerate(raws):
            for code in raw.codes:
                j = labels.code_to_index.get(code)
                if j is not None:
                    g[i, j] = 1.0
        return g

    gold_train, gold_test = gold_of(raw_train), gold_of(raw_test)
    featurizer = baseline.fit_tfidf(train_tokens, values.get("max_features", baseline.MAX_FEATURES))
    X_train = featurizer.transform(train_tokens)
    X_test = featurizer.transform(test_tokens)
    svm_cfg = baseline.SvmConfig(
        epochs=values.get("svm_epochs", 30),
        reg=values.get("svm_reg", 1e-4),
        seed=args.seed,
    )
    inputs = {"train": Path(args.train), "test": Path(args.test), "labels": Path(args.labels)}
    if args.config:
        inputs["config"] = Path(args.config)
    artifacts: dict = {}
    if args.hierarchy:
        inputs["hierarchy"] = Path(args.hierarchy)
        parents = labels.parents or {}
        ovr = baseline.train_hierarchical(X_train, gold_train, labels.codes, parents, svm_cfg)
        pred = baseline.predict_hierarchical(ovr, X_test, labels.codes, parents)
    else:
        ovr = baseline.train_flat(X_train, gold_train, labels.codes, svm_cfg)
        pred = baseline.predict_flat(ovr, X_test)
    model_path = out_dir / "baseline_model.bin"
    baseline.save_baseline(model_path, featurizer, ovr)
    artifacts["model"] = model_path
    report = metrics.evaluate_predictions(
        pred.astype(np.float64), gold_test, p_at=tuple(args.p_at)
    )
    metrics_path = out_dir / "metrics.json"
    with open(metrics_path, "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
    artifacts["metrics"] = metrics_path
    _write_manifest(out_dir, "baseline", args.seed, values, inputs, artifacts)
    print(f"{'hierarchical' if args.hierarchy else 'flat'} baseline micro F1 {report.micro_f1:.5f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument wiring
# ---------------------------------------------------------------------------

def _p_at_list(text: str) -> list[int]:
    try:
        values = [int(p) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError("P@n values must be positive integers")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mvclda", description=__doc__)
    parser.add_argument("--version", action="version", version=f"mvclda {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[], help="generate a seeded synthetic corpus")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train MVC-LDA or MVC-RLDA")
    p.add_argument("--model", choices=model.MODEL_KINDS, required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--labels", required=True, help="descriptions TSV (defines the label space)")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--embeddings", help="pretrained embedding file (else CBOW runs)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a checkpoint on a test set")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--metrics-out", required=True)
    p.add_argument("--p-at", type=_p_at_list, default=[8])
    p.add_argument("--groups", help="optional code<TAB>group TSV for per-group micro F1")
    p.add_argument("--train-counts", help="optional code<TAB>count TSV for binned F1")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("hyperband", help="Hyperband search over kernel sizes, filters, lambda")
    p.add_argument("--model", choices=model.MODEL_KINDS, default="mvc-rlda")
    p.add_argument("--train", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--R", type=int, default=27)
    p.add_argument("--eta", type=int, default=3)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_hyperband)

    p = sub.add_parser("ablate", help="component ablation study")
    p.add_argument("--model", choices=model.MODEL_KINDS, default="mvc-rlda")
    p.add_argument("--train", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--test", help="evaluation split for the deltas (default: dev)")
    p.add_argument("--labels", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--components", default="all",
                   help="comma list of regularization,multi_view,length_embedding,extra_notes")
    p.add_argument("--p-at", type=int, default=8)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("baseline", help="tf-idf one-vs-rest linear baseline")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--hierarchy", help="child<TAB>parent TSV enabling the hierarchical variant")
    p.add_argument("--config")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--p-at", type=_p_at_list, default=[8])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_baseline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except corpus.DataFormatError as exc:
        print(f"mvclda: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except model.NumericalError as exc:
        print(f"mvclda: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError) as exc:
        print(f"mvclda: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
