"""Text preprocessing, vocabulary construction, dataset encoding, and
seeded synthetic corpus generation.

All operations here are pure given their inputs; randomness is an
explicit seeded stream.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

# Characters stripped from token edges. Internal hyphens/slashes are kept
# so clinical tokens like "x-ray" survive.
PUNCT_EDGE = ".,;:!?\"'()[]{}"

MIN_DOC_FREQ = 3


class DataFormatError(ValueError):
    """Malformed input file (carries a line number where available)."""


def _is_digits_only(token: str) -> bool:
    # ASCII digits only; unicode digit lookalikes are kept.
    return all("0" <= c <= "9" for c in token)


def preprocess_text(raw: str) -> list[str]:
    """Lowercase, split on whitespace, strip edge punctuation, and drop
    tokens made solely of ASCII digits. Empty input gives an empty list."""
    tokens = []
    for piece in raw.lower().split():
        tok = piece.strip(PUNCT_EDGE)
        if not tok:
            continue
        if _is_digits_only(tok):
            continue
        tokens.append(tok)
    return tokens


@dataclass
class RawDocument:
    doc_id: str
    text: str
    codes: set[str]


@dataclass
class Vocabulary:
    """Token/id bijection over retained tokens plus a reserved OOV id.

    Retained tokens are those occurring in at least `min_doc_freq` distinct
    training documents; ids are assigned by descending document frequency
    with lexicographic tie-break, and the OOV id comes last.
    """

    token_to_id: dict[str, int]
    id_to_token: list[str]
    oov_id: int
    doc_freq: dict[str, int]

    @property
    def size(self) -> int:
        """Number of ids including the OOV row."""
        return len(self.id_to_token) + 1

    def encode(self, tokens: list[str]) -> np.ndarray:
        return np.array(
            [self.token_to_id.get(t, self.oov_id) for t in tokens], dtype=np.int64
        )

    def decode(self, ids) -> list[str]:
        out = []
        for i in ids:
            out.append("<oov>" if int(i) == self.oov_id else self.id_to_token[int(i)])
        return out


def build_vocabulary(
    train_docs: list[list[str]], min_doc_freq: int = MIN_DOC_FREQ
) -> Vocabulary:
    """Build a vocabulary from tokenized training documents.

    A token is retained iff it occurs in >= min_doc_freq distinct documents.
    """
    if not train_docs:
        raise ValueError("cannot build a vocabulary from an empty training set")
    df: dict[str, int] = {}
    for doc in train_docs:
        for tok in set(doc):
            df[tok] = df.get(tok, 0) + 1
    retained = sorted(
        (t for t, c in df.items() if c >= min_doc_freq),
        key=lambda t: (-df[t], t),
    )
    token_to_id = {t: i for i, t in enumerate(retained)}
    return Vocabulary(
        token_to_id=token_to_id,
        id_to_token=retained,
        oov_id=len(retained),
        doc_freq={t: df[t] for t in retained},
    )


@dataclass
class LabelSpace:
    """Code/index map plus per-code descriptions and optional hierarchy.

    `parents` maps a code to its parent node name; parent names need not be
    codes of the label space themselves (internal taxonomy nodes).
    """

    codes: list[str]
    code_to_index: dict[str, int]
    descriptions: list[list[str]]
    parents: dict[str, str] | None = None

    def __post_init__(self):
        if len(self.codes) != len(self.descriptions):
            raise ValueError("one description required per code")
        for code, desc in zip(self.codes, self.descriptions):
            if not desc:
                raise ValueError(f"empty description for code {code!r}")
        if self.parents is not None:
            _check_acyclic(self.parents)

    @property
    def n_labels(self) -> int:
        return len(self.codes)

    def ancestors(self, code: str) -> list[str]:
        """Chain of ancestor node names from parent upward (hierarchy only)."""
        if self.parents is None:
            return []
        chain = []
        node = code
        while node in self.parents:
            node = self.parents[node]
            chain.append(node)
        return chain


def _check_acyclic(parents: dict[str, str]) -> None:
    for start in parents:
        seen = {start}
        node = start
        while node in parents:
            node = parents[node]
            if node in seen:
                raise ValueError(f"hierarchy contains a cycle through {node!r}")
            seen.add(node)


def make_label_space(
    descriptions: dict[str, str], parents: dict[str, str] | None = None
) -> LabelSpace:
    """Build a LabelSpace from raw description strings (preprocessed here).

    Codes are indexed in the iteration order of `descriptions`.
    """
    codes = list(descriptions)
    return LabelSpace(
        codes=codes,
        code_to_index={c: i for i, c in enumerate(codes)},
        descriptions=[preprocess_text(descriptions[c]) for c in codes],
        parents=dict(parents) if parents else None,
    )


@dataclass
class EncodedDocument:
    token_ids: np.ndarray
    length: int
    gold: np.ndarray
    doc_id: str = ""

    def __post_init__(self):
        if self.length != len(self.token_ids):
            raise ValueError("length must equal the number of token ids")


def encode_document(
    raw: RawDocument, vocab: Vocabulary, labels: LabelSpace
) -> tuple[EncodedDocument, int]:
    """Encode one document; returns (doc, count of gold codes that were
    dropped because the label space does not contain them)."""
    ids = vocab.encode(preprocess_text(raw.text))
    gold = np.zeros(labels.n_labels, dtype=np.float64)
    dropped = 0
    for code in raw.codes:
        j = labels.code_to_index.get(code)
        if j is None:
            dropped += 1
        else:
            gold[j] = 1.0
    return EncodedDocument(ids, len(ids), gold, doc_id=raw.doc_id), dropped


def encode_corpus(
    raws: list[RawDocument], vocab: Vocabulary, labels: LabelSpace
) -> tuple[list[EncodedDocument], int]:
    docs = []
    dropped = 0
    for raw in raws:
        doc, d = encode_document(raw, vocab, labels)
        docs.append(doc)
        dropped += d
    if dropped:
        logger.warning("dropped %d gold codes absent from the label space", dropped)
    return docs, dropped


# ---------------------------------------------------------------------------
# Synthetic corpus generation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SynthConfig:
    n_codes: int = 20
    zipf_exponent: float = 1.0
    n_train: int = 500
    n_dev: int = 100
    n_test: int = 100
    background_vocab: int = 200
    evidence_len_min: int = 2
    evidence_len_max: int = 6
    doc_len_min: int = 40
    doc_len_max: int = 120
    coupling: float = 0.8
    seed: int = 0

    def validate(self) -> None:
        counts = (
            self.n_codes, self.n_train, self.n_dev, self.n_test,
            self.background_vocab, self.evidence_len_min, self.evidence_len_max,
            self.doc_len_min, self.doc_len_max,
        )
        if any(c <= 0 for c in counts):
            raise ValueError("all synthetic corpus counts must be positive")
        if self.evidence_len_min > self.evidence_len_max:
            raise ValueError("evidence length range is inverted")
        if self.doc_len_min > self.doc_len_max:
            raise ValueError("document length range is inverted")
        if not 0.0 <= self.coupling <= 1.0:
            raise ValueError("coupling strength must lie in [0, 1]")
        if self.evidence_len_max > self.doc_len_min:
            raise ValueError(
                "evidence phrases cannot be placed: evidence_len_max exceeds doc_len_min"
            )


@dataclass
class SyntheticCorpus:
    train: list[RawDocument]
    dev: list[RawDocument]
    test: list[RawDocument]
    labels: LabelSpace
    groups: dict[str, str] = field(default_factory=dict)
    evidence_phrases: dict[str, list[str]] = field(default_factory=dict)


_SYLLABLES = [
    "ba", "re", "mo", "ti", "lu", "sa", "ne", "ko", "da", "pi", "fo", "gu",
]

_DESC_FILLERS = [
    "acute", "chronic", "unspecified", "disorder", "of", "with", "primary",
    "secondary", "syndrome", "recurrent",
]


def _word(index: int) -> str:
    parts = []
    index += 1
    while index:
        parts.append(_SYLLABLES[index % len(_SYLLABLES)])
        index //= len(_SYLLABLES)
    return "".join(reversed(parts))


def generate_synthetic_corpus(cfg: SynthConfig) -> SyntheticCorpus:
    """Generate a deterministic labeled corpus with planted evidence.

    Every code gets a unique evidence phrase; a document positive for a code
    contains that phrase verbatim. Code marginals follow a Zipf law, and the
    number of positive codes per document rises stochastically with document
    length (`coupling` controls the strength).
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)

    bg_words = [_word(i) for i in range(cfg.background_vocab)]
    code_names = [f"{100 + j}.{j % 10}" for j in range(cfg.n_codes)]

    phrases: list[list[str]] = []
    descriptions: dict[str, str] = {}
    next_evidence = cfg.background_vocab
    for j in range(cfg.n_codes):
        length = int(rng.integers(cfg.evidence_len_min, cfg.evidence_len_max + 1))
        phrase = [_word(next_evidence + k) for k in range(length)]
        next_evidence += length
        phrases.append(phrase)
        shared = phrase[: min(2, len(phrase))]
        filler_a = _DESC_FILLERS[int(rng.integers(len(_DESC_FILLERS)))]
        filler_b = _DESC_FILLERS[int(rng.integers(len(_DESC_FILLERS)))]
        descriptions[code_names[j]] = " ".join([filler_a] + shared + [filler_b])

    # forest over the codes: the first ~sqrt(n) codes are roots
    n_roots = max(1, int(math.isqrt(cfg.n_codes)))
    parents: dict[str, str] = {}
    for j in range(n_roots, cfg.n_codes):
        parents[code_names[j]] = code_names[int(rng.integers(0, j))]

    groups = {
        code: ("diagnosis" if j % 2 == 0 else "procedure")
        for j, code in enumerate(code_names)
    }

    weights = np.arange(1, cfg.n_codes + 1, dtype=np.float64) ** (-cfg.zipf_exponent)
    marginals = weights / weights.sum()

    # global cardinality cap chosen so any sampled code set always fits
    card_cap = max(1, min(cfg.n_codes, cfg.doc_len_min // cfg.evidence_len_max))

    def make_doc(split: str, i: int) -> RawDocument:
        length = int(rng.integers(cfg.doc_len_min, cfg.doc_len_max + 1))
        if cfg.doc_len_max > cfg.doc_len_min:
            t = (length - cfg.doc_len_min) / (cfg.doc_len_max - cfg.doc_len_min)
        else:
            t = 0.0
        mix = cfg.coupling * t + (1.0 - cfg.coupling) * rng.random()
        n_pos = 1 + int(math.floor(mix * (card_cap - 1) + 1e-12))
        chosen = rng.choice(cfg.n_codes, size=n_pos, replace=False, p=marginals)
        chosen = sorted(int(j) for j in chosen)
        units: list[list[str]] = [list(phrases[j]) for j in chosen]
        n_background = length - sum(len(u) for u in units)
        units.extend(
            [bg_words[int(k)]] for k in rng.integers(0, cfg.background_vocab, n_background)
        )
        order = rng.permutation(len(units))
        tokens = [tok for u in order for tok in units[int(u)]]
        return RawDocument(
            doc_id=f"{split}-{i:05d}",
            text=" ".join(tokens),
            codes={code_names[j] for j in chosen},
        )

    train = [make_doc("train", i) for i in range(cfg.n_train)]
    dev = [make_doc("dev", i) for i in range(cfg.n_dev)]
    test = [make_doc("test", i) for i in range(cfg.n_test)]

    labels = make_label_space(descriptions, parents)
    phrases_by_code = {code_names[j]: phrases[j] for j in range(cfg.n_codes)}
    return SyntheticCorpus(train, dev, test, labels, groups, phrases_by_code)


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def write_corpus_jsonl(path, docs: list[RawDocument]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(
                json.dumps(
                    {"doc_id": doc.doc_id, "text": doc.text, "codes": sorted(doc.codes)},
                    ensure_ascii=False,
                    sort_keys=True,
                )
            )
            fh.write("\n")


def read_corpus_jsonl(path) -> list[RawDocument]:
    docs = []
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
            if not isinstance(obj, dict) or set(obj) != {"doc_id", "text", "codes"}:
                raise DataFormatError(
                    f"{path}:{lineno}: expected exactly doc_id/text/codes fields"
                )
            doc_id = obj["doc_id"]
            if doc_id in seen:
                raise DataFormatError(f"{path}:{lineno}: duplicate doc_id {doc_id!r}")
            seen.add(doc_id)
            docs.append(RawDocument(doc_id=doc_id, text=obj["text"], codes=set(obj["codes"])))
    return docs


def write_descriptions_tsv(path, labels: LabelSpace) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for code, desc in zip(labels.codes, labels.descriptions):
            fh.write(f"{code}\t{' '.join(desc)}\n")


def read_descriptions_tsv(path) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataFormatError(f"{path}:{lineno}: expected code<TAB>description")
            code, desc = parts
            if code in out:
                raise DataFormatError(f"{path}:{lineno}: duplicate code {code!r}")
            out[code] = desc
    return out


def write_hierarchy_tsv(path, parents: dict[str, str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for child in sorted(parents):
            fh.write(f"{child}\t{parents[child]}\n")


def read_hierarchy_tsv(path) -> dict[str, str]:
    parents: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataFormatError(f"{path}:{lineno}: expected child<TAB>parent")
            child, parent = parts
            if child in parents:
                raise DataFormatError(f"{path}:{lineno}: duplicate child {child!r}")
            parents[child] = parent
    _check_acyclic(parents)
    return parents


def write_groups_tsv(path, groups: dict[str, str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for code in sorted(groups):
            fh.write(f"{code}\t{groups[code]}\n")


def read_groups_tsv(path) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataFormatError(f"{path}:{lineno}: expected code<TAB>group")
            out[parts[0]] = parts[1]
    return out


def write_counts_tsv(path, counts: dict[str, int]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for code in sorted(counts):
            fh.write(f"{code}\t{counts[code]}\n")


def read_counts_tsv(path) -> dict[str, int]:
    out: dict[str, int] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataFormatError(f"{path}:{lineno}: expected code<TAB>count")
            try:
                out[parts[0]] = int(parts[1])
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: count is not an integer") from exc
    return out


VOCAB_FORMAT_VERSION = 1


def save_vocabulary(path, vocab: Vocabulary) -> None:
    """TSV: one header line (format version + oov id), then token/id/doc_freq."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"#version={VOCAB_FORMAT_VERSION}\toov_id={vocab.oov_id}\n")
        for i, tok in enumerate(vocab.id_to_token):
            fh.write(f"{tok}\t{i}\t{vocab.doc_freq[tok]}\n")


def load_vocabulary(path) -> Vocabulary:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if not header.startswith("#version="):
            raise DataFormatError(f"{path}:1: missing vocabulary header")
        fields = dict(p.split("=", 1) for p in header[1:].split("\t"))
        if int(fields.get("version", -1)) != VOCAB_FORMAT_VERSION:
            raise DataFormatError(f"{path}:1: unsupported vocabulary format version")
        oov_id = int(fields["oov_id"])
        id_to_token: list[str] = []
        doc_freq: dict[str, int] = {}
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataFormatError(f"{path}:{lineno}: expected token<TAB>id<TAB>doc_freq")
            tok, ident, freq = parts
            if int(ident) != len(id_to_token):
                raise DataFormatError(f"{path}:{lineno}: ids must be dense and in order")
            id_to_token.append(tok)
            doc_freq[tok] = int(freq)
    if oov_id != len(id_to_token):
        raise DataFormatError(f"{path}: oov_id does not follow the retained tokens")
    return Vocabulary(
        token_to_id={t: i for i, t in enumerate(id_to_token)},
        id_to_token=id_to_token,
        oov_id=oov_id,
        doc_freq=doc_freq,
    )
