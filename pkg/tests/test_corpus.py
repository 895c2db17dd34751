import numpy as np
import pytest

from mvclda import corpus
from mvclda.metrics import pearson

from oracles import contains_phrase


class TestPreprocess:
    def test_lowercase_and_split(self):
        assert corpus.preprocess_text("Acute Respiratory FAILURE") == [
            "acute", "respiratory", "failure",
        ]

    def test_digit_only_tokens_removed(self):
        assert corpus.preprocess_text("given 325 mg aspirin") == ["given", "mg", "aspirin"]

    def test_edge_punctuation_then_digit_rule(self):
        # "2019." strips to "2019" which is digits-only and therefore dropped
        assert corpus.preprocess_text("x-ray, 2019.") == ["x-ray"]

    def test_mixed_alphanumeric_kept(self):
        assert corpus.preprocess_text("b12 100mg 100") == ["b12", "100mg"]

    def test_internal_hyphens_and_slashes_kept(self):
        assert corpus.preprocess_text("(x-ray) 'n/a'.") == ["x-ray", "n/a"]

    def test_empty_input(self):
        assert corpus.preprocess_text("") == []
        assert corpus.preprocess_text("   \n\t ") == []

    @pytest.mark.parametrize(
        "text",
        [
            "Acute Respiratory FAILURE",
            "x-ray, 2019. (stable)",
            "alpha 'beta' GAMMA-3, ...  12a 12",
            "punct!!! ??? [brackets] {braces} \"quotes\"",
        ],
    )
    def test_idempotent(self, text):
        once = corpus.preprocess_text(text)
        assert corpus.preprocess_text(" ".join(once)) == once


class TestVocabulary:
    def test_doc_freq_boundary(self):
        docs = [["twice"], ["twice"], ["thrice"], ["thrice"], ["thrice"]]
        vocab = corpus.build_vocabulary(docs)
        assert "thrice" in vocab.token_to_id
        assert "twice" not in vocab.token_to_id
        assert vocab.encode(["twice"])[0] == vocab.oov_id

    def test_hand_counted_example(self):
        docs = [["pain"], ["pain"], ["pain"], ["pain", "rare"]]
        vocab = corpus.build_vocabulary(docs)
        assert list(vocab.token_to_id) == ["pain"]
        assert vocab.encode(["rare"])[0] == vocab.oov_id
        assert vocab.doc_freq["pain"] == 4

    def test_repeats_within_one_doc_count_once(self):
        docs = [["dup", "dup", "dup"], ["x"], ["x"], ["x"]]
        vocab = corpus.build_vocabulary(docs)
        assert "dup" not in vocab.token_to_id

    def test_id_order_descending_freq_then_lexicographic(self):
        docs = [
            ["b", "a", "c"],
            ["b", "a", "c"],
            ["b", "a", "c"],
            ["b"],
        ]
        vocab = corpus.build_vocabulary(docs)
        # b: 4 docs; a and c: 3 docs each -> a before c
        assert vocab.id_to_token == ["b", "a", "c"]
        assert vocab.oov_id == 3
        assert vocab.size == 4

    def test_empty_training_set_errors(self):
        with pytest.raises(ValueError):
            corpus.build_vocabulary([])

    def test_decode_round_trip_excluding_oov(self):
        docs = [["alpha", "beta"]] * 3
        vocab = corpus.build_vocabulary(docs)
        tokens = ["alpha", "beta", "unseen"]
        ids = vocab.encode(tokens)
        decoded = vocab.decode(ids)
        assert decoded[:2] == ["alpha", "beta"]
        assert decoded[2] == "<oov>"

    def test_save_load_round_trip(self, tmp_path):
        docs = [["alpha", "beta", "gamma"]] * 3 + [["alpha"]]
        vocab = corpus.build_vocabulary(docs)
        path = tmp_path / "vocab.tsv"
        corpus.save_vocabulary(path, vocab)
        loaded = corpus.load_vocabulary(path)
        assert loaded.token_to_id == vocab.token_to_id
        assert loaded.oov_id == vocab.oov_id
        assert loaded.doc_freq == vocab.doc_freq

    def test_load_rejects_bad_header(self, tmp_path):
        path = tmp_path / "vocab.tsv"
        path.write_text("not a header\n")
        with pytest.raises(corpus.DataFormatError):
            corpus.load_vocabulary(path)


def _toy_space():
    return corpus.make_label_space({"A": "alpha disease", "B": "beta disease", "C": "gamma"})


class TestEncodeDocument:
    def test_empty_text(self):
        vocab = corpus.build_vocabulary([["w"]] * 3)
        doc, dropped = corpus.encode_document(
            corpus.RawDocument("d1", "", set()), vocab, _toy_space()
        )
        assert len(doc.token_ids) == 0 and doc.length == 0
        assert dropped == 0

    def test_all_unknown_tokens(self):
        vocab = corpus.build_vocabulary([["w"]] * 3)
        doc, _ = corpus.encode_document(
            corpus.RawDocument("d1", "novel words only", set()), vocab, _toy_space()
        )
        assert np.all(doc.token_ids == vocab.oov_id)

    def test_gold_vector(self):
        vocab = corpus.build_vocabulary([["w"]] * 3)
        doc, dropped = corpus.encode_document(
            corpus.RawDocument("d1", "w", {"A", "B"}), vocab, _toy_space()
        )
        assert doc.gold.tolist() == [1.0, 1.0, 0.0]
        assert dropped == 0

    def test_unknown_codes_dropped_and_counted(self):
        vocab = corpus.build_vocabulary([["w"]] * 3)
        doc, dropped = corpus.encode_document(
            corpus.RawDocument("d1", "w", {"A", "Zed", "Q"}), vocab, _toy_space()
        )
        assert doc.gold.tolist() == [1.0, 0.0, 0.0]
        assert dropped == 2

    def test_round_trip_through_vocabulary(self):
        tokens = ["alpha", "beta", "alpha"]
        vocab = corpus.build_vocabulary([tokens] * 3)
        doc, _ = corpus.encode_document(
            corpus.RawDocument("d1", "alpha beta alpha", set()), vocab, _toy_space()
        )
        assert vocab.decode(doc.token_ids) == tokens


class TestLabelSpace:
    def test_empty_description_rejected(self):
        with pytest.raises(ValueError):
            corpus.make_label_space({"A": "2019"})  # preprocesses to nothing

    def test_cycle_rejected(self):
        with pytest.raises(ValueError):
            corpus.make_label_space(
                {"A": "alpha", "B": "beta"}, parents={"A": "B", "B": "A"}
            )

    def test_ancestor_chain(self):
        space = corpus.make_label_space(
            {"A": "alpha", "B": "beta", "C": "gamma"},
            parents={"C": "B", "B": "A"},
        )
        assert space.ancestors("C") == ["B", "A"]
        assert space.ancestors("A") == []


class TestSyntheticCorpus:
    CFG = corpus.SynthConfig(
        n_codes=12, n_train=80, n_dev=15, n_test=15,
        background_vocab=80, doc_len_min=25, doc_len_max=70, seed=11,
    )

    def test_determinism_byte_identical(self, tmp_path):
        a = corpus.generate_synthetic_corpus(self.CFG)
        b = corpus.generate_synthetic_corpus(self.CFG)
        pa, pb = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        corpus.write_corpus_jsonl(pa, a.train + a.dev + a.test)
        corpus.write_corpus_jsonl(pb, b.train + b.dev + b.test)
        assert pa.read_bytes() == pb.read_bytes()

    def test_different_seed_differs(self):
        a = corpus.generate_synthetic_corpus(self.CFG)
        b = corpus.generate_synthetic_corpus(
            corpus.SynthConfig(**{**self.CFG.__dict__, "seed": 12})
        )
        assert any(x.text != y.text for x, y in zip(a.train, b.train))

    def test_evidence_phrase_contained_for_every_positive_pair(self):
        synth = corpus.generate_synthetic_corpus(self.CFG)
        checked = 0
        for doc in synth.train + synth.dev + synth.test:
            for code in doc.codes:
                assert contains_phrase(doc.text, synth.evidence_phrases[code])
                checked += 1
        assert checked > 0

    def test_descriptions_share_a_token_with_their_phrase(self):
        synth = corpus.generate_synthetic_corpus(self.CFG)
        for j, code in enumerate(synth.labels.codes):
            desc = set(synth.labels.descriptions[j])
            assert desc & set(synth.evidence_phrases[code])

    def test_split_sizes_and_disjoint_ids(self):
        synth = corpus.generate_synthetic_corpus(self.CFG)
        assert (len(synth.train), len(synth.dev), len(synth.test)) == (80, 15, 15)
        ids = [d.doc_id for d in synth.train + synth.dev + synth.test]
        assert len(set(ids)) == len(ids)

    def test_document_lengths_within_range(self):
        synth = corpus.generate_synthetic_corpus(self.CFG)
        for doc in synth.train:
            n = len(doc.text.split())
            assert self.CFG.doc_len_min <= n <= self.CFG.doc_len_max

    def test_length_cardinality_coupling(self):
        cfg = corpus.SynthConfig(
            n_codes=20, n_train=500, n_dev=10, n_test=10,
            background_vocab=150, doc_len_min=40, doc_len_max=120,
            coupling=0.8, seed=5,
        )
        synth = corpus.generate_synthetic_corpus(cfg)
        lengths = [len(d.text.split()) for d in synth.train]
        cards = [len(d.codes) for d in synth.train]
        assert pearson(lengths, cards) > 0.3

    def test_zipf_marginals_skew(self):
        synth = corpus.generate_synthetic_corpus(self.CFG)
        counts = {c: 0 for c in synth.labels.codes}
        for doc in synth.train:
            for code in doc.codes:
                counts[code] += 1
        ordered = [counts[c] for c in synth.labels.codes]
        assert ordered[0] > ordered[-1]

    def test_infeasible_evidence_placement_rejected(self):
        with pytest.raises(ValueError):
            corpus.SynthConfig(doc_len_min=4, doc_len_max=10, evidence_len_max=6).validate()

    def test_hierarchy_is_acyclic_forest_over_codes(self):
        synth = corpus.generate_synthetic_corpus(self.CFG)
        parents = synth.labels.parents
        assert parents
        codes = set(synth.labels.codes)
        assert set(parents) <= codes and set(parents.values()) <= codes


class TestFileFormats:
    def test_corpus_jsonl_round_trip(self, tmp_path):
        docs = [
            corpus.RawDocument("a", "some text", {"X", "Y"}),
            corpus.RawDocument("b", "", set()),
        ]
        path = tmp_path / "c.jsonl"
        corpus.write_corpus_jsonl(path, docs)
        loaded = corpus.read_corpus_jsonl(path)
        assert [(d.doc_id, d.text, d.codes) for d in loaded] == [
            ("a", "some text", {"X", "Y"}),
            ("b", "", set()),
        ]

    def test_malformed_jsonl_reports_line_number(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"doc_id": "a", "text": "t", "codes": []}\nnot json\n')
        with pytest.raises(corpus.DataFormatError, match=":2:"):
            corpus.read_corpus_jsonl(path)

    def test_wrong_fields_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"doc_id": "a", "body": "t", "codes": []}\n')
        with pytest.raises(corpus.DataFormatError, match=":1:"):
            corpus.read_corpus_jsonl(path)

    def test_duplicate_doc_id_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        line = '{"doc_id": "a", "text": "t", "codes": []}\n'
        path.write_text(line + line)
        with pytest.raises(corpus.DataFormatError, match="duplicate"):
            corpus.read_corpus_jsonl(path)

    def test_descriptions_round_trip(self, tmp_path):
        space = _toy_space()
        path = tmp_path / "desc.tsv"
        corpus.write_descriptions_tsv(path, space)
        loaded = corpus.read_descriptions_tsv(path)
        assert loaded == {"A": "alpha disease", "B": "beta disease", "C": "gamma"}

    def test_hierarchy_round_trip_and_cycle_check(self, tmp_path):
        path = tmp_path / "h.tsv"
        corpus.write_hierarchy_tsv(path, {"B": "A", "C": "B"})
        assert corpus.read_hierarchy_tsv(path) == {"B": "A", "C": "B"}
        path.write_text("A\tB\nB\tA\n")
        with pytest.raises(ValueError, match="cycle"):
            corpus.read_hierarchy_tsv(path)

    def test_groups_and_counts_round_trip(self, tmp_path):
        gp = tmp_path / "g.tsv"
        corpus.write_groups_tsv(gp, {"A": "diagnosis", "B": "procedure"})
        assert corpus.read_groups_tsv(gp) == {"A": "diagnosis", "B": "procedure"}
        cp = tmp_path / "c.tsv"
        corpus.write_counts_tsv(cp, {"A": 4, "B": 0})
        assert corpus.read_counts_tsv(cp) == {"A": 4, "B": 0}
        cp.write_text("A\tnot-a-number\n")
        with pytest.raises(corpus.DataFormatError, match=":1:"):
            corpus.read_counts_tsv(cp)
