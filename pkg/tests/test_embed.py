import numpy as np
import pytest

from mvclda import embed


def _toy_corpus(seed=0, vocab_size=30, n_docs=25, doc_len=18):
    """Token ids 0 and 1 always adjacent; the rest uniform background."""
    rng = np.random.default_rng(seed)
    docs = []
    for _ in range(n_docs):
        ids = list(rng.integers(2, vocab_size, doc_len))
        k = int(rng.integers(0, doc_len - 1))
        ids[k : k + 2] = [0, 1]
        docs.append(np.array(ids))
    return docs


SMALL_CFG = embed.CbowConfig(dim=16, window=3, epochs=3, seed=1)


class TestTrainCbow:
    def test_output_shape_default_dim(self):
        docs = _toy_corpus()
        table = embed.train_cbow(docs, 30, embed.CbowConfig(epochs=1, seed=0))
        assert table.shape == (30, 100)

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError):
            embed.train_cbow([], 10, SMALL_CFG)
        with pytest.raises(ValueError):
            embed.train_cbow([np.array([], dtype=np.int64)], 10, SMALL_CFG)

    def test_deterministic_to_the_bit(self):
        docs = _toy_corpus()
        a = embed.train_cbow(docs, 30, SMALL_CFG)
        b = embed.train_cbow(docs, 30, SMALL_CFG)
        assert np.array_equal(a, b)

    def test_all_finite(self):
        table = embed.train_cbow(_toy_corpus(), 30, SMALL_CFG)
        assert np.all(np.isfinite(table))

    def test_cooccurring_tokens_end_up_similar(self):
        docs = _toy_corpus()
        table = embed.train_cbow(docs, 30, embed.CbowConfig(dim=24, window=3, epochs=8, seed=2))

        def cosine(u, v):
            return float(u @ v / (np.linalg.norm(u) * np.linalg.norm(v)))

        together = cosine(table[0], table[1])
        rng = np.random.default_rng(3)
        others = []
        for _ in range(100):
            i, j = rng.integers(2, 30, 2)
            if i != j:
                others.append(cosine(table[i], table[j]))
        assert together > np.mean(others)

    def test_objective_lower_after_training(self):
        docs = _toy_corpus()
        cfg = SMALL_CFG
        w_in0, w_out0 = embed.initial_tables(docs, 30, cfg)
        before = embed.cbow_pass_loss(docs, w_in0, w_out0, cfg, seed=99)
        w_in, w_out = embed.train_cbow_tables(docs, 30, cfg)
        after = embed.cbow_pass_loss(docs, w_in, w_out, cfg, seed=99)
        assert after < before


class TestEmbedLookup:
    def test_empty_document(self):
        table = np.ones((4, 3))
        X = embed.embed_lookup([], table)
        assert X.shape == (0, 3)

    def test_one_hot_identity(self):
        table = np.eye(4)
        X = embed.embed_lookup([2, 0], table)
        assert np.array_equal(X, np.array([[0, 0, 1, 0], [1, 0, 0, 0]], dtype=float))

    def test_repeated_ids_identical_rows(self):
        rng = np.random.default_rng(4)
        table = rng.random((10, 5))
        X = embed.embed_lookup([3, 3], table)
        assert np.array_equal(X[0], X[1])

    def test_out_of_range_rejected(self):
        table = np.ones((4, 3))
        with pytest.raises(ValueError):
            embed.embed_lookup([4], table)
        with pytest.raises(ValueError):
            embed.embed_lookup([-1], table)


class TestEmbeddingFile:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(5)
        table = rng.random((7, 4))
        path = tmp_path / "emb.bin"
        embed.save_embeddings(path, table, "cafe" * 16)
        loaded = embed.load_embeddings(path, expected_vocab_checksum="cafe" * 16)
        assert np.array_equal(loaded, table)

    def test_checksum_mismatch_rejected(self, tmp_path):
        path = tmp_path / "emb.bin"
        embed.save_embeddings(path, np.zeros((2, 2)), "aaaa")
        with pytest.raises(ValueError, match="vocabulary"):
            embed.load_embeddings(path, expected_vocab_checksum="bbbb")

    def test_truncated_payload_rejected(self, tmp_path):
        path = tmp_path / "emb.bin"
        embed.save_embeddings(path, np.zeros((3, 3)), "aaaa")
        data = path.read_bytes()
        path.write_bytes(data[:-8])
        with pytest.raises(ValueError, match="truncated"):
            embed.load_embeddings(path)

    def test_not_an_embedding_file(self, tmp_path):
        path = tmp_path / "emb.bin"
        path.write_bytes(b"junk\n")
        with pytest.raises(ValueError):
            embed.load_embeddings(path)
