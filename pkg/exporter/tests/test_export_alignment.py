import numpy as np
import pytest

from embed_exporter.corpus import read_corpus
from embed_exporter.export import AlignmentPolicy, ExportJob, LayerPolicy, export
from embed_exporter.providers import HashProvider, resolve_provider


class TestHashProviderTokenization:
    def test_chunking(self):
        provider = HashProvider("hash3:1,dim=4")
        (encoding,) = provider.embed_batch([["breaking", "ice"]])
        # "breaking" -> brea + king, "ice" -> ice
        assert encoding.word_to_subtokens == [[0, 1], [2]]
        assert encoding.layers[0].shape == (3, 4)
        assert len(encoding.layers) == 3

    def test_deterministic_vectors(self):
        a = HashProvider("hash3:1,dim=4").embed_batch([["word"]])[0]
        b = HashProvider("hash3:1,dim=4").embed_batch([["word"]])[0]
        for la, lb in zip(a.layers, b.layers):
            np.testing.assert_array_equal(la, lb)

    def test_layers_differ(self):
        (encoding,) = HashProvider("hash3:1,dim=4").embed_batch([["word"]])
        assert not np.allclose(encoding.layers[0], encoding.layers[1])

    def test_single_layer_variant_matches_stack(self):
        full = HashProvider("hash3:1,dim=4").embed_batch([["word"]])[0]
        for k in range(3):
            solo = HashProvider(f"hash3:1,dim=4,layer={k}").embed_batch([["word"]])[0]
            np.testing.assert_array_equal(solo.layers[0], full.layers[k])


def _read_rows(path, sentence_id):
    # Minimal standalone reader for assertions, independent of any consumer.
    import struct

    buf = open(path, "rb").read()
    pos = 8
    version, dim, count = struct.unpack_from("<III", buf, pos)
    pos += 12
    (tag_len,) = struct.unpack_from("<H", buf, pos)
    pos += 2 + tag_len
    for _ in range(count):
        (id_len,) = struct.unpack_from("<H", buf, pos)
        pos += 2
        sid = buf[pos : pos + id_len].decode("utf-8")
        pos += id_len
        (tokens,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        vectors = np.frombuffer(buf, dtype="<f4", count=tokens * dim, offset=pos).reshape(
            tokens, dim
        )
        pos += tokens * dim * 4
        if sid == sentence_id:
            return vectors
    raise KeyError(sentence_id)


class TestAlignmentPolicies:
    @pytest.fixture
    def corpus(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("breaking the ice\n")
        return path

    def test_first_subtoken_selects_first_rows(self, corpus, tmp_path):
        out = tmp_path / "first.emb"
        export(
            ExportJob(
                corpus_path=str(corpus),
                model_id="hash3:5,dim=6",
                out_path=str(out),
                alignment_policy=AlignmentPolicy.FIRST_SUBTOKEN,
            )
        )
        provider = HashProvider("hash3:5,dim=6")
        (encoding,) = provider.embed_batch([["breaking", "the", "ice"]])
        mean_layers = np.mean(np.stack(encoding.layers), axis=0)
        expected = mean_layers[[0, 2, 3]]  # first subtoken of each word
        np.testing.assert_allclose(_read_rows(out, "s1"), expected, atol=1e-6)

    def test_whole_word_averages_rows(self, corpus, tmp_path):
        out = tmp_path / "whole.emb"
        export(
            ExportJob(
                corpus_path=str(corpus),
                model_id="hash3:5,dim=6",
                out_path=str(out),
                alignment_policy=AlignmentPolicy.WHOLE_WORD,
            )
        )
        provider = HashProvider("hash3:5,dim=6")
        (encoding,) = provider.embed_batch([["breaking", "the", "ice"]])
        mean_layers = np.mean(np.stack(encoding.layers), axis=0)
        expected = np.stack(
            [mean_layers[[0, 1]].mean(axis=0), mean_layers[2], mean_layers[3]]
        )
        np.testing.assert_allclose(_read_rows(out, "s1"), expected, atol=1e-6)

    def test_one_vector_per_word(self, tmp_path):
        corpus = tmp_path / "c.txt"
        lines = ["short one", "a considerably longer sentence with several words"]
        corpus.write_text("\n".join(lines) + "\n")
        out = tmp_path / "x.emb"
        export(ExportJob(corpus_path=str(corpus), model_id="hash3:5,dim=6", out_path=str(out)))
        for sid, words in read_corpus(corpus):
            assert _read_rows(out, sid).shape == (len(words), 6)


class TestAverageAllEqualsManualMean:
    def test_average_equals_mean_of_layer_exports(self, tmp_path):
        corpus = tmp_path / "c.txt"
        corpus.write_text("breaking the ice today\nanother sentence here\n")
        averaged = tmp_path / "avg.emb"
        export(
            ExportJob(
                corpus_path=str(corpus),
                model_id="hash3:9,dim=8",
                out_path=str(averaged),
                layer_policy=LayerPolicy.AVERAGE_ALL,
            )
        )
        per_layer = []
        for k in range(3):
            out = tmp_path / f"layer{k}.emb"
            export(
                ExportJob(
                    corpus_path=str(corpus),
                    model_id=f"hash3:9,dim=8,layer={k}",
                    out_path=str(out),
                    layer_policy=LayerPolicy.LAST,
                )
            )
            per_layer.append(out)
        for sid, _ in read_corpus(corpus):
            manual = np.mean(
                np.stack([_read_rows(p, sid).astype(np.float64) for p in per_layer]),
                axis=0,
            )
            np.testing.assert_allclose(_read_rows(averaged, sid), manual, atol=1e-6)


class TestCorpusReaders:
    def test_tsv(self, tmp_path):
        path = tmp_path / "c.tsv"
        path.write_text("id1\texpr\tYES\tNO\ta b c\tO O O\n")
        assert read_corpus(path) == [("id1", ["a", "b", "c"])]

    def test_cupt(self, tmp_path):
        path = tmp_path / "c.cupt"
        path.write_text(
            "# source_sent_id = x9\n"
            "1\thello\t_\t_\t_\t_\t_\t_\t_\t_\t*\n"
            "2\tworld\t_\t_\t_\t_\t_\t_\t_\t_\t*\n"
            "\n"
            "1-2\tdunno\t_\t_\t_\t_\t_\t_\t_\t_\t*\n"
            "1\tsecond\t_\t_\t_\t_\t_\t_\t_\t_\t*\n"
        )
        assert read_corpus(path) == [("x9", ["hello", "world"]), ("s2", ["second"])]

    def test_plain(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("one two\n\nthree\n")
        assert read_corpus(path) == [("s1", ["one", "two"]), ("s3", ["three"])]

    def test_resolver_rejects_unknown(self):
        with pytest.raises(ValueError):
            resolve_provider("mystery:model")
