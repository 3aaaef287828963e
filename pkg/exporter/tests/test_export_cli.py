import json

from embed_exporter.cli import main


def test_export_command(tmp_path, capsys):
    corpus = tmp_path / "c.txt"
    corpus.write_text("hello world\nsecond line here\n")
    out = tmp_path / "out.emb"
    rc = main(
        ["--corpus", str(corpus), "--model", "hash3:2,dim=6", "--out", str(out)]
    )
    assert rc == 0
    assert out.exists()
    manifest = json.loads((tmp_path / "out.emb.manifest.json").read_text())
    assert manifest["sentences"] == 2
    assert "wrote" in capsys.readouterr().out


def test_export_command_error_exit(tmp_path, capsys):
    corpus = tmp_path / "c.txt"
    corpus.write_text("hello\n")
    rc = main(
        ["--corpus", str(corpus), "--model", "hash3:2,dim=6",
         "--out", str(tmp_path / "x.emb"), "--layer-policy", "last"]
    )
    assert rc == 1
    assert "average_all" in capsys.readouterr().err


def test_missing_corpus_error(tmp_path, capsys):
    rc = main(
        ["--corpus", str(tmp_path / "nope.txt"), "--model", "hash3:2",
         "--out", str(tmp_path / "x.emb")]
    )
    assert rc == 1
