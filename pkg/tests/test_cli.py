import csv
from pathlib import Path

import pytest

from lingualchemy.cli import main

FAST_CFG = """\
[task]
task = classification
[training]
epochs = 2
batch_size = 16
seeds = 1
[model]
d_model = 16
max_seq_len = 16
[generate]
n_langs = 6
n_families = 3
n_per_lang = 40
n_classes = 3
[paths]
threads = 1
"""


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text(FAST_CFG, encoding="utf-8")
    return path


def run_cli(*argv):
    return main(list(argv))


class TestExitCodes:
    def test_config_error_is_2(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("bogus_key = 1\n", encoding="utf-8")
        assert run_cli("--config", str(bad), "train") == 2

    def test_data_error_is_3(self, tmp_path, cfg_file):
        missing = tmp_path / "nope.cfg"
        assert run_cli("--config", str(missing), "train") == 3

    def test_success_is_0(self, tmp_path, cfg_file):
        out = tmp_path / "out"
        assert run_cli("--config", str(cfg_file), "--out", str(out), "gen") == 0

    def test_numeric_failure_is_4(self, monkeypatch):
        import lingualchemy.cli as cli
        from lingualchemy.errors import NumericError

        def boom(args):
            raise NumericError("singular")

        monkeypatch.setitem(cli._COMMANDS, "train", boom)
        assert run_cli("train") == 4


class TestGen(object):
    def test_writes_store_corpus_vocab(self, tmp_path, cfg_file):
        out = tmp_path / "gen"
        assert run_cli("--config", str(cfg_file), "--out", str(out), "gen") == 0
        assert (out / "corpus.tsv").exists()
        assert (out / "vocab.tsv").exists()
        for name in ("syntax_knn", "syntax_average", "geo"):
            assert (out / "store" / f"{name}.tsv").exists()


class TestTrainEvalAlign:
    def test_train_then_eval_then_align(self, tmp_path, cfg_file, capsys):
        out = tmp_path / "run"
        assert run_cli("--config", str(cfg_file), "--out", str(out),
                       "train") == 0
        for name in ("report.csv", "trace.csv", "config.resolved",
                     "plot.svg", "checkpoint.lalc", "vocab.tsv"):
            assert (out / name).exists(), name
        capsys.readouterr()

        assert run_cli("--config", str(cfg_file), "--out", str(out),
                       "eval", "--run-dir", str(out)) == 0
        printed = capsys.readouterr().out
        assert "syn00" in printed

        align_out = tmp_path / "align"
        assert run_cli("--config", str(cfg_file), "--out", str(align_out),
                       "align", "--run-dir", str(out)) == 0
        assert (align_out / "alignment_report.csv").exists()
        assert (align_out / "alignment_pca.csv").exists()
        with open(align_out / "alignment_report.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0][0] == "method" and len(rows) == 3

    def test_report_csv_schema(self, tmp_path, cfg_file):
        out = tmp_path / "run2"
        run_cli("--config", str(cfg_file), "--out", str(out), "train")
        with open(out / "report.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["lang", "split", "metric", "value"]
        assert all(r[2] == "accuracy" for r in rows[1:])


class TestSweeps:
    def test_sweep_scale_rows(self, tmp_path):
        cfg = tmp_path / "sweep.cfg"
        cfg.write_text(FAST_CFG.replace("n_per_lang = 40", "n_per_lang = 24")
                       .replace("epochs = 2", "epochs = 1")
                       .replace("n_langs = 6", "n_langs = 9"),
                       encoding="utf-8")
        out = tmp_path / "sweep"
        assert run_cli("--config", str(cfg), "--out", str(out),
                       "sweep-scale") == 0
        with open(out / "scaling_sweep.csv") as fh:
            rows = list(csv.reader(fh))
        labels = [r[0] for r in rows[1:]]
        assert labels == ["0x", "10x", "25x", "50x", "100x",
                          "AlchemyScale", "AlchemyTune"]
        assert (out / "scaling_sweep.svg").exists()

    def test_sweep_features_rows(self, tmp_path):
        cfg = tmp_path / "sweep.cfg"
        cfg.write_text(FAST_CFG.replace("n_per_lang = 40", "n_per_lang = 24")
                       .replace("epochs = 2", "epochs = 1")
                       .replace("n_langs = 6", "n_langs = 9"),
                       encoding="utf-8")
        out = tmp_path / "feat"
        assert run_cli("--config", str(cfg), "--out", str(out),
                       "sweep-features") == 0
        with open(out / "feature_ablation.csv") as fh:
            rows = list(csv.reader(fh))
        assert len(rows) == 8
        flagged = [r for r in rows[1:] if r[1] == "true"]
        assert len(flagged) == 1
        assert flagged[0][0] == "syntax_knn+syntax_avg+geo"


class TestFamilyGen:
    def test_trajectory_csv(self, tmp_path):
        cfg = tmp_path / "fam.cfg"
        cfg.write_text(FAST_CFG
                       + "[languages]\n"
                       + "unseen = syn04,syn05\n"
                       + "family_groups = syn00,syn01 | syn00,syn01,syn02,syn03\n",
                       encoding="utf-8")
        out = tmp_path / "fam"
        assert run_cli("--config", str(cfg), "--out", str(out),
                       "family-gen") == 0
        with open(out / "family_trajectory.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["lang", "group", "seed", "value"]
        langs = {r[0] for r in rows[1:]}
        assert langs == {"syn04", "syn05"}
        groups = {r[1] for r in rows[1:]}
        assert groups == {"1", "2"}


class TestHelp:
    def test_help_documents_defaults(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--help"])
        assert exc.value.code == 0
        text = capsys.readouterr().out
        assert "factor=10.0" in text
        assert "gen" in text and "sweep-scale" in text
