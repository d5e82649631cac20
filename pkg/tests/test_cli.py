"""End-to-end CLI tests through the console entry point."""

import csv

import pytest

from tsdce.cli import main


CONFIG = """
n_t = 16
n_r = 16
p_count = 16
q_count = 16
paths = 1
rounds = 1
trials = 5
seed = 12
snr_db_list = 0, 10
methods = tsdce, ls
"""


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text(CONFIG, encoding="utf-8")
    return str(path)


class TestRunCommand:
    def test_writes_metrics_csv(self, config_path, tmp_path, capsys):
        out = str(tmp_path / "metrics.csv")
        assert main(["run", "--config", config_path, "--out", out]) == 0
        with open(out, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 4
        assert {r["method"] for r in rows} == {"tsdce", "ls"}

    def test_config_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("nonsense = 1\n", encoding="utf-8")
        out = str(tmp_path / "metrics.csv")
        assert main(["run", "--config", str(bad), "--out", out]) == 2


class TestSingleCommand:
    def test_dumps_matrices(self, config_path, tmp_path):
        dump = tmp_path / "dump"
        rc = main(["single", "--config", config_path, "--snr-db", "10",
                   "--trial", "0", "--dump", str(dump)])
        assert rc == 0
        names = {p.name for p in dump.iterdir()}
        assert {"Y.csv", "D.csv", "D_bar.csv", "H_true.csv",
                "H_hat.csv"} <= names
        header = (dump / "Y.csv").read_text().splitlines()[0]
        assert header == "m,n,re,im"


class TestBoundCommand:
    @pytest.mark.parametrize("kind", ["lemma3", "lemma4", "crlb"])
    def test_bound_curves(self, config_path, tmp_path, kind):
        out = str(tmp_path / f"{kind}.csv")
        rc = main(["bound", "--config", config_path, "--kind", kind,
                   "--out", out])
        assert rc == 0
        with open(out, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2
        assert all(r["kind"] == kind for r in rows)
