import os

import pytest

from proxyssl.cli import main
from proxyssl.dataset import save_csv, write_manifest
from proxyssl.errors import ConfigError
from proxyssl.specfile import parse_sampling_mode, parse_spec
from proxyssl.synthetic import make_blobs


@pytest.fixture
def data_file(tmp_path):
    ds = make_blobs("mini", n=120, d=6, n_classes=2, separation=4.0, seed=13)
    p = tmp_path / "mini.csv"
    save_csv(ds, p)
    write_manifest(ds, p, task="synthetic blobs")
    return p


def write_spec(tmp_path, data_file, body):
    spec = tmp_path / "exp.ini"
    spec.write_text(
        "[global]\n"
        f"datasets = {data_file}\n"
        "n_folds = 3\n"
        "n_seeds = 1\n"
        "base_seed = 5\n"
        "epochs = 2\n"
        "batch_size = 32\n"
        + body,
        encoding="utf-8",
    )
    return spec


class TestValidate:
    def test_valid_file(self, data_file, capsys):
        assert main(["validate", str(data_file)]) == 0
        out = capsys.readouterr().out
        assert "samples: 120" in out
        assert "classes: 2" in out
        assert "task: synthetic blobs" in out
        assert "class 0:" in out and "class 1:" in out

    def test_truncated_row_exit_1(self, tmp_path, capsys):
        p = tmp_path / "bad.csv"
        p.write_text("# name=bad d=2\n0,0,1.0,2.0\n1,1,3.0\n", encoding="utf-8")
        assert main(["validate", str(p)]) == 1
        assert ":3:" in capsys.readouterr().err

    def test_empty_file_exit_1(self, tmp_path, capsys):
        p = tmp_path / "empty.csv"
        p.write_text("# name=empty d=2\n", encoding="utf-8")
        assert main(["validate", str(p)]) == 1
        assert "no samples" in capsys.readouterr().err


class TestSpecParsing:
    def test_missing_dataset_file(self, tmp_path):
        spec = tmp_path / "exp.ini"
        spec.write_text("[global]\ndatasets = nope.csv\n[study s]\nalgorithms = supervised\n",
                        encoding="utf-8")
        with pytest.raises(ConfigError, match="not found"):
            parse_spec(spec)

    def test_empty_algorithm_list(self, tmp_path, data_file):
        spec = write_spec(tmp_path, data_file, "[study s]\nrates = 0.9\nalgorithms =\n")
        with pytest.raises(ConfigError, match="empty algorithm list"):
            parse_spec(spec)

    def test_unknown_algorithm(self, tmp_path, data_file):
        spec = write_spec(tmp_path, data_file, "[study s]\nalgorithms = SVM\n")
        with pytest.raises(ConfigError, match="SVM"):
            parse_spec(spec)

    def test_no_study_sections(self, tmp_path, data_file):
        spec = write_spec(tmp_path, data_file, "")
        with pytest.raises(ConfigError, match="study"):
            parse_spec(spec)

    def test_sampling_study_rows(self, tmp_path, data_file):
        spec = write_spec(tmp_path, data_file,
                          "[study samp]\nkind = sampling\nrates = 0.9\n"
                          "algorithms = TT, TTWD\nmodes = x:norepl, 2x:repl\n")
        grid = parse_spec(spec).grids[0]
        labels = [e.row_label() for e in grid.algorithms]
        assert labels == ["Supervised", "TT x+norepl", "TT 2x+repl",
                          "TTWD x+norepl", "TTWD 2x+repl"]

    def test_threshold_study_rows(self, tmp_path, data_file):
        spec = write_spec(tmp_path, data_file,
                          "[study th]\nkind = thresholds\nrates = 0.9\n"
                          "algorithms = TBST\npairs = 0.7:0.9, 0.8:1.0\n")
        grid = parse_spec(spec).grids[0]
        ssl = [e.ssl for e in grid.algorithms if e.ssl]
        assert [(c.tau1, c.tau2) for c in ssl] == [(0.7, 0.9), (0.8, 1.0)]

    def test_sweep_rates_from_fractions(self, tmp_path, data_file):
        spec = write_spec(tmp_path, data_file,
                          "[study sw]\nkind = sweep\nfractions = 0.1, 0.5, 1.0\n")
        grid = parse_spec(spec).grids[0]
        assert grid.unlabeled_rates == [0.9, 0.5, 0.0]
        assert [e.algorithm for e in grid.algorithms] == ["supervised"]

    def test_fresh_model_study_rows(self, tmp_path, data_file):
        spec = write_spec(tmp_path, data_file,
                          "[study nm]\nkind = fresh_model\nrates = 0.9\nalgorithms = TBST\n")
        grid = parse_spec(spec).grids[0]
        fresh = [e.ssl.fresh_model_each_iteration for e in grid.algorithms if e.ssl]
        assert fresh == [True, False]

    def test_reference_section(self, tmp_path, data_file):
        spec = write_spec(tmp_path, data_file,
                          "[study s]\nrates = 0.9\nalgorithms = supervised\n"
                          "[reference]\nmini@0.9/Supervised = 88.50\n")
        parsed = parse_spec(spec)
        assert parsed.reference == {("mini", 0.9, "Supervised"): 88.5}

    def test_mode_token_errors(self):
        with pytest.raises(ConfigError):
            parse_sampling_mode("x")
        with pytest.raises(ConfigError):
            parse_sampling_mode("x:maybe")


class TestRunAndReport:
    def run_spec(self, tmp_path, data_file, out_name="out"):
        spec = write_spec(
            tmp_path, data_file,
            "max_iterations = 1\n"
            "[study base]\n"
            "rates = 0.9, 0.8\n"
            "algorithms = supervised, TBST, TT\n"
            "[reference]\n"
            "mini@0.9/Supervised = 90.0\n",
        )
        out = tmp_path / out_name
        assert main(["run", str(spec), "--out", str(out)]) == 0
        return out

    def test_run_writes_log_and_tables(self, tmp_path, data_file):
        out = self.run_spec(tmp_path, data_file)
        assert (out / "run_log.csv").exists()
        assert (out / "table_base_rate0.9.txt").exists()
        assert (out / "table_base_rate0.8.txt").exists()
        assert (out / "table_base_rate0.9.csv").exists()
        assert (out / "reference_delta.csv").exists()
        text = (out / "table_base_rate0.9.txt").read_text()
        assert "Oracle" in text and "Supervised" in text and "TBST" in text and "TT" in text
        # series: Supervised appears at two rates
        assert (out / "series_base_mini.txt").exists()
        lines = (out / "series_base_mini.txt").read_text().splitlines()
        assert len(lines) == 2 and lines[0].startswith("0.1 ")

    def test_report_reproduces_tables_byte_identical(self, tmp_path, data_file):
        out = self.run_spec(tmp_path, data_file)
        rep = tmp_path / "rep"
        assert main(["report", str(out / "run_log.csv"), "--out", str(rep)]) == 0
        for name in ("table_base_rate0.9.txt", "table_base_rate0.8.txt",
                     "table_base_rate0.9.csv", "series_base_mini.txt"):
            assert (rep / name).read_bytes() == (out / name).read_bytes()

    def test_report_union_of_concatenated_logs(self, tmp_path, data_file):
        spec_a = write_spec(tmp_path, data_file,
                            "[study a]\nrates = 0.9\nalgorithms = supervised\n"
                            "include_oracle = false\n")
        out_a = tmp_path / "a"
        assert main(["run", str(spec_a), "--out", str(out_a)]) == 0
        spec_b = write_spec(tmp_path, data_file,
                            "[study b]\nrates = 0.8\nalgorithms = supervised\n"
                            "include_oracle = false\n")
        out_b = tmp_path / "b"
        assert main(["run", str(spec_b), "--out", str(out_b)]) == 0

        merged = (out_a / "run_log.csv").read_text() + (out_b / "run_log.csv").read_text()
        log = tmp_path / "merged.csv"
        log.write_text(merged, encoding="utf-8")
        rep = tmp_path / "rep_union"
        assert main(["report", str(log), "--out", str(rep)]) == 0
        assert (rep / "table_a_rate0.9.txt").read_bytes() == \
               (out_a / "table_a_rate0.9.txt").read_bytes()
        assert (rep / "table_b_rate0.8.txt").read_bytes() == \
               (out_b / "table_b_rate0.8.txt").read_bytes()

    def test_invalid_spec_exit_2(self, tmp_path, data_file, capsys):
        spec = write_spec(tmp_path, data_file, "[study s]\nrates = 0.9\nalgorithms =\n")
        assert main(["run", str(spec)]) == 2
        assert "error:" in capsys.readouterr().err

    def test_corrupt_log_exit_1(self, tmp_path, capsys):
        log = tmp_path / "bad.csv"
        log.write_text("not,a,log\n", encoding="utf-8")
        assert main(["report", str(log), "--out", str(tmp_path / "r")]) == 1
        assert ":1:" in capsys.readouterr().err

    def test_out_dir_from_env(self, tmp_path, data_file, monkeypatch):
        spec = write_spec(tmp_path, data_file,
                          "[study s]\nrates = 0.9\nalgorithms = supervised\n"
                          "include_oracle = false\n")
        env_out = tmp_path / "envout"
        monkeypatch.setenv("PROXYSSL_OUT", str(env_out))
        monkeypatch.chdir(tmp_path)
        assert main(["run", str(spec)]) == 0
        assert (env_out / "run_log.csv").exists()
