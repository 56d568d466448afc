"""Tests for config parsing, CSV/manifest/plot emission, and the CLI."""

import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from contraq.cli import main
from contraq.config import ParseError, ValidationError, parse_config
from contraq.experiments import ResultRow, run_contraction_experiment
from contraq.reporting import CSV_COLUMNS, emit_csv, emit_plot_script, read_csv_rows

from test_experiments import small_mild_config


class TestParseConfig:
    def test_empty_file_gives_mild_defaults(self, tmp_path):
        p = tmp_path / "empty.cfg"
        p.write_text("")
        cfg = parse_config(p)
        assert cfg.regime == "mild_seq"
        assert cfg.alpha == 1.0
        assert cfg.n_grid == tuple(2**k for k in range(8, 17))

    def test_missing_path_gives_defaults(self):
        cfg = parse_config(None)
        assert cfg.regime == "mild_seq"

    def test_file_values_and_sections(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text(
            "# experiment\n[model]\nregime = volterra\nbeta = 1.5\n"
            "[run]\nn_grid = 64, 128, 256, 512\nreplications = 21\n"
        )
        cfg = parse_config(p)
        assert cfg.regime == "volterra"
        assert cfg.beta == 1.5
        assert cfg.n_grid == (64, 128, 256, 512)
        assert cfg.replications == 21
        # untouched keys keep the volterra defaults
        assert cfg.sigma == 0.1

    def test_override_beats_file(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("beta = 2\n")
        cfg = parse_config(p, overrides=["beta=3.5"])
        assert cfg.beta == 3.5

    def test_unknown_key_named(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("betaa = 2\n")
        with pytest.raises(ValidationError, match="betaa"):
            parse_config(p)

    def test_nonincreasing_grid_rejected(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("n_grid = 64,32,128,256\n")
        with pytest.raises(ValidationError, match="strictly increasing"):
            parse_config(p)

    def test_malformed_line_has_line_number(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("beta = 1\nthis is wrong\n")
        with pytest.raises(ParseError, match="line 2"):
            parse_config(p)

    def test_seed_flag_wins(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("seed = 5\n")
        assert parse_config(p).seed == 5
        assert parse_config(p, seed=77).seed == 77


class TestCsv:
    def _rows(self):
        return [
            ResultRow("mild_seq", 64, 0, 0.5, 1.25, float("nan"), float("nan"), 12),
            ResultRow("mild_seq", 64, 1, 0.25, 0.75, 0.01, 2.5, 13),
        ]

    def test_header_only_for_empty(self, tmp_path):
        path = tmp_path / "out.csv"
        emit_csv([], path)
        assert path.read_text() == ",".join(CSV_COLUMNS) + "\n"

    def test_round_trip(self, tmp_path):
        path = tmp_path / "out.csv"
        rows = self._rows()
        emit_csv(rows, path)
        back = read_csv_rows(path)
        for a, b in zip(rows, back):
            assert a.regime == b.regime and a.n == b.n and a.seed == b.seed
            np.testing.assert_allclose(
                [a.radius_direct, a.radius_inverse],
                [b.radius_direct, b.radius_inverse], rtol=1e-12,
            )

    def test_round_trip_aggregates(self, tmp_path):
        res = run_contraction_experiment(small_mild_config())
        path = tmp_path / "out.csv"
        emit_csv(res.rows, path)
        back = read_csv_rows(path)
        for n_info in res.per_n:
            n = n_info["n"]
            mean_back = np.mean([r.radius_inverse for r in back if r.n == n])
            assert mean_back == pytest.approx(n_info["mean_inverse"], rel=1e-12)

    def test_byte_identical_reruns(self, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        res1 = run_contraction_experiment(small_mild_config())
        res2 = run_contraction_experiment(small_mild_config())
        emit_csv(res1.rows, a)
        emit_csv(res2.rows, b)
        assert a.read_bytes() == b.read_bytes()

    def test_twelve_significant_digits(self, tmp_path):
        path = tmp_path / "out.csv"
        emit_csv(self._rows(), path)
        line = path.read_text().splitlines()[1]
        assert "5.00000000000e-01" in line


class TestPlotScript:
    def test_script_properties(self, tmp_path):
        res = run_contraction_experiment(small_mild_config())
        out1 = tmp_path / "o1"
        out2 = tmp_path / "o2"
        out1.mkdir()
        out2.mkdir()
        emit_csv(res.rows, out1 / "rates.csv")
        emit_plot_script(res, out1 / "plot_rates.py", "rates.csv")
        emit_plot_script(res, out2 / "plot_rates.py", "rates.csv")
        text1 = (out1 / "plot_rates.py").read_text()
        assert 'CSV_PATH = "rates.csv"' in text1  # relative reference
        assert repr(-res.inverse_fit.theoretical_exponent) in text1  # theory passthrough
        # different output dir: identical script body
        assert text1 == (out2 / "plot_rates.py").read_text()
        # the script runs standalone next to its CSV
        proc = subprocess.run([sys.executable, "plot_rates.py"], cwd=out1,
                              capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        assert (out1 / "rates_replot.png").exists()


class TestCliEndToEnd:
    def _write_cfg(self, tmp_path, extra=""):
        p = tmp_path / "run.cfg"
        p.write_text(
            "regime = mild_seq\nn_grid = 64,128,256,512\nreplications = 20\n"
            "head_n = 1024\ndraws_per_replication = 100\nseed = 99\n" + extra
        )
        return p

    def test_rates_command(self, tmp_path, capsys):
        cfg = self._write_cfg(tmp_path)
        code = main(["rates", "--config", str(cfg), "--out", str(tmp_path / "out")])
        assert code == 0
        assert (tmp_path / "out" / "manifest.txt").exists()
        text = (tmp_path / "out" / "rates.txt").read_text()
        assert "inverse_exponent = 0.2" in text
        assert "direct_exponent = 0.4" in text

    def test_contract_command_outputs(self, tmp_path):
        cfg = self._write_cfg(tmp_path, "slope_tol = 0.5\n")
        out = tmp_path / "out"
        code = main(["contract", "--config", str(cfg), "--out", str(out)])
        assert code == 0
        for name in ("manifest.txt", "rates.csv", "rates.png", "plot_rates.py", "contract.txt"):
            assert (out / name).exists(), name
        man = (out / "manifest.txt").read_text()
        assert "version = " in man and "seed = 99" in man

    def test_contract_determinism_byte_identical(self, tmp_path):
        cfg = self._write_cfg(tmp_path, "slope_tol = 0.5\n")
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        assert main(["contract", "--config", str(cfg), "--out", str(out1)]) == 0
        assert main(["contract", "--config", str(cfg), "--out", str(out2)]) == 0
        assert (out1 / "rates.csv").read_bytes() == (out2 / "rates.csv").read_bytes()

    def test_seed_override_changes_csv(self, tmp_path):
        cfg = self._write_cfg(tmp_path, "slope_tol = 0.5\n")
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        assert main(["contract", "--config", str(cfg), "--out", str(out1)]) == 0
        assert main(["contract", "--config", str(cfg), "--out", str(out2), "--seed", "5"]) == 0
        assert (out1 / "rates.csv").read_bytes() != (out2 / "rates.csv").read_bytes()

    def test_bad_key_exit_code(self, tmp_path, capsys):
        cfg = self._write_cfg(tmp_path)
        code = main(["contract", "--config", str(cfg), "--set", "nope=1",
                     "--out", str(tmp_path / "out")])
        assert code == 2

    def test_report_command(self, tmp_path):
        cfg = self._write_cfg(tmp_path)
        out = tmp_path / "out"
        code = main(["report", "--config", str(cfg), "--out", str(out)])
        assert code == 0
        rows = read_csv_rows(out / "report.csv")
        assert rows and all(np.isfinite(r.implied_radius) for r in rows)

    def test_modulus_command(self, tmp_path):
        cfg = self._write_cfg(tmp_path)
        out = tmp_path / "out"
        code = main(["modulus", "--config", str(cfg), "--out", str(out)])
        assert code == 0
        assert "chain:" in (out / "modulus.txt").read_text()


class TestCliExitCodes:
    def test_failed_assertion_exits_nonzero(self, tmp_path, capsys):
        p = tmp_path / "run.cfg"
        # impossible tolerance: the fitted slope cannot match to 1e-6
        p.write_text(
            "regime = mild_seq\nn_grid = 64,128,256,512\nreplications = 20\n"
            "head_n = 1024\ndraws_per_replication = 100\nseed = 99\n"
            "slope_tol = 1e-6\n"
        )
        code = main(["contract", "--config", str(p), "--out", str(tmp_path / "out")])
        assert code == 1
        assert "FAIL" in capsys.readouterr().err
