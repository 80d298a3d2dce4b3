import csv
import json
import math

import pytest

from qpurify import io
from qpurify.cli import ConfigError, load_config, main
from qpurify.models import amplitude_damping


def write_config(tmp_path, **fields):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(fields))
    return path


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# config_sha256=")
    return list(csv.DictReader(lines[1:]))


def run(cmd, cfg, out, *extra):
    return main([cmd, "--config", str(cfg), "--out", str(out), *extra])


AD = {"type": "amplitude_damping", "a": 0.75}


class TestSimulate:
    def test_single_row(self, tmp_path):
        cfg = write_config(tmp_path, model=AD, steps=0, samples=1)
        assert run("simulate", cfg, tmp_path / "o") == 0
        rows = read_csv(tmp_path / "o" / "ensemble.csv")
        assert len(rows) == 1
        assert float(rows[0]["mean_lyapunov"]) == 1.0

    def test_rerun_identical(self, tmp_path):
        cfg = write_config(tmp_path, model=AD, steps=10, samples=50, per_sample=True)
        run("simulate", cfg, tmp_path / "a")
        run("simulate", cfg, tmp_path / "b", "--threads", "4")
        for name in ("ensemble.csv", "samples.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_seed_flag_overrides(self, tmp_path):
        cfg = write_config(tmp_path, model=AD, steps=5, samples=20, seed=1)
        run("simulate", cfg, tmp_path / "a")
        run("simulate", cfg, tmp_path / "b", "--seed", "2")
        a = (tmp_path / "a" / "ensemble.csv").read_text()
        b = (tmp_path / "b" / "ensemble.csv").read_text()
        assert a != b
        assert "seed=2" in b.splitlines()[0]


class TestRates:
    def test_amplitude_damping(self, tmp_path):
        cfg = write_config(tmp_path, model=AD, p_list=[1], steps=4)
        assert run("rates", cfg, tmp_path / "o") == 0
        rows = read_csv(tmp_path / "o" / "rates.csv")
        assert float(rows[0]["gamma_hat"]) == pytest.approx(0.693147, abs=1e-6)
        bounds = read_csv(tmp_path / "o" / "bounds.csv")
        assert [float(r["bound"]) for r in bounds] == pytest.approx([2.0**-n for n in range(5)])

    def test_unitary(self, tmp_path):
        model = {"type": "random_unitary", "d": 3, "probs": [0.5, 0.5], "seed": 1}
        cfg = write_config(tmp_path, model=model, p_list=[1, 2], restarts=3)
        run("rates", cfg, tmp_path / "o")
        for r in read_csv(tmp_path / "o" / "rates.csv"):
            assert abs(float(r["gamma_hat"])) <= 1e-9


class TestDarkspace:
    def report(self, tmp_path, model):
        cfg = write_config(tmp_path, model=model, restarts=4)
        assert run("darkspace", cfg, tmp_path / "o") == 0
        text = (tmp_path / "o" / "darkspace.txt").read_text()
        return dict(line.split("=", 1) for line in text.splitlines()[1:])

    def test_unitary(self, tmp_path):
        rep = self.report(tmp_path, {"type": "random_unitary", "d": 2, "probs": [1.0], "seed": 0})
        assert rep["verdict"] == "DARK-CANDIDATE"

    def test_rank_one(self, tmp_path):
        rep = self.report(tmp_path, {"type": "rank_one", "d": 3, "seed": 0})
        assert rep["verdict"] == "PURIFYING"
        assert rep["p_bar_operational"] == "1"
        rows = read_csv(tmp_path / "o" / "moments.csv")
        assert rows[0]["word_length"] == "1"


class TestStability:
    def test_exact_filter(self, tmp_path):
        cfg = write_config(tmp_path, model=AD, initial_state={"pure": 1}, filter_state={"pure": 1},
                           steps=5, samples=20)
        assert run("stability", cfg, tmp_path / "o") == 0
        rows = read_csv(tmp_path / "o" / "stability.csv")
        assert all(float(r["mean_one_minus_fidelity"]) == 0.0 for r in rows)

    def test_constant(self, tmp_path):
        cfg = write_config(tmp_path, model={"type": "amplitude_damping", "a": 0.5},
                           initial_state={"pure": 1}, filter_state="maximally_mixed",
                           steps=30, samples=5000)
        assert run("stability", cfg, tmp_path / "o") == 0
        text = (tmp_path / "o" / "stability.txt").read_text()
        assert f"C={math.sqrt(2)!r}" in text or "C=1.41421356237309" in text
        assert "passed=true" in text

    def test_support_violation_is_config_error(self, tmp_path, capsys):
        cfg = write_config(tmp_path, model=AD, initial_state="maximally_mixed",
                           filter_state={"pure": 0}, steps=3, samples=2)
        assert run("stability", cfg, tmp_path / "o") == 2
        assert "support" in capsys.readouterr().err

    def test_needs_filter(self, tmp_path):
        cfg = write_config(tmp_path, model=AD)
        assert run("stability", cfg, tmp_path / "o") == 2


class TestSweep:
    def test_single_point_matches_rates(self, tmp_path):
        model = {"type": "spin_chain", "n_qubits": 2}
        sweep = {"param1": "J", "values1": [1.0], "param2": "tau", "values2": [1.0], "p": 2}
        cfg = write_config(tmp_path, model=model, p_list=[2], restarts=4, steps=10, samples=20,
                           sweep=sweep)
        assert run("sweep", cfg, tmp_path / "s") == 0
        assert run("rates", cfg, tmp_path / "r") == 0
        heat = read_csv(tmp_path / "s" / "heatmap.csv")
        rates = read_csv(tmp_path / "r" / "rates.csv")
        assert len(heat) == 1
        assert heat[0]["gamma_hat"] == rates[0]["gamma_hat"]

    def test_grid(self, tmp_path):
        sweep = {"param1": "J", "values1": [0.5, 1.0, 1.5, 2.0],
                 "param2": "tau", "values2": [0.5, 1.0, 1.5, 2.0], "p": 2}
        cfg = write_config(tmp_path, model={"type": "spin_chain", "n_qubits": 2}, restarts=3,
                           steps=10, samples=20, sweep=sweep)
        assert run("sweep", cfg, tmp_path / "s") == 0
        rows = read_csv(tmp_path / "s" / "heatmap.csv")
        assert len(rows) == 16
        for r in rows:
            for key in ("gamma_hat", "gamma_hat_normalized", "gamma_emp"):
                assert math.isfinite(float(r[key]))
            assert float(r["gamma_hat"]) >= 0

    def test_diagonal_hamiltonian_dark(self, tmp_path):
        sweep = {"param1": "Bx", "values1": [0.0], "param2": "Bz", "values2": [0.0], "p": 1}
        cfg = write_config(tmp_path, model={"type": "spin_chain", "n_qubits": 3, "J": 1.3},
                           restarts=3, steps=5, samples=10, sweep=sweep)
        run("sweep", cfg, tmp_path / "s")
        assert float(read_csv(tmp_path / "s" / "heatmap.csv")[0]["gamma_hat"]) <= 1e-9


class TestConfig:
    def test_missing_file(self, tmp_path):
        assert main(["rates", "--config", str(tmp_path / "nope.json")]) == 2

    def test_unknown_field(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path, model=AD, colour="red"))

    def test_bad_sizes(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path, model=AD, samples=0))
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path, model=AD, p_list=[]))

    def test_channel_file_model(self, tmp_path):
        io.save_channel(amplitude_damping(0.75), tmp_path / "ch.json")
        cfg = write_config(tmp_path, model={"type": "file", "path": "ch.json"}, p_list=[1])
        assert run("rates", cfg, tmp_path / "o") == 0
        rows = read_csv(tmp_path / "o" / "rates.csv")
        assert float(rows[0]["lambda_hat"]) == pytest.approx(0.5)

    def test_missing_referenced_file(self, tmp_path):
        cfg = write_config(tmp_path, model={"type": "file", "path": "absent.json"})
        assert run("rates", cfg, tmp_path / "o") == 2

    def test_bad_model_param(self, tmp_path):
        cfg = write_config(tmp_path, model={"type": "amplitude_damping", "a": 3})
        assert run("rates", cfg, tmp_path / "o") == 2

    def test_hash_ignores_output_and_threads(self, tmp_path):
        path = write_config(tmp_path, model=AD)
        a = load_config(path, {"out": "x", "threads": 1})
        b = load_config(path, {"out": "y", "threads": 4})
        c = load_config(path, {"seed": 9})
        assert a.digest() == b.digest() != c.digest()

    def test_numerical_violation_exit_code(self, tmp_path, monkeypatch):
        import qpurify.cli as cli
        from qpurify.errors import NormalizationDrift

        def boom(cfg):
            raise NormalizationDrift("drift")

        monkeypatch.setitem(cli.COMMANDS, "simulate", boom)
        assert run("simulate", write_config(tmp_path, model=AD), tmp_path / "o") == 3
