import json
import os

import numpy as np
import pytest

from obfarx.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, main
from obfarx.config import ConfigError, parse_config_text
from obfarx.records import CSV_HEADER


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_csv(path):
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


class TestParseConfig:
    def test_minimal_defaults(self):
        cfg = parse_config_text("mode = regret\nseeds = 1..3\n")
        assert cfg.mode == "regret"
        assert cfg.seeds == (1, 2, 3)
        assert cfg.q == 10
        assert cfg.eps_reg == 1e-8
        assert cfg.condition_cap == 1e12
        assert cfg.per_decade == 8
        assert cfg.plant_source == "random"

    def test_benchmark_mode_defaults(self):
        cfg = parse_config_text("mode = bench-diffusion\n")
        assert cfg.plant_source == "diffusion"
        assert cfg.condition_cap == 1e6  # conservative invertibility guard
        assert cfg.alpha_min == 0.005
        assert cfg.alpha_max == 0.02
        assert cfg.r_noise == 0.01
        assert cfg.dt == 0.1
        assert cfg.total_time == 200.0

    def test_unknown_key_names_key_and_line(self):
        with pytest.raises(ConfigError, match=r"line 2: unknown key 'predictor.polse'"):
            parse_config_text("mode = regret\npredictor.polse = (0.4, 0)\n")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate key"):
            parse_config_text("mode = regret\nmode = selftest\n")

    def test_bad_pole_modulus_names_index(self):
        with pytest.raises(ConfigError, match=r"pole 1 has modulus 1.2"):
            parse_config_text("mode = regret\npredictor.poles = (0.4, 0) (1.2, 0)\n")

    def test_type_mismatch(self):
        with pytest.raises(ConfigError, match="expects int"):
            parse_config_text("mode = regret\npredictor.q = two\n")

    def test_comments_and_blank_lines(self):
        cfg = parse_config_text("# a comment\n\nmode = selftest  # trailing\n")
        assert cfg.mode == "selftest"

    def test_seed_list_forms(self):
        assert parse_config_text("mode = selftest\nseeds = 4\n").seeds == (4,)
        assert parse_config_text("mode = selftest\nseeds = 2,4,8\n").seeds == (2, 4, 8)
        assert parse_config_text("mode = selftest\nseeds = 5..8\n").seeds == (5, 6, 7, 8)

    def test_echo_is_byte_stable(self):
        text = (
            "mode = bench-diffusion\nseeds = 1..20\npredictor.q = 10\n"
            "predictor.poles = (0.0, 0.0)\ndiffusion.total_time = 200.0\n"
        )
        a = parse_config_text(text).echo_text()
        b = parse_config_text(text).echo_text()
        assert a == b
        assert "diffusion.total_time = 200.0" in a
        assert "diffusion.r_noise = 0.01" in a

    def test_benchmark_echo_golden(self):
        # frozen echo of the full benchmark configuration; any change to a
        # default or to the echo format must be deliberate
        cfg = parse_config_text("mode = bench-diffusion\nseeds = 1..20\n")
        golden = (
            "checkpoints.per_decade = 8\n"
            "diffusion.alpha_max = 0.02\n"
            "diffusion.alpha_min = 0.005\n"
            "diffusion.dt = 0.1\n"
            "diffusion.full = false\n"
            "diffusion.input_variance = 1.0\n"
            "diffusion.q_noise = 0.0\n"
            "diffusion.r_noise = 0.01\n"
            "diffusion.source_mode = neighbor\n"
            "diffusion.total_time = 200.0\n"
            "mode = bench-diffusion\n"
            "plant.dim = 4\n"
            "plant.seed = 7\n"
            "plant.source = diffusion\n"
            "predictor.condition_cap = 1000000.0\n"
            "predictor.eps_reg = 1e-08\n"
            "predictor.poles = (0.0, 0.0)\n"
            "predictor.q = 10\n"
            "predictor.resolve_every = 1\n"
            "predictor.update_mode = batch\n"
            "regret.delta = 1e-09\n"
            "save_coefficients = false\n"
            "seeds = 1,2,3,4,5,6,7,8,9,10,11,12,13,14,15,16,17,18,19,20\n"
            "sweep.q_max = 8\n"
            "sweep.q_min = 1\n"
            "tau.lam = (0.9, 0.0)\n"
            "tau.mu_grid = -0.9,0.9,0.1\n"
        )
        assert cfg.echo_text() == golden


class TestCliRuns:
    def test_selftest_exit_zero(self, capsys):
        assert main(["selftest"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "PASS" in out and "FAIL" not in out

    def test_config_error_exit_code(self, tmp_path, capsys):
        cfg = write(tmp_path, "bad.cfg", "mode = regret\nnope = 1\n")
        assert main(["regret", "--config", cfg]) == EXIT_CONFIG

    def test_missing_config_file(self):
        assert main(["regret", "--config", "/nonexistent/x.cfg"]) == EXIT_CONFIG

    def test_bench_diffusion_outputs_and_determinism(self, tmp_path):
        cfg = write(
            tmp_path,
            "bench.cfg",
            "mode = bench-diffusion\nseeds = 1..2\ndiffusion.total_time = 20\npredictor.q = 4\n",
        )
        out1, out2 = str(tmp_path / "o1"), str(tmp_path / "o2")
        assert main(["bench-diffusion", "--config", cfg, "--out", out1]) == EXIT_OK
        assert main(["bench-diffusion", "--config", cfg, "--out", out2]) == EXIT_OK
        csv1 = read_csv(os.path.join(out1, "results.csv"))
        csv2 = read_csv(os.path.join(out2, "results.csv"))
        assert csv1 == csv2
        assert csv1.splitlines()[0] == CSV_HEADER
        with open(os.path.join(out1, "manifest.json")) as fh:
            m1 = json.load(fh)
        with open(os.path.join(out2, "manifest.json")) as fh:
            m2 = json.load(fh)
        assert m1 == m2
        assert m1["seeds"] == [1, 2]
        assert os.path.exists(os.path.join(out1, "region.txt"))
        with open(os.path.join(out1, "summary.json")) as fh:
            summary = json.load(fh)
        assert summary["n_failed"] == 0
        assert summary["mean_bias"] > 0

    def test_parallel_matches_serial(self, tmp_path):
        cfg = write(
            tmp_path,
            "bench.cfg",
            "mode = bench-diffusion\nseeds = 1..3\ndiffusion.total_time = 15\npredictor.q = 3\n",
        )
        out1, out2 = str(tmp_path / "serial"), str(tmp_path / "par")
        assert main(["bench-diffusion", "--config", cfg, "--out", out1, "--jobs", "1"]) == EXIT_OK
        assert main(["bench-diffusion", "--config", cfg, "--out", out2, "--jobs", "2"]) == EXIT_OK
        assert read_csv(os.path.join(out1, "results.csv")) == read_csv(
            os.path.join(out2, "results.csv")
        )

    def test_seeds_flag_overrides(self, tmp_path):
        cfg = write(
            tmp_path,
            "bench.cfg",
            "mode = bench-diffusion\nseeds = 1..50\ndiffusion.total_time = 15\npredictor.q = 3\n",
        )
        out = str(tmp_path / "o")
        assert main(["bench-diffusion", "--config", cfg, "--out", out, "--seeds", "7..8"]) == EXIT_OK
        lines = read_csv(os.path.join(out, "results.csv")).splitlines()[1:]
        seeds = sorted({int(l.split(",")[0]) for l in lines})
        assert seeds == [7, 8]

    def test_regret_mode_with_coefficients(self, tmp_path):
        cfg = write(
            tmp_path,
            "regret.cfg",
            (
                "mode = regret\nseeds = 1..2\nhorizon = 2000\nplant.dim = 3\nplant.seed = 5\n"
                "plant.rho = 0.8\npredictor.poles = (0.4, 0)\npredictor.q = 2\n"
                "save_coefficients = true\n"
            ),
        )
        out = str(tmp_path / "o")
        assert main(["regret", "--config", cfg, "--out", out]) == EXIT_OK
        text = read_csv(os.path.join(out, "results.csv"))
        lines = text.splitlines()
        assert lines[0] == CSV_HEADER
        # alpha column empty for non-diffusion runs, bias columns filled
        first = lines[1].split(",")
        assert first[1] == ""
        assert float(first[3]) >= 0.0
        coeff_path = os.path.join(out, "coefficients_seed1.json")
        assert os.path.exists(coeff_path)
        with open(coeff_path) as fh:
            snaps = json.load(fh)
        some = next(iter(snaps.values()))
        assert some["rows"] == 1 and some["cols"] == 4
        assert len(some["data"]) == 4

    def test_tau_table_monotone_toward_match(self, tmp_path):
        cfg = write(
            tmp_path,
            "tau.cfg",
            "mode = tau-table\ntau.lam = (0.7, 0)\ntau.mu_grid = -0.8..0.8:0.1\n",
        )
        out = str(tmp_path / "o")
        assert main(["tau-table", "--config", cfg, "--out", out]) == EXIT_OK
        with open(os.path.join(out, "summary.json")) as fh:
            summary = json.load(fh)
        mus = np.asarray(summary["mu_values"])
        taus = np.asarray(summary["tau_values"])
        k = int(np.argmin(np.abs(mus - 0.7)))
        assert np.all(np.diff(taus[: k + 1]) < 0)  # decreasing toward the match
        assert taus[k] == np.min(taus)

    def test_numerical_failure_exit_code(self, tmp_path):
        # an unstable plant file: the closed loop has no stationary state
        from obfarx.records import matrix_to_json

        payload = {
            "A": matrix_to_json([[1.5]]),
            "B": matrix_to_json([[1.0]]),
            "C": matrix_to_json([[1.0]]),
            "D": matrix_to_json([[0.0]]),
            "Q": matrix_to_json([[1.0]]),
            "R": matrix_to_json([[1.0]]),
        }
        plant_path = tmp_path / "plant.json"
        plant_path.write_text(json.dumps(payload))
        cfg = write(
            tmp_path,
            "r.cfg",
            (
                "mode = regret\nseeds = 1\nhorizon = 100\nplant.source = file\n"
                f"plant.file = {plant_path}\npredictor.q = 1\n"
            ),
        )
        assert main(["regret", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_NUMERICAL

    def test_bias_sweep_outputs(self, tmp_path):
        cfg = write(
            tmp_path,
            "sweep.cfg",
            (
                "mode = bias-sweep\nplant.dim = 3\nplant.seed = 5\nplant.rho = 0.8\n"
                "predictor.poles = (0.4, 0)\nsweep.q_min = 1\nsweep.q_max = 4\n"
            ),
        )
        out = str(tmp_path / "o")
        assert main(["bias-sweep", "--config", cfg, "--out", out]) == EXIT_OK
        lines = read_csv(os.path.join(out, "results.csv")).splitlines()
        assert lines[0] == CSV_HEADER
        assert len(lines) == 5
        # checkpoint_N column carries the basis count; biases decrease with q
        ns = [int(l.split(",")[5]) for l in lines[1:]]
        biases = [float(l.split(",")[3]) for l in lines[1:]]
        bounds = [float(l.split(",")[4]) for l in lines[1:]]
        assert ns == [1, 2, 3, 4]
        assert all(b2 <= b1 + 1e-12 for b1, b2 in zip(biases, biases[1:]))
        assert all(bd >= bi - 1e-12 for bd, bi in zip(bounds, biases))
        with open(os.path.join(out, "summary.json")) as fh:
            summary = json.load(fh)
        assert summary["alpha_fit"] > 0
