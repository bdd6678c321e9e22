import os

import numpy as np
import pytest

from homogflow.cli import main
from homogflow.grid import Mesh, ScalarField, field_from_csv, field_to_csv


CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")


def write_small_converge(path, sigma=0.5):
    # zero-noise variants coincide with the averaged run, so the converge
    # exit-code contract (medians nonincreasing) holds by construction
    alpha = ('kind = "constant"\nc0 = 0.7' if sigma == 0.0 else
             'kind = "separable"\nc0 = 0.8\nc1 = 0.4\n'
             'saturation = "tanh_mix"\nw1 = 1.0\nw2 = -0.7')
    path.write_text(f"""
study = "converge"
seed = 5
[mesh]
dimension = 1
n = 64
cell_n = 64
[time]
T = 0.1
dt = 0.003125
[epsilon]
values = [0.5, 0.25]
[replicas]
count = 2
[coefficients.A1]
kind = "scalar_sin"
base = 2.0
amplitude = 1.0
[coefficients.alpha]
{alpha}
[coefficients.f1]
kind = "sine_decay"
amplitude = 1.0
[coefficients]
beta = [[1.0, 0.5], [0.5, 1.0]]
[noise]
truncation = 8
sigma1 = {sigma}
sigma2 = {sigma}
[initial]
u1 = {{ kind = "sine", mode = 1 }}
u2 = {{ kind = "sine", mode = 2, amplitude = 0.5 }}
[sdecomp]
enabled = false
""")


class TestExitCodes:
    def test_converge_success(self, tmp_path):
        cfg = tmp_path / "study.toml"
        write_small_converge(cfg, sigma=0.0)
        out = tmp_path / "out"
        code = main(["converge", "--config", str(cfg), "--out", str(out)])
        assert code == 0
        assert (out / "convergence.csv").exists()
        assert (out / "summary.csv").exists()

    def test_config_error_is_2(self, tmp_path):
        cfg = tmp_path / "bad.toml"
        cfg.write_text('study = "nope"\n')
        assert main(["converge", "--config", str(cfg)]) == 2

    def test_missing_file_is_2(self):
        assert main(["validate", "--config", "/nonexistent.toml"]) == 2

    def test_validate_passes_shipped_config(self):
        path = os.path.join(CONFIG_DIR, "converge_1d.toml")
        assert main(["validate", "--config", path]) == 0

    def test_cell_with_fields(self, tmp_path):
        cfg = tmp_path / "study.toml"
        write_small_converge(cfg)
        out = tmp_path / "cellout"
        code = main(["cell", "--config", str(cfg), "--out", str(out),
                     "--fields"])
        assert code == 0
        assert (out / "a_eff.csv").exists()
        assert (out / "correctors.csv").exists()

    def test_simulate_outputs(self, tmp_path):
        cfg = tmp_path / "study.toml"
        write_small_converge(cfg)
        out = tmp_path / "sim"
        assert main(["simulate", "--config", str(cfg),
                     "--out", str(out)]) == 0
        header = (out / "trajectory.csv").read_text().splitlines()[0]
        assert header == "time,x1,u1,u2,v1,v2"
        assert (out / "diagnostics.csv").exists()

    def test_average_table(self, tmp_path):
        cfg = tmp_path / "study.toml"
        write_small_converge(cfg)
        out = tmp_path / "avg"
        assert main(["average", "--config", str(cfg), "--out", str(out)]) == 0
        lines = (out / "alpha_table.csv").read_text().splitlines()
        assert lines[0] == "xi1,xi2,s1,s2,alpha_bar"
        assert len(lines) == 1 + 33 * 33

    def test_seed_override_changes_rows(self, tmp_path):
        cfg = tmp_path / "study.toml"
        write_small_converge(cfg)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        main(["converge", "--config", str(cfg), "--out", str(out_a)])
        main(["converge", "--config", str(cfg), "--out", str(out_b),
              "--seed", "999"])
        assert (out_a / "convergence.csv").read_bytes() \
            != (out_b / "convergence.csv").read_bytes()


class TestFieldCsv:
    def test_round_trip(self, tmp_path):
        mesh = Mesh(2, 8)
        rng = np.random.default_rng(0)
        f = ScalarField(mesh, rng.standard_normal(mesh.ndof))
        path = str(tmp_path / "field.csv")
        field_to_csv(f, path)
        back = field_from_csv(mesh, path)
        assert np.array_equal(back.values, f.values)
