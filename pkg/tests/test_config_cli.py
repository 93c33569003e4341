import json
import subprocess
import sys
from pathlib import Path

import pytest

from flockuq.cli import main, run_subcommand
from flockuq.config import ConfigError, default_config, parse_config, serialize_config

MINIMAL = """
[model]
N = 4
d = 2

[integrator]
dt = 0.01
T = 0.5
save_every = 10
"""

TINY = """
[model]
N = 4
d = 2
seed = 77

[integrator]
dt = 0.01
T = 0.5
save_every = 10

[uq]
quad_nodes = 3
mc_samples = 50

[sensitivity]
order = 1

[stability]
order = 1
"""


class TestParsing:
    def test_minimal_defaults(self):
        cfg = parse_config(MINIMAL)
        assert cfg.model.N == 4
        assert cfg.kernel.psi0 == 0.5  # default applied
        assert cfg.uq.quad_nodes == 16
        assert cfg.model.zero_momentum is True

    def test_negative_dt_names_field(self):
        with pytest.raises(ConfigError, match=r"integrator\.dt"):
            parse_config("[integrator]\ndt = -1\n")

    def test_unknown_key_reports_line(self):
        text = "[kernel]\npsi0 = 0.5\nfoo = 1\n"
        with pytest.raises(ConfigError, match="line 3"):
            parse_config(text)

    def test_unknown_section(self):
        with pytest.raises(ConfigError, match="unknown section"):
            parse_config("[plotting]\nstyle = dark\n")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config("[model]\nN = 3\nN = 4\n")

    def test_bad_number(self):
        with pytest.raises(ConfigError, match=r"model\.N"):
            parse_config("[model]\nN = many\n")

    def test_key_outside_section(self):
        with pytest.raises(ConfigError, match="outside"):
            parse_config("N = 3\n")

    def test_bool_forms(self):
        cfg = parse_config("[model]\nzero_momentum = no\n")
        assert cfg.model.zero_momentum is False

    def test_round_trip(self):
        cfg = parse_config(TINY)
        again = parse_config(serialize_config(cfg))
        assert again == cfg
        assert parse_config(serialize_config(default_config())) == default_config()

    def test_sigma_range(self):
        with pytest.raises(ConfigError, match=r"kernel\.sigmaK"):
            parse_config("[kernel]\nsigmaK = 1.0\n")


class TestCLI:
    def test_unknown_subcommand_exit_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["render", "--config", "x"])
        assert exc.value.code == 2

    def test_missing_config_file(self, tmp_path):
        rc = main(["simulate", "--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path)])
        assert rc == 2

    def test_simulate_deterministic(self, tmp_path):
        cfg_path = tmp_path / "exp.cfg"
        cfg_path.write_text(TINY)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["simulate", "--config", str(cfg_path), "--out", str(out1)]) == 0
        assert main(["simulate", "--config", str(cfg_path), "--out", str(out2)]) == 0
        b1 = (out1 / "trajectory.csv").read_bytes()
        b2 = (out2 / "trajectory.csv").read_bytes()
        assert b1 == b2
        head = b1.decode().splitlines()
        assert head[0].startswith("# schema: flockuq.trajectory")
        assert head[1] == "t,agent,comp,x,v"
        # 17-significant-digit floats round-trip
        row = head[2].split(",")
        assert float(row[3]) == float(format(float(row[3]), ".17g"))

    def test_seed_override_changes_artifact(self, tmp_path):
        cfg_path = tmp_path / "exp.cfg"
        cfg_path.write_text(TINY)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        main(["simulate", "--config", str(cfg_path), "--out", str(out1), "--seed", "1"])
        main(["simulate", "--config", str(cfg_path), "--out", str(out2), "--seed", "2"])
        assert (out1 / "trajectory.csv").read_bytes() != (out2 / "trajectory.csv").read_bytes()

    def test_flocking_artifacts(self, tmp_path):
        cfg = parse_config(TINY)
        assert run_subcommand("flocking", cfg, tmp_path) == 0
        data = json.loads((tmp_path / "flocking.json").read_text())
        assert data["schema"].startswith("flockuq.flocking")
        assert len(data["nodes"]) == 3
        node = data["nodes"][0]
        assert set(node) >= {"z", "condition_holds", "xM", "predicted_rate", "fitted_rate", "sup_X"}

    def test_sensitivity_artifacts(self, tmp_path):
        cfg = parse_config(TINY)
        assert run_subcommand("sensitivity", cfg, tmp_path) == 0
        lines = (tmp_path / "jets.csv").read_text().splitlines()
        assert lines[1] == "t,order,agent,comp,dx,dv"
        fd = json.loads((tmp_path / "fd_check.json").read_text())
        assert fd["results"][0]["order"] == 1

    def test_stability_artifacts(self, tmp_path):
        cfg = parse_config(TINY.replace("T = 0.5", "T = 25.0"))
        assert run_subcommand("stability", cfg, tmp_path) == 0
        data = json.loads((tmp_path / "stability.json").read_text())
        assert set(data) >= {"z", "psi_m", "M0", "sup_ratio", "delta_v_rate", "orders"}

    def test_uq_artifacts(self, tmp_path):
        cfg = parse_config(TINY)
        assert run_subcommand("uq", cfg, tmp_path) == 0
        lines = (tmp_path / "moments.csv").read_text().splitlines()
        assert lines[0].startswith("# schema: flockuq.moments")
        assert lines[1] == "t,quantity,mean,l2pi,hk,k"
        assert any(line.split(",")[1] == "V_norm" for line in lines[2:])

    def test_gronwall_subcommand(self, tmp_path):
        cfg = parse_config(TINY)
        assert run_subcommand("gronwall", cfg, tmp_path) == 0
        data = json.loads((tmp_path / "gronwall.json").read_text())
        assert data["passed"] is True

    def test_console_entrypoint(self):
        proc = subprocess.run([sys.executable, "-m", "flockuq.cli", "nonsense"],
                              capture_output=True, text=True)
        assert proc.returncode == 2
