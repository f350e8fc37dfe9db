import numpy as np
import pytest

from inmux.cli import ConfigError, load_config, main
from conftest import PRINTED_INSTANCES


def read_artifact(path):
    header, columns, rows = [], None, []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                header.append(line)
            elif columns is None:
                columns = line.split(",")
            else:
                rows.append(line.split(","))
    return header, columns, rows


class TestConfig:
    def test_defaults_load(self):
        cfg = load_config(None)
        assert cfg["setpoint"] == [0.49, 0.37]
        assert cfg["mpc"]["ku"] == 2.0

    def test_unknown_key_rejected(self, tmp_path):
        bad = tmp_path / "bad.yaml"
        bad.write_text("basins:\n  resolutionn: 32\n")
        with pytest.raises(ConfigError, match="basins.resolutionn"):
            load_config(str(bad))

    def test_yaml_error_reports_line(self, tmp_path):
        bad = tmp_path / "bad.yaml"
        bad.write_text("setpoint: [0.49, 0.37\nmpc: {}\n")
        with pytest.raises(ConfigError, match="line"):
            load_config(str(bad))

    def test_plant_overrides_pass_through(self, tmp_path):
        f = tmp_path / "cfg.yaml"
        f.write_text("plant:\n  k40: 0.007\n")
        cfg = load_config(str(f))
        assert cfg["plant"] == {"k40": 0.007}

    def test_exit_code_two_on_config_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.yaml"
        bad.write_text("nope: 1\n")
        rc = main(["--config", str(bad), "instances"])
        assert rc == 2
        assert "config error" in capsys.readouterr().err


class TestInstancesCommand:
    def test_writes_three_instances(self, tmp_path, capsys):
        rc = main(["--out", str(tmp_path), "instances", "--r", "0.49,0.37"])
        assert rc == 0
        header, columns, rows = read_artifact(tmp_path / "instances.csv")
        assert columns[:5] == ["s", "u1", "u2", "y1", "y2"]
        assert len(rows) == 3
        got = np.array([[float(r[1]), float(r[2])] for r in rows])
        assert np.allclose(got, PRINTED_INSTANCES, atol=1e-3)
        assert any(line.startswith("# backend = ") for line in header)
        assert any("setpoint = [0.49, 0.37]" in line for line in header)

    def test_empty_box_is_not_an_error(self, tmp_path):
        rc = main(["--out", str(tmp_path), "instances", "--box-u1", "0.86,0.88"])
        assert rc == 0
        _, _, rows = read_artifact(tmp_path / "instances.csv")
        assert rows == []

    def test_byte_identical_reruns(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["--out", str(out1), "instances"]) == 0
        assert main(["--out", str(out2), "instances"]) == 0
        a = (out1 / "instances.csv").read_bytes()
        b = (out2 / "instances.csv").read_bytes()
        assert a == b


class TestAnalysisCommands:
    def test_gains_table(self, tmp_path):
        rc = main(["--out", str(tmp_path), "gains"])
        assert rc == 0
        _, columns, rows = read_artifact(tmp_path / "gains.csv")
        assert len(rows) == 3
        g11 = float(rows[0][columns.index("g11")])
        assert g11 == pytest.approx(-1.89, abs=0.01)

    def test_table1_sign_sets(self, tmp_path):
        rc = main(["--out", str(tmp_path), "table1"])
        assert rc == 0
        _, columns, rows = read_artifact(tmp_path / "table1.csv")
        direct = [r[columns.index("signs_direct")] for r in rows]
        swapped = [r[columns.index("signs_swapped")] for r in rows]
        assert direct == ["-+", "++", "+-,-+"]
        assert swapped == ["++,--", "-+", "--"]
        md = (tmp_path / "table1.md").read_text()
        assert "| y = r | u | G | RGA |" in md

    def test_iloop_eigs(self, tmp_path, capsys):
        rc = main(["--out", str(tmp_path), "iloop-eigs",
                   "--pairing", "swapped", "--signs", "++", "--k", "0.01"])
        assert rc == 0
        _, columns, rows = read_artifact(tmp_path / "iloop_eigs.csv")
        flags = [int(r[columns.index("hurwitz")]) for r in rows]
        assert flags == [1, 0, 0]

    def test_continue_coverage(self, tmp_path, capsys):
        rc = main(["--out", str(tmp_path), "continue", "--fix", "y2"])
        assert rc == 0
        assert (tmp_path / "continue_y2fixed_fwd.csv").exists()
        assert (tmp_path / "continue_y2fixed_bwd.csv").exists()
        out = capsys.readouterr().out
        assert "coverage at the setpoint" in out


class TestSimulationCommands:
    def test_iloop_sim_verdict(self, tmp_path, capsys):
        rc = main(["--out", str(tmp_path), "iloop-sim",
                   "--pairing", "swapped", "--signs", "++", "--k", "0.01",
                   "--u0", "0.9154,0.5799", "--x0", "0.49,0.37",
                   "--t-final", "3000"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "verdict: converged-instance-1" in out
        _, columns, rows = read_artifact(tmp_path / "iloop_traj.csv")
        assert columns == ["t", "x1", "x2", "u1", "u2"]
        assert len(rows) > 10

    def test_mpc_sim_trajectory(self, tmp_path, capsys):
        rc = main(["--out", str(tmp_path), "mpc-sim",
                   "--x0", "0.49,0.37", "--u0", "1.043191,0.332638",
                   "--steps", "40"])
        assert rc == 0
        _, columns, rows = read_artifact(tmp_path / "mpc_traj.csv")
        assert columns == ["t", "x1", "x2", "u1", "u2", "cost", "grad_norm",
                           "optimizer_status"]
        assert "converged-instance-2" in capsys.readouterr().out

    def test_basins_artifacts(self, tmp_path, capsys):
        rc = main(["--out", str(tmp_path), "basins", "--res", "6",
                   "--refine", "1", "--max-steps", "400", "--threads", "1",
                   "--slice", "u"])
        assert rc == 0
        assert (tmp_path / "basins_L0.csv").exists()
        assert (tmp_path / "basins_L1.csv").exists()
        assert (tmp_path / "basins_boundary.csv").read_text().count("\n") > 2
        pgm = (tmp_path / "basins_L0.pgm").read_bytes()
        assert pgm.startswith(b"P5\n6 6\n255\n")
        _, columns, rows = read_artifact(tmp_path / "basins_L0.csv")
        assert columns == ["i", "j", "coord1", "coord2", "label", "steps"]
        assert len(rows) == 36


class TestFlagPrecedence:
    def test_flags_override_config_file(self, tmp_path):
        f = tmp_path / "cfg.yaml"
        f.write_text("instances:\n  u1_range: [0.85, 1.15]\n")
        rc = main(["--config", str(f), "--out", str(tmp_path), "instances",
                   "--box-u1", "0.9,0.95"])
        assert rc == 0
        header, _, rows = read_artifact(tmp_path / "instances.csv")
        assert len(rows) == 1
        assert any("instances.u1_range = [0.9, 0.95]" in h for h in header)
