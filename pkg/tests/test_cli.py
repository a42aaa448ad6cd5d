"""Config parsing, subcommand behavior, exit codes, output determinism."""
import textwrap

import numpy as np
import pytest

from sgboltz import cli
from sgboltz.config import parse_config
from sgboltz.cli import main

BASE = """\
[grid]
S = 4.0
N = 6
K = 1

[kernel]
gamma = 0.0
b = 1.0 0.2

[ic]
family = bkw
t0 = 0.5

[time]
integrator = rk4
dt = 0.01
t_end = 0.05

[output]
diag_every = 2
"""


@pytest.fixture(scope="module")
def wdir(tmp_path_factory):
    return tmp_path_factory.mktemp("wcache")


@pytest.fixture()
def cfg(tmp_path, wdir):
    path = tmp_path / "run.ini"
    path.write_text(BASE + f"weights_dir = {wdir}\n")
    return path


def write_cfg(tmp_path, text, name="alt.ini"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(text))
    return path


def test_parse_minimal_config(cfg):
    config = parse_config(cfg)
    assert config.N == 6 and config.K == 1
    assert config.R == 8.0
    assert config.L == pytest.approx((3 + np.sqrt(2)) / 2 * 4.0, rel=1e-15)
    assert config.kernel.b_coeffs == (1.0, 0.2)
    assert config.ic_family == "bkw"
    assert config.ic_params == {"t0": 0.5}


def test_parse_defaults_fill_in(tmp_path):
    p = write_cfg(tmp_path, """\
        [grid]
        S = 4.0
        N = 4
        K = 0

        [kernel]
        gamma = 0.0
        """)
    config = parse_config(p)
    assert config.integrator == "rk4"
    assert config.dt == 0.01 and config.t_end == 1.0
    assert config.kernel.b_coeffs == (1.0,)
    assert config.out_dir is None and config.weights_dir is None


def test_set_override_replaces_value(cfg):
    config = parse_config(cfg, overrides=["grid.N=32", "time.dt=0.005"])
    assert config.N == 32
    assert config.dt == 0.005


def test_unknown_key_rejected(tmp_path):
    p = write_cfg(tmp_path, BASE + "cadence = 5\n")
    with pytest.raises(ValueError, match="output.cadence: unknown key"):
        parse_config(p)


def test_unknown_section_rejected(tmp_path):
    p = write_cfg(tmp_path, BASE + "\n[mesh]\nh = 0.1\n")
    with pytest.raises(ValueError, match="mesh: unknown section"):
        parse_config(p)


def test_bad_value_reports_key_path(tmp_path):
    p = write_cfg(tmp_path, BASE.replace("N = 6", "N = six"))
    with pytest.raises(ValueError, match="grid.N: invalid value 'six'"):
        parse_config(p)


def test_required_key_missing(tmp_path):
    p = write_cfg(tmp_path, "[grid]\nS = 4.0\nN = 4\nK = 0\n")
    with pytest.raises(ValueError, match="kernel.gamma: required key missing"):
        parse_config(p)


def test_kernel_validation_surfaces_key_path(cfg):
    with pytest.raises(ValueError, match="kernel.gamma"):
        parse_config(cfg, overrides=["kernel.gamma=1.5"])


def test_family_params_cross_checked(cfg):
    with pytest.raises(ValueError, match="unknown keys for bkw"):
        parse_config(cfg, overrides=["ic.separation=1.0"])


def test_malformed_set_syntax(cfg):
    with pytest.raises(ValueError, match="expected section.key=value"):
        parse_config(cfg, overrides=["grid.N"])
    with pytest.raises(ValueError, match="key must be section.key"):
        parse_config(cfg, overrides=["N=32"])


def test_parse_error_reports_line(tmp_path):
    p = write_cfg(tmp_path, "[grid]\nS = 4.0\nno delimiter here\n")
    with pytest.raises(ValueError, match=r"line\s+3"):
        parse_config(p)


def test_missing_file_is_validation_error(tmp_path):
    with pytest.raises(ValueError, match="cannot read"):
        parse_config(tmp_path / "nope.ini")


def test_main_requires_config(capsys):
    assert main(["run"]) == 1
    assert "--config" in capsys.readouterr().err


def test_main_no_subcommand_prints_help(capsys):
    assert main([]) == 1
    assert "SUBCOMMAND" in capsys.readouterr().out


def test_main_rejects_bad_threads(cfg, capsys):
    assert main(["run", "--config", str(cfg), "--threads", "0"]) == 1
    assert "threads" in capsys.readouterr().err


def test_run_writes_outputs_and_reruns_identically(cfg, tmp_path, capsys):
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    args = ["run", "--config", str(cfg),
            "--set", "output.snapshot_times=0.02 0.04"]
    assert main(args + ["--out", str(out1)]) == 0
    text = capsys.readouterr().out
    assert "R=8" in text and "final:" in text
    assert main(args + ["--out", str(out2)]) == 0
    for name in ("diagnostics.csv", "snapshot_000002.ksgf",
                 "snapshot_000004.ksgf"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_run_t_end_zero_single_record(cfg, tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg), "--set", "time.t_end=0.0",
                 "--out", str(out)]) == 0
    lines = (out / "diagnostics.csv").read_text().splitlines()
    assert len(lines) == 2  # header plus the initial record


def test_converge_n_outputs(cfg, tmp_path, capsys):
    out = tmp_path / "sweep"
    assert main(["converge-n", "--config", str(cfg), "--out", str(out),
                 "--values", "4,6"]) == 0
    rows = (out / "converge_n.csv").read_text().splitlines()
    assert rows[0] == "N,err_l2h1,neg_norm,status"
    r4, r6 = rows[1].split(","), rows[2].split(",")
    assert r4[0] == "4" and r6[0] == "6"
    assert float(r6[1]) < float(r4[1])  # error drops with resolution
    assert r4[3] == r6[3] == "ok"
    timings = (out / "timings.csv").read_text().splitlines()
    assert timings[0] == "N,seconds" and len(timings) == 3


def test_converge_n_self_reference_last_row_zero(cfg, tmp_path, capsys):
    out = tmp_path / "sweep"
    assert main(["converge-n", "--config", str(cfg), "--out", str(out),
                 "--values", "4,6", "--self-reference"]) == 0
    rows = (out / "converge_n.csv").read_text().splitlines()
    assert rows[2].split(",")[1] == "0"
    assert float(rows[1].split(",")[1]) > 0


def test_converge_k_against_reference(cfg, tmp_path, capsys):
    out = tmp_path / "sweep"
    assert main(["converge-k", "--config", str(cfg), "--out", str(out),
                 "--values", "0,1"]) == 0
    rows = (out / "converge_k.csv").read_text().splitlines()
    assert rows[0] == "K,err_l2h1,status"
    assert float(rows[2].split(",")[1]) < float(rows[1].split(",")[1])


def test_converge_k_self_reference_and_determinism(cfg, tmp_path, capsys):
    outs = []
    for name in ("s1", "s2"):
        out = tmp_path / name
        assert main(["converge-k", "--config", str(cfg), "--out", str(out),
                     "--values", "0,1,2", "--self-reference"]) == 0
        outs.append((out / "converge_k.csv").read_bytes())
    assert outs[0] == outs[1]
    rows = outs[0].decode().splitlines()
    assert rows[3].split(",")[1] == "0"


def test_converge_k_empty_values_usage_error(cfg, capsys):
    assert main(["converge-k", "--config", str(cfg), "--out", "/tmp",
                 "--values", ""]) == 1
    assert "empty value list" in capsys.readouterr().err


def test_converge_requires_out_dir(cfg, capsys):
    assert main(["converge-n", "--config", str(cfg),
                 "--values", "4,6"]) == 1
    assert "no output directory" in capsys.readouterr().err


def test_converge_k_needs_reference_family(cfg, tmp_path, capsys):
    # bkw's t0 does not apply to bi_gaussian: swap the whole ic section
    p = write_cfg(tmp_path, BASE.replace("family = bkw\nt0 = 0.5",
                                         "family = bi_gaussian"))
    assert main(["converge-k", "--config", str(p),
                 "--out", str(tmp_path / "s"), "--values", "0,1"]) == 1
    assert "no exact reference" in capsys.readouterr().err


def test_validate_ic_pass_and_fail(cfg, capsys):
    assert main(["validate-ic", "--config", str(cfg), "--set", "grid.N=16",
                 "--set", "grid.K=2"]) == 0
    assert "ic validation: PASS" in capsys.readouterr().out
    # N=6 leaves several percent of the mass in the projection tail
    assert main(["validate-ic", "--config", str(cfg)]) == 1
    assert "ic validation: FAIL" in capsys.readouterr().out


def test_validate_ic_support_guard(cfg, capsys):
    assert main(["validate-ic", "--config", str(cfg),
                 "--set", "grid.S=1.0"]) == 1
    assert "support exceeds" in capsys.readouterr().err


def test_oracle_check_guard_refuses_large_n(cfg, capsys):
    assert main(["oracle-check", "--config", str(cfg),
                 "--set", "grid.N=16"]) == 1
    assert "cost guard" in capsys.readouterr().err


def test_oracle_check_passes_and_threshold_exit(cfg, capsys, monkeypatch):
    args = ["oracle-check", "--config", str(cfg), "--set", "grid.N=4"]
    assert main(args) == 0
    out = capsys.readouterr().out
    assert "rhs vs oracle" in out and "PASS" in out
    # an unreachable tolerance must trip the threshold exit code
    monkeypatch.setattr(cli, "ORACLE_RHS_TOL", 1e-15)
    assert main(args) == 3
    assert "FAIL" in capsys.readouterr().out


def test_precompute_weights_creates_and_reuses_cache(cfg, tmp_path, capsys):
    wdir = tmp_path / "fresh"
    args = ["precompute-weights", "--config", str(cfg),
            "--set", f"output.weights_dir={wdir}"]
    assert main(args) == 0
    files = sorted(p.name for p in wdir.iterdir())
    assert len(files) == 1 and files[0].startswith("gtable_N6_")
    before = (wdir / files[0]).read_bytes()
    assert main(args) == 0
    assert (wdir / files[0]).read_bytes() == before
