import csv
import json

import pytest

from urllc_mimo import cli
from urllc_mimo.config import SystemConfig


def read_csv(path):
    with open(path) as fh:
        header = fh.readline()
        rows = list(csv.DictReader(fh))
    return json.loads(header[2:]), rows


def test_analytical_writes_curves_and_summary(tmp_path):
    code = cli.main(["analytical", "--sweep", "K=64,256", "--tau-max", "40", "--out", str(tmp_path), "--no-density"])
    assert code == 0
    meta, rows = read_csv(tmp_path / "lafp_reactive_K64_lam1000.csv")
    assert meta["config"]["n_antennas"] == 64 and meta["scheme"] == "reactive"
    assert len(rows) == 40
    # no attempt completes before TTI 5
    assert all(float(r["lafp"]) == 1.0 for r in rows[:4])
    assert float(rows[4]["lafp"]) < 1.0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert len(summary["files"]) == 8
    ratios = {r["scheme"]: r["ratio"] for r in summary["reduction_ratios"]}
    assert set(ratios) == {"reactive", "krep:2", "krep:4", "krep:8"}
    assert set(ratios["krep:4"]) == {"1ms", "2ms", "3ms", "4ms"}
    assert all(r["from_antennas"] == 64 and r["to_antennas"] == 256 for r in summary["reduction_ratios"])


def test_density_bisection(tmp_path):
    code = cli.main(["analytical", "--scheme", "krep", "--krep", "8", "--sweep", "K=128", "--out", str(tmp_path)])
    assert code == 0
    (row,) = json.loads((tmp_path / "summary.json").read_text())["max_supported_density"]
    assert row["tau_ttis"] == 24 and row["scheme"] == "krep:8"
    lam = row["lambda_u"]
    from urllc_mimo import analytical
    from urllc_mimo.config import HarqScheme

    cfg = SystemConfig(n_antennas=128)
    s = HarqScheme.krep(8)
    assert analytical.lafp(s, 24, cfg.replace(lambda_u=lam)).lafp <= 1e-6
    assert analytical.lafp(s, 24, cfg.replace(lambda_u=lam + 2)).lafp > 1e-6


def test_density_none_when_target_unreachable():
    assert cli.max_supported_density(SystemConfig(), cli.HarqScheme.reactive(), 4) is None


def test_sweep_over_scheme_and_config_file(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    SystemConfig(lambda_u=5000).save(cfg_path)
    out = tmp_path / "out"
    code = cli.main(["analytical", "--config", str(cfg_path), "--sweep", "scheme=krep:2", "--out", str(out), "--no-density"])
    assert code == 0
    assert (out / "lafp_krep2_K256_lam5000.csv").exists()


def test_simulate_is_reproducible(tmp_path):
    args = ["simulate", "--scheme", "reactive", "--trials", "3", "--seed", "5", "--tau-max", "12", "--sweep", "lambda_u=200"]
    assert cli.main(args + ["--out", str(tmp_path / "a"), "--compare"]) == 0
    assert cli.main(args + ["--out", str(tmp_path / "b")]) == 0
    name = "sim_reactive_K256_lam200.csv"
    assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    meta, rows = read_csv(tmp_path / "a" / name)
    assert meta["seed"] == 5
    assert list(rows[0]) == ["tau_ttis", "tau_ms", "failure_prob", "ci_half_width", "n_trials", "n_users", "censored"]
    manifest = json.loads((tmp_path / "a" / "sim_reactive_K256_lam200.json").read_text())
    assert manifest["seed"] == 5 and manifest["config"]["lambda_u"] == 200 and manifest["version"]
    _, cmp_rows = read_csv(tmp_path / "a" / "sim_reactive_K256_lam200_compare.csv")
    assert "relative_gap" in cmp_rows[0]


@pytest.mark.parametrize(
    "argv",
    [
        ["analytical", "--sweep", "nonsense=1"],
        ["analytical", "--sweep", "K"],
        ["analytical", "--sweep", "scheme=pushy"],
        ["analytical", "--krep", "4"],
        ["analytical", "--tau-max", "0"],
        ["simulate", "--trials", "0"],
        ["analytical", "--config", "/nonexistent/cfg.json"],
        ["analytical", "--sweep", "K=1"],
    ],
)
def test_validation_errors_exit_nonzero(argv, tmp_path, capsys):
    assert cli.main(argv + ["--out", str(tmp_path)]) != 0
    assert "error:" in capsys.readouterr().err


def test_unwritable_output(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["analytical", "--out", str(blocker / "sub"), "--no-density"]) != 0
    assert "error:" in capsys.readouterr().err


def test_parse_sweep_aliases():
    assert cli.parse_sweep(["K=64,128", "lambda=1000"]) == {"n_antennas": ["64", "128"], "lambda_u": ["1000"]}
    with pytest.raises(cli.ConfigError):
        cli.parse_sweep(["K=64", "n_antennas=128"])
