import csv

import pytest

from ksblowup.cli import ExperimentConfig, main, parse_config
from ksblowup.grid import ConfigError

SMALL = "N = 3\np = 1.6\nM = 8\nchi_N = 60\ngamma = 1.2\ngrid_n = 256\ncert_rho_samples = 500\n"


def write_cfg(tmp_path, extra="", drop=()):
    lines = [ln for ln in SMALL.splitlines() if ln.split("=")[0].strip() not in drop]
    path = tmp_path / "run.cfg"
    path.write_text("\n".join(lines) + "\n" + extra)
    return str(path)


def test_parse_config_types_and_comments():
    cfg = parse_config("# comment\np = 1.7  # trailing\ngrid_n = 300\nscheme = fully_implicit\ngamma = none\n")
    assert cfg.p == 1.7 and cfg.grid_n == 300 and cfg.scheme == "fully_implicit" and cfg.gamma is None


@pytest.mark.parametrize("text", ["nonsense", "colour = red", "grid_n = 2.5", "chi = 300\nchi_N = 60",
                                  "scheme = rk4", "cert_tol = -1", "proptest_deltas = a,b"])
def test_parse_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_chi_overrides_default_chi_N():
    cfg = parse_config("chi = 400")
    assert cfg.chi_N is None and cfg.model().chi == 400


def test_default_config_is_reference():
    m = ExperimentConfig().model()
    assert (m.N, m.p, m.M) == (3, 1.6, 8.0) and m.chi_N == pytest.approx(60)


def test_validate(tmp_path, capsys):
    assert main(["validate", "--config", write_cfg(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "T_max = 0.303376" in out


def test_validate_mass_failure(tmp_path, capsys):
    path = tmp_path / "m.cfg"
    path.write_text("M = 5\n")
    assert main(["validate", "--config", str(path)]) == 2
    assert "mean mass M > 6" in capsys.readouterr().out


def test_usage_errors(tmp_path):
    assert main(["validate", "--config", str(tmp_path / "missing.cfg")]) == 64
    with pytest.raises(SystemExit) as exc:
        main(["explode"])
    assert exc.value.code == 64
    assert main(["sweep", "--config", write_cfg(tmp_path)]) == 64
    assert main(["sweep", "--config", write_cfg(tmp_path), "--axis", "N", "--values", "3"]) == 64


def test_certify(tmp_path):
    out = tmp_path / "o"
    assert main(["certify", "--config", write_cfg(tmp_path), "--out", str(out)]) == 0
    assert (out / "cert.csv").exists() and (out / "summary.txt").exists()


def test_certify_small_margin_flag(tmp_path, capsys):
    from ksblowup.params import ModelParams, chi_thresholds
    thr = chi_thresholds(ModelParams.from_chi_N(3, 1.6, 8, 60), 1.2)["positivity"]
    cfg = write_cfg(tmp_path, f"chi_N = {1.001 * thr!r}\n", drop=("chi_N",))
    assert main(["certify", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    assert "small margin" in capsys.readouterr().out


def test_simulate_reference(tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "--config", write_cfg(tmp_path), "--out", str(out)]) == 0
    for name in ("timeseries.csv", "comparison.csv", "summary.txt", "plot.script", "snapshots/profile_0.csv"):
        assert (out / name).exists(), name
    assert "theorem check PASSED" in (out / "summary.txt").read_text()
    assert "timeseries.csv" in (out / "plot.script").read_text()


def test_simulate_short_horizon(tmp_path):
    assert main(["simulate", "--config", write_cfg(tmp_path, "horizon_factor = 0.01\n"),
                 "--out", str(tmp_path / "o")]) == 5


def test_simulate_scaled_initial_skips_comparison(tmp_path, capsys):
    code = main(["simulate", "--config", write_cfg(tmp_path, "initial_scale = 0.01\n"), "--out", str(tmp_path / "o")])
    assert code in (0, 5)
    assert "comparison skipped" in capsys.readouterr().out
    assert not (tmp_path / "o" / "comparison.csv").exists()


def test_simulate_stalled(tmp_path):
    assert main(["simulate", "--config", write_cfg(tmp_path, "max_steps = 5\n"), "--out", str(tmp_path / "o")]) == 7


def test_sweep_p(tmp_path):
    cfg = write_cfg(tmp_path, drop=("gamma",))
    out = tmp_path / "sw"
    assert main(["sweep", "--config", cfg, "--axis", "p", "--values", "1.55,1.6,1.7", "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out / "sweep.csv")))
    assert len(rows) == 3 and all(r["outcome"] == "BlewUp" for r in rows)
    assert all(float(r["t_blow"]) <= 1.05 * float(r["T_max"]) for r in rows)


def test_sweep_all_invalid(tmp_path, capsys):
    out = tmp_path / "sw"
    assert main(["sweep", "--config", write_cfg(tmp_path), "--axis", "p", "--values", "1.4", "--out", str(out)]) == 2
    rows = list(csv.DictReader(open(out / "sweep.csv")))
    assert rows[0]["status"] == "skipped"


def test_sweep_chi_threshold_printed(tmp_path, capsys):
    out = tmp_path / "sw"
    code = main(["sweep", "--config", write_cfg(tmp_path), "--axis", "chi", "--values", "200,400", "--out", str(out)])
    assert code == 0
    assert "threshold 52.0893" in capsys.readouterr().out


def test_proptest_deterministic(tmp_path):
    cfg = tmp_path / "p.cfg"
    cfg.write_text("proptest_n = 50\nproptest_deltas = 0.25,1,1.5\n")
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["proptest", "--config", str(cfg), "--seed", "3", "--out", str(a)]) == 0
    assert main(["proptest", "--config", str(cfg), "--seed", "3", "--out", str(b)]) == 0
    assert (a / "proptest.csv").read_bytes() == (b / "proptest.csv").read_bytes()
    rows = list(csv.DictReader(open(a / "proptest.csv")))
    assert sum(r["result"] == "rejected" for r in rows) == 50
    assert not any(r["result"] == "FAIL" for r in rows)
