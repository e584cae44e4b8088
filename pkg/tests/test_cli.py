import subprocess
import sys

from netvlasov.cli import main


def test_validate_kernels(tmp_path, capsys):
    assert main(["validate-kernels", "--samples", "500", "--out", str(tmp_path)]) == 0
    assert "status: pass" in capsys.readouterr().out
    assert (tmp_path / "kernels.txt").exists()


def test_experiment_with_overrides(tmp_path):
    code = main(["experiment", "equivalence", "--horizon", "0.1", "--dt", "0.01", "--seed", "3",
                 "--out", str(tmp_path)])
    assert code == 0
    text = (tmp_path / "equivalence_report.txt").read_text()
    assert "config.T: 0.1" in text and "config.seed: 3" in text


def test_failing_threshold_exit_code(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("sizes:\n  n: 4\nthresholds:\n  max_gap: -1.0\n")
    assert main(["experiment", "equivalence", "--config", str(cfg), "--horizon", "0.05",
                 "--out", str(tmp_path)]) == 1


def test_configuration_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("kernels:\n  phi: missing\n")
    assert main(["experiment", "bounds", "--config", str(cfg)]) == 2
    assert "error:" in capsys.readouterr().err


def test_simulate_continuum_vlasov(tmp_path):
    assert main(["simulate", "--horizon", "0.2", "--out", str(tmp_path / "s")]) == 0
    assert (tmp_path / "s" / "states.csv").exists() and (tmp_path / "s" / "weights.csv").exists()
    assert main(["continuum", "--horizon", "0.2", "--out", str(tmp_path / "c")]) == 0
    assert (tmp_path / "c" / "grid_states.csv").exists()
    assert main(["vlasov", "--horizon", "0.2", "--threads", "2", "--out", str(tmp_path / "v")]) == 0
    assert "margin_weight" in (tmp_path / "v" / "bounds.txt").read_text()


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "netvlasov", "validate-kernels", "--samples", "200",
                          "--out", str(tmp_path)], capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
