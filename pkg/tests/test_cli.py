import json

from quadecho.cli import EXIT_CONFIG, EXIT_FIT, EXIT_OK, describe, main
from quadecho.config import parse_config

HAHN_NOISELESS = """
system:
  spin_i: 3/2
  nu0: 1.0 MHz
disorder:
  sigma_delta_nu0: 30 Hz
  sigma_nu_q: 45 Hz
protocol:
  kind: hahn
  transition: csqt
  tau: [1 ms, 2 ms, 4 ms, 8 ms]
execution:
  ensemble: 50
  seed: 7
"""

HAHN_NOISY = """
system:
  spin_i: 3/2
  nu0: 1.0 MHz
disorder:
  sigma_delta_nu0: 30 Hz
  sigma_nu_q: 45 Hz
baths:
  field:
    n_fluctuators: 3
    coupling: 15 Hz
    rate_min: 2 kHz
    rate_max: 6 kHz
protocol:
  kind: hahn
  transition: csqt
  tau: [1 ms, 4 ms, 10 ms, 20 ms, 35 ms]
execution:
  ensemble: 200
  realizations: 2
  seed: 7
"""


def _write(tmp_path, text, name="config.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_validate_prints_resolved_config(tmp_path, capsys):
    rc = main(["validate", _write(tmp_path, HAHN_NOISELESS)])
    out = capsys.readouterr().out
    assert rc == EXIT_OK
    assert "nu_rf: 1000000.0 Hz" in out


def test_validate_rejects_bad_config(tmp_path, capsys):
    rc = main(["validate", _write(tmp_path, HAHN_NOISELESS.replace("3/2", "1"))])
    assert rc == EXIT_CONFIG
    assert "spin_i" in capsys.readouterr().err


def test_missing_file_is_config_error(capsys):
    rc = main(["validate", "/nonexistent/config.yaml"])
    assert rc == EXIT_CONFIG


def test_describe_hahn_timeline(tmp_path, capsys):
    rc = main(["describe", _write(tmp_path, HAHN_NOISELESS)])
    out = capsys.readouterr().out
    assert rc == EXIT_OK
    assert "π/2 | 1 ms | π | 1 ms | π/2 | detect" in out


def test_describe_phase_cycle_table():
    cfg = parse_config(
        """
system: {spin_i: 3/2, nu0: 1.0 MHz}
protocol: {kind: phase_cycle, init_level: 2, tau1: 1 ms, tau2: 1 ms, n_phase_steps: 24}
execution: {ensemble: 10, seed: 1}
"""
    )
    text = describe(cfg)
    assert text.count("φ =") == 24
    assert "2π/3" in text and "(φ)" in text


def test_describe_tspace_marker_placement():
    cfg = parse_config(
        """
system: {spin_i: 3/2, nu0: 1.0 MHz}
baths:
  charge_burst: {n_traps: 10, coupling_q: 10 Hz, activation: 0.5, relax_rate: 5 Hz}
protocol:
  kind: tspace
  transition: ssqt_upper
  burst_kind: light
  t_space: [10 ms, 100 ms]
  tau: [1 ms, 2 ms, 4 ms, 8 ms]
execution: {ensemble: 10, seed: 1}
"""
    )
    text = describe(cfg)
    assert "5 ms after initialization" in text
    assert "LED" in text


def test_run_noise_free_flat_trace_exits_fit_failure(tmp_path, capsys):
    out_dir = tmp_path / "results"
    rc = main(["run", _write(tmp_path, HAHN_NOISELESS), "--out-dir", str(out_dir), "--quiet"])
    assert rc == EXIT_FIT                      # degenerate fit on a flat trace
    trace = (out_dir / "trace_hahn.csv").read_text()
    rows = [l for l in trace.splitlines() if not l.startswith("#")][1:]
    amps = [float(r.split(",")[1]) for r in rows]
    assert amps == [1.0, 1.0, 1.0, 1.0]
    doc = json.loads((out_dir / "results.json").read_text())
    assert doc["incomplete"] is True
    assert doc["fit_failures"]
    assert doc["results"]["fit"] is None


def test_run_noisy_fit_and_outputs(tmp_path):
    out_dir = tmp_path / "results"
    rc = main(["run", _write(tmp_path, HAHN_NOISY), "--out-dir", str(out_dir), "--quiet"])
    assert rc == EXIT_OK
    doc = json.loads((out_dir / "results.json").read_text())
    assert doc["incomplete"] is False
    fit = doc["results"]["fit"]
    assert fit["converged"] and fit["t2_s"] > 0
    assert doc["provenance"]["config_sha256"] == doc["provenance"]["config_sha256"]
    trace = (out_dir / "trace_hahn.csv").read_text()
    assert f"# seed=7" in trace
    assert f"# config_sha256={doc['provenance']['config_sha256']}" in trace


def test_same_seed_byte_identical_outputs(tmp_path):
    cfg = _write(tmp_path, HAHN_NOISY)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", cfg, "--out-dir", str(a), "--quiet"]) == EXIT_OK
    assert main(["run", cfg, "--out-dir", str(b), "--quiet"]) == EXIT_OK
    assert (a / "trace_hahn.csv").read_bytes() == (b / "trace_hahn.csv").read_bytes()
    da = json.loads((a / "results.json").read_text())
    db = json.loads((b / "results.json").read_text())
    for d in (da, db):
        d["provenance"].pop("timestamp")
        d["config"].pop("output")       # the two runs differ only in out-dir
    assert da == db


def test_seed_override_changes_outputs(tmp_path):
    cfg = _write(tmp_path, HAHN_NOISY)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", cfg, "--out-dir", str(a), "--quiet"]) == EXIT_OK
    assert main(["run", cfg, "--out-dir", str(b), "--seed", "8", "--quiet"]) == EXIT_OK
    assert (a / "trace_hahn.csv").read_bytes() != (b / "trace_hahn.csv").read_bytes()
    doc = json.loads((b / "results.json").read_text())
    assert doc["provenance"]["seed"] == 8
    assert doc["config"]["execution"]["seed"] == 8


def test_run_cpmg_noise_free_flushes_partial_results(tmp_path):
    text = """
system: {spin_i: 3/2, nu0: 1.0 MHz}
disorder: {sigma_delta_nu0: 30 Hz, sigma_nu_q: 45 Hz}
protocol:
  kind: cpmg
  transition: csqt
  n_list: [1, 2]
  total_times: [2 ms, 4 ms, 8 ms, 16 ms]
execution: {ensemble: 50, seed: 2}
"""
    out_dir = tmp_path / "cpmg"
    rc = main(["run", _write(tmp_path, text), "--out-dir", str(out_dir), "--quiet"])
    assert rc == EXIT_FIT                    # flat traces cannot be fitted
    assert (out_dir / "trace_cpmg_n1.csv").exists()
    assert (out_dir / "trace_cpmg_n2.csv").exists()
    doc = json.loads((out_dir / "results.json").read_text())
    assert doc["incomplete"] is True
    assert doc["results"]["beta"] is None
    assert all(rec["t2_s"] is None for rec in doc["results"]["scaling"])


def test_run_multiquantum_outputs_ratio_summary(tmp_path):
    text = """
system: {spin_i: 3/2, nu0: 1.0 MHz}
disorder: {sigma_delta_nu0: 100 Hz, sigma_nu_q: 200 Hz}
baths:
  field: {n_fluctuators: 4, coupling: 30 Hz, rate_min: 0.2 Hz, rate_max: 1 kHz}
protocol:
  kind: multiquantum
  init_level: 2
  tau: [3 ms, 6 ms, 10 ms, 15 ms, 21 ms, 28 ms]
execution: {ensemble: 300, realizations: 4, seed: 3}
"""
    out_dir = tmp_path / "mq"
    rc = main(["run", _write(tmp_path, text), "--out-dir", str(out_dir), "--quiet"])
    assert rc == EXIT_OK
    for name in ("trace_sqt.csv", "trace_dqt.csv", "trace_tqt.csv"):
        assert (out_dir / name).exists()
    doc = json.loads((out_dir / "results.json").read_text())
    assert set(doc["results"]["fits"]) == {"SQT", "DQT", "TQT"}
    assert "t2_ratios" in doc["results"]


def test_run_phase_cycle_outputs_spectrum(tmp_path):
    text = """
system: {spin_i: 3/2, nu0: 1.0 MHz}
disorder: {sigma_delta_nu0: 100 Hz, sigma_nu_q: 200 Hz}
protocol: {kind: phase_cycle, init_level: 2, tau1: 10 ms, tau2: 10 ms}
execution: {ensemble: 500, seed: 5}
"""
    out_dir = tmp_path / "pc"
    rc = main(["run", _write(tmp_path, text), "--out-dir", str(out_dir), "--quiet"])
    assert rc == EXIT_OK
    comp = (out_dir / "components_phase_cycle.csv").read_text()
    rows = [l for l in comp.splitlines() if not l.startswith("#")][1:]
    assert len(rows) == 13
    spectrum = (out_dir / "spectrum_phase_cycle.csv").read_text()
    rows = [l for l in spectrum.splitlines() if not l.startswith("#")][1:]
    assert len(rows) == 24
