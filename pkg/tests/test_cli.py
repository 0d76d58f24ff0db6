import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from csqpt import channel, gates, metrics, reconstruct, tomography
from csqpt.cli import main

pytestmark = pytest.mark.filterwarnings("ignore::csqpt.errors.TruncationWarning")

np_rng = np.random.default_rng(90210)


def random_unitary(dim, rng):
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * np.sign(np.diag(r).real)


def write_kraus_json(ks, path):
    with open(path, "w") as fh:
        json.dump(channel.kraus_to_json(ks), fh)
    return str(path)


def write_ideal_x_result(dim, path):
    """Result file holding the exact ideal-X channel (no optimization)."""
    code = gates.BinomialCode(dim)
    ks = channel.unitary_channel(gates.ideal_logical_x_unitary(code))
    cfg = reconstruct.ReconstructionConfig(rank=1, dim=dim)
    l1 = float(np.sum(np.abs(ks.operators.real)) + np.sum(np.abs(ks.operators.imag)))
    report = reconstruct.LossReport(
        l2=0.0, l1=l1, total=cfg.gamma * l1, grad_norm=0.0,
        iters_used=0, history=(cfg.gamma * l1,), converged=True,
    )
    reconstruct.save_result(ks, report, cfg, str(path))
    return str(path)


def read_csv_matrix(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0][1:]
    labels = [row[0] for row in rows[1:]]
    values = np.array([[float(x) for x in row[1:]] for row in rows[1:]])
    return header, labels, values


def test_simulate_writes_dataset(tmp_path, capsys):
    gate = write_kraus_json(channel.unitary_channel(np.eye(6, dtype=complex)),
                            tmp_path / "id.json")
    out = tmp_path / "ds.json"
    code = main(["simulate", "--gate", gate, "--dim", "6", "--probe-grid", "3,0.8",
                 "--wigner-grid", "5,1.2", "--out", str(out)])
    assert code == 0
    data = json.loads(out.read_text())
    assert data["schema"] == "csqpt-dataset-v1"
    ds = tomography.load_dataset(str(out))
    assert ds.probes.size == 9 and ds.betas.size == 25
    printed = capsys.readouterr().out
    assert "n_probes=9" in printed and "seed: 0" in printed


def test_simulate_builtin_x_gate_default_grids(tmp_path):
    out = tmp_path / "ideal.json"
    assert main(["simulate", "--gate", "x-gate", "--shots", "0",
                 "--out", str(out)]) == 0
    ds = tomography.load_dataset(str(out))
    assert ds.probes.size == 25 and ds.betas.size == 441
    assert ds.dim == 32


def test_simulate_shot_noise_byte_identical(tmp_path):
    gate = write_kraus_json(channel.unitary_channel(random_unitary(6, np_rng)),
                            tmp_path / "u.json")
    outs = []
    for name in ("a.json", "b.json"):
        out = tmp_path / name
        assert main(["simulate", "--gate", gate, "--dim", "6", "--shots", "1000",
                     "--seed", "7", "--probe-grid", "3,0.8", "--wigner-grid", "5,1.2",
                     "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_simulate_probe_corners(tmp_path):
    gate = write_kraus_json(channel.unitary_channel(np.eye(12, dtype=complex)),
                            tmp_path / "id.json")
    out = tmp_path / "ds.json"
    assert main(["simulate", "--gate", gate, "--dim", "12", "--probe-grid", "5,1.5",
                 "--wigner-grid", "3,1.0", "--out", str(out)]) == 0
    ds = tomography.load_dataset(str(out))
    corners = {complex(-1.5, -1.5), complex(-1.5, 1.5),
               complex(1.5, -1.5), complex(1.5, 1.5)}
    assert corners <= set(map(complex, ds.probes))


def test_simulate_sequence_with_noise(tmp_path):
    seq = {"steps": [{"type": "displace", "alpha": [0.3, 0.0], "duration": 0.1},
                     {"type": "snap", "thetas": [0.0, 3.14159, 0.0], "duration": 0.7}]}
    seq_path = tmp_path / "seq.json"
    seq_path.write_text(json.dumps(seq))
    out = tmp_path / "ds.json"
    assert main(["simulate", "--gate", str(seq_path), "--dim", "8", "--noise", "100,150",
                 "--probe-grid", "3,0.5", "--wigner-grid", "3,0.8",
                 "--out", str(out)]) == 0
    assert json.loads(out.read_text())["schema"] == "csqpt-dataset-v1"


def test_simulate_bad_inputs(tmp_path):
    gate = write_kraus_json(channel.unitary_channel(np.eye(6, dtype=complex)),
                            tmp_path / "id.json")
    # noise cannot apply to a Kraus file (no durations)
    assert main(["simulate", "--gate", gate, "--dim", "6", "--noise", "100,150",
                 "--out", str(tmp_path / "x.json")]) == 3
    assert main(["simulate", "--gate", str(tmp_path / "missing.json"),
                 "--out", str(tmp_path / "x.json")]) == 3
    assert main(["simulate", "--gate", gate, "--dim", "6", "--probe-grid", "nope",
                 "--out", str(tmp_path / "x.json")]) == 3
    assert main(["simulate", "--gate", gate, "--dim", "6", "--noise", "100",
                 "--out", str(tmp_path / "x.json")]) == 3
    not_a_gate = tmp_path / "neither.json"
    not_a_gate.write_text("{\"foo\": 1}")
    assert main(["simulate", "--gate", str(not_a_gate),
                 "--out", str(tmp_path / "x.json")]) == 3


def small_dataset(tmp_path, dim=6, shots=0):
    u = random_unitary(dim, np.random.default_rng(11))
    gate = write_kraus_json(channel.unitary_channel(u), tmp_path / "truth.json")
    out = tmp_path / f"ds_{shots}.json"
    assert main(["simulate", "--gate", gate, "--dim", str(dim), "--shots", str(shots),
                 "--seed", "3", "--probe-grid", "3,0.8", "--wigner-grid", "7,1.2",
                 "--out", str(out)]) == 0
    return str(out)


def test_reconstruct_cli_noiseless(tmp_path, capsys):
    ds_path = small_dataset(tmp_path)
    out = tmp_path / "res.json"
    code = main(["reconstruct", "--data", ds_path, "--rank", "1", "--dim", "6",
                 "--gamma", "0", "--iters", "500", "--out", str(out)])
    assert code == 0
    ks, report, cfg = reconstruct.load_result(str(out))
    assert json.loads(out.read_text())["schema"] == "csqpt-result-v1"
    # noiseless data, exact model class: near-zero residual
    assert report.l2 <= 1e-6 * (9 * 49)
    assert channel.cptp_defect(ks.operators) <= 1e-6
    assert "wrote" in capsys.readouterr().out


def test_reconstruct_gamma_promotes_sparsity(tmp_path):
    ds_path = small_dataset(tmp_path, shots=400)
    counts = {}
    for gamma in ("0", "4e-4"):
        out = tmp_path / f"res_{gamma}.json"
        assert main(["reconstruct", "--data", ds_path, "--rank", "2", "--dim", "6",
                     "--gamma", gamma, "--iters", "400", "--out", str(out)]) == 0
        ks, _, _ = reconstruct.load_result(str(out))
        flat = np.concatenate([ks.operators.real.ravel(), ks.operators.imag.ravel()])
        counts[gamma] = int(np.sum(np.abs(flat) < 1e-6))
    assert counts["4e-4"] >= counts["0"]


def test_reconstruct_missing_data_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as err:
        main(["reconstruct", "--out", str(tmp_path / "r.json")])
    assert err.value.code == 2


def test_reconstruct_nonconvergence_warns_but_exits_zero(tmp_path, capsys):
    ds_path = small_dataset(tmp_path)
    out = tmp_path / "res.json"
    assert main(["reconstruct", "--data", ds_path, "--rank", "1", "--dim", "6",
                 "--iters", "3", "--out", str(out)]) == 0
    _, report, _ = reconstruct.load_result(str(out))
    assert not report.converged
    assert "warning: no convergence" in capsys.readouterr().err


def test_analyze_ideal_x_emits(tmp_path, capsys):
    res = write_ideal_x_result(8, tmp_path / "res.json")
    out_dir = tmp_path / "reports"
    code = main(["analyze", "--result", res, "--out-dir", str(out_dir)])
    assert code == 0
    header, labels, ptm = read_csv_matrix(out_dir / "ptm.csv")
    assert header == ["I", "X", "Y", "Z"] and labels == ["I", "X", "Y", "Z"]
    assert np.abs(ptm - np.diag([1.0, 1.0, -1.0, -1.0])).max() < 1e-10
    fid = json.loads((out_dir / "fidelity.json").read_text())
    assert abs(fid["f_avg"] - 1.0) < 1e-12
    assert abs(fid["leakage"]) < 1e-12
    _, _, pop = read_csv_matrix(out_dir / "poptm.csv")
    assert pop.shape == (6, 6)
    sweep_lines = (out_dir / "sweep.csv").read_text().strip().splitlines()
    assert sweep_lines[0] == "cut,f_pro"
    cuts = [int(line.split(",")[0]) for line in sweep_lines[1:]]
    fids = [float(line.split(",")[1]) for line in sweep_lines[1:]]
    # cuts are clamped below the result's truncation (dim 8 here)
    assert cuts == list(range(2, 8))
    # exact channel: no truncation decline anywhere
    assert min(fids) > 1 - 1e-9
    gtm_header, _, gtm = read_csv_matrix(out_dir / "gtm.csv")
    assert gtm.shape == (len(gtm_header), len(gtm_header))
    assert "f_avg=1.000000" in capsys.readouterr().out


def test_analyze_emit_selection(tmp_path):
    res = write_ideal_x_result(8, tmp_path / "res.json")
    out_dir = tmp_path / "only_ptm"
    assert main(["analyze", "--result", res, "--emit", "ptm",
                 "--out-dir", str(out_dir)]) == 0
    assert (out_dir / "ptm.csv").exists()
    assert not (out_dir / "gtm.csv").exists()


def test_analyze_target_errors(tmp_path):
    res = write_ideal_x_result(8, tmp_path / "res.json")
    two_kraus = channel.random_channel(8, 2, np.random.default_rng(0))
    target = write_kraus_json(two_kraus, tmp_path / "t2.json")
    assert main(["analyze", "--result", res, "--target", target,
                 "--out-dir", str(tmp_path / "o1")]) == 3
    wrong_dim = write_kraus_json(channel.unitary_channel(np.eye(6, dtype=complex)),
                                 tmp_path / "t6.json")
    assert main(["analyze", "--result", res, "--target", wrong_dim,
                 "--out-dir", str(tmp_path / "o2")]) == 3


def test_analyze_non_cptp_result_is_numerical_failure(tmp_path):
    res_path = tmp_path / "broken.json"
    good = write_ideal_x_result(8, tmp_path / "good.json")
    data = json.loads(open(good).read())
    # scale the single Kraus operator: breaks the CPTP certificate
    for row in data["kraus"]["operators"][0]:
        for pair in row:
            pair[0] *= 2.0
    res_path.write_text(json.dumps(data))
    assert main(["analyze", "--result", str(res_path),
                 "--out-dir", str(tmp_path / "o")]) == 4


def test_budget_without_decoherence(tmp_path, capsys):
    out = tmp_path / "budget.csv"
    code = main(["budget", "--dim", "16", "--noise", "inf,inf", "--out", str(out)])
    assert code == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "channel,contribution"
    table = {line.split(",")[0]: float(line.split(",")[1]) for line in lines[1:]}
    assert set(table) == {"photon-loss", "pure-dephasing"}
    assert abs(table["photon-loss"]) < 1e-9
    assert abs(table["pure-dephasing"]) < 1e-9
    assert "baseline infidelity:" in capsys.readouterr().out


def test_decode_study_on_leaky_channel(tmp_path, capsys):
    dim = 8
    code = gates.BinomialCode(dim)
    theta = np.arcsin(np.sqrt(0.08))
    u = np.eye(dim, dtype=complex)
    c, s = np.cos(theta), np.sin(theta)
    for a, b in ((code.zero_l, code.error_vec),):
        pa, pb = np.outer(a, a.conj()), np.outer(b, b.conj())
        u = u + (c - 1) * (pa + pb) + s * (np.outer(b, a.conj()) - np.outer(a, b.conj()))
    gate = write_kraus_json(channel.unitary_channel(u), tmp_path / "leaky.json")
    out_dir = tmp_path / "study"
    assert main(["decode-study", "--gate", gate, "--dim", str(dim),
                 "--out-dir", str(out_dir)]) == 0
    _, _, decoded = read_csv_matrix(out_dir / "decoded_ptm.csv")
    _, _, direct = read_csv_matrix(out_dir / "direct_ptm.csv")
    assert np.abs(decoded[0] - np.array([1.0, 0, 0, 0])).max() < 1e-10
    assert abs((1.0 - direct[0, 0]) - 0.04) < 1e-6  # half the rotation hits 0_L
    assert "deficit" in capsys.readouterr().out


def test_config_file_merge(tmp_path):
    gate = write_kraus_json(channel.unitary_channel(np.eye(6, dtype=complex)),
                            tmp_path / "id.json")
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"gate": gate, "dim": 6, "probe_grid": "3,0.8",
                                    "wigner_grid": "3,1.0", "shots": 50}))
    out_a = tmp_path / "a.json"
    assert main(["simulate", "--config", str(cfg_path), "--shots", "0",
                 "--out", str(out_a)]) == 0
    ds = tomography.load_dataset(str(out_a))
    # flag overrode the config file: exact values, not 50-shot noise
    exact = tomography.simulate_dataset(
        channel.unitary_channel(np.eye(6, dtype=complex)),
        tomography.probe_grid(3, 0.8), tomography.wigner_grid(3, 1.0))
    assert np.abs(ds.values - exact.values).max() < 1e-12

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"shotz": 5}))
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "x.json")]) == 3


def test_console_entry_point():
    env = dict(os.environ, CSQPT_THREADS="1")
    proc = subprocess.run([sys.executable, "-m", "csqpt", "--help"],
                          capture_output=True, text=True, env=env)
    assert proc.returncode == 0
    assert "simulate" in proc.stdout and "decode-study" in proc.stdout
