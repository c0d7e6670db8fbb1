import json
import struct
import time

import numpy as np
import pytest

from deunet import experiments
from deunet.cli import EXIT_CHECK, EXIT_CONFIG, EXIT_DATA, EXIT_OK, main
from deunet.sweep import parse_range, read_sweep


def _idx(path, magic, dims, payload):
    path.write_bytes(struct.pack(">I", magic) + struct.pack(f">{len(dims)}I", *dims) + bytes(payload))


@pytest.fixture
def fake_mnist(tmp_path):
    """A tiny stand-in with the real file names and IDX layout."""
    rng = np.random.default_rng(0)
    root = tmp_path / "mnist"
    root.mkdir()
    for prefix, n in (("train", 30), ("t10k", 10)):
        _idx(root / f"{prefix}-images-idx3-ubyte", 0x803, (n, 28, 28), rng.integers(0, 256, n * 784).tolist())
        _idx(root / f"{prefix}-labels-idx1-ubyte", 0x801, (n,), (np.arange(n) % 10).tolist())
    return root


# --- train -----------------------------------------------------------------------------


def test_train_writes_outputs(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"task": "sine", "n_samples": 20, "epochs": 3, "lr_coeffs": 0.011}))
    out = tmp_path / "run"
    assert main(["train", "--config", str(cfg), "--output-dir", str(out), "--quiet"]) == EXIT_OK
    assert (out / "metrics.jsonl").exists() and (out / "checkpoint.json").exists()
    assert "train_loss=" in capsys.readouterr().out


def test_train_config_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"task": "sine", "epochz": 3}))
    assert main(["train", "--config", str(cfg)]) == EXIT_CONFIG
    assert "epochz" in capsys.readouterr().err


def test_train_data_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"task": "tabular", "data_file": str(tmp_path / "none.csv"), "sizes": [3, 1],
                               "activations": ["identity"], "output_dir": str(tmp_path / "o")}))
    assert main(["train", "--config", str(cfg)]) == EXIT_DATA
    assert "none.csv" in capsys.readouterr().err


def test_bad_arguments_exit_code():
    assert main(["frobnicate"]) == EXIT_CONFIG
    assert main(["gradcheck", "--trials", "many"]) == EXIT_CONFIG


# --- gradcheck ----------------------------------------------------------------------------


def test_gradcheck_passes(capsys):
    assert main(["gradcheck", "--trials", "50", "--seed", "1"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.rstrip().endswith("PASS")
    assert out.count(" ok") == 10


def test_gradcheck_flags_injected_fault(capsys):
    assert main(["gradcheck", "--trials", "50", "--inject-fault"]) == EXIT_CHECK
    assert "FAIL" in capsys.readouterr().out


def test_gradcheck_thousand_trials_within_budget(capsys):
    start = time.perf_counter()
    assert main(["gradcheck"]) == EXIT_OK
    assert time.perf_counter() - start < 10
    assert "1000 trials" in capsys.readouterr().out


def test_gradcheck_zero_trials():
    assert main(["gradcheck", "--trials", "0"]) == EXIT_CONFIG


# --- sweep ---------------------------------------------------------------------------------


def test_sweep_relu_is_piecewise_linear(tmp_path):
    out = tmp_path / "relu.csv"
    assert main(["sweep", "--range=-2:2", "--n", "5", "--out", str(out)]) == EXIT_OK
    t, cols = read_sweep(out)
    assert t.tolist() == [-2, -1, 0, 1, 2]
    assert cols["y"].tolist() == [0, 0, 0, 1, 2]


def test_sweep_family_frequencies(tmp_path):
    out = tmp_path / "fam.csv"
    argv = ["sweep", "--a", "1", "--b", "0", "--c", "1", "--vary", "c", "--values", "0.5,1,2",
            "--range", "0.01:20", "--n", "20001", "--out", str(out)]
    assert main(argv) == EXIT_OK
    t, cols = read_sweep(out)
    assert list(cols) == ["c=0.5", "c=1", "c=2"]
    for c in (0.5, 1.0, 2.0):
        y = cols[f"c={c:g}"] - 1.0 / c
        crossings = t[np.flatnonzero(np.sign(y[:-1]) != np.sign(y[1:]))]
        assert np.diff(crossings).mean() == pytest.approx(np.pi / np.sqrt(c), rel=1e-3)


@pytest.mark.parametrize("text", ["3:1", "abc", "1:1"])
def test_sweep_bad_range(tmp_path, text):
    with pytest.raises(ValueError):
        parse_range(text)
    assert main(["sweep", "--range", text, "--out", str(tmp_path / "x.csv")]) == EXIT_CONFIG


# --- reproduce -------------------------------------------------------------------------------


def test_reproduce_unknown_experiment():
    assert main(["reproduce", "cifar"]) == EXIT_CONFIG
    with pytest.raises(ValueError, match="unknown experiment"):
        experiments.reproduce("cifar")


def test_reproduce_missing_data_names_the_file(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("DEU_DATA_DIR", raising=False)
    assert main(["reproduce", "mnist-width-sweep", "--data-dir", str(tmp_path)]) == EXIT_DATA
    assert "train-images-idx3-ubyte" in capsys.readouterr().err
    assert main(["reproduce", "diabetes", "--data-dir", str(tmp_path)]) == EXIT_DATA
    assert "diabetes.tab.txt" in capsys.readouterr().err


def test_reproduce_mnist_width_sweep_layout(fake_mnist, tmp_path, capsys):
    code = main(["reproduce", "mnist-width-sweep", "--data-dir", str(fake_mnist),
                 "--output-dir", str(tmp_path / "runs")])
    assert code == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[1].split() == ["model", "10", "20", "40", "60", "100"]
    assert [ln.split()[0] for ln in lines[3:]] == ["ReLU", "SELU", "ELU", "LReLU", "DEU"]
    assert (tmp_path / "runs" / "mnist-width-sweep" / "deu-100" / "metrics.jsonl").exists()
