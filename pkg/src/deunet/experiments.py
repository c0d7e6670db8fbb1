"""Canned experiments: fixed configurations plus a comparison table.

Each experiment is a grid of ``RunConfig``s keyed by (row, column).  Rows are
activation families, columns are widths or a single metric column, matching
the layout of the published comparison tables.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import runner
from .config import RunConfig
from .runner import resolve_data_dir
from .data import DataError

__all__ = ["EXPERIMENTS", "Experiment", "ResultTable", "reproduce", "SINE_DEU_INIT", "RELU_INIT"]

# ReQU and ReLU, the two starting shapes of the small sine network
SINE_DEU_INIT = [[1.0, 0.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0, 0.0]]
RELU_INIT = [0.0, 1.0, 0.0, 0.0, 0.0]
DIABETES_FILES = ("diabetes.tab.txt", "diabetes.csv", "diabetes.txt")
MNIST_WIDTHS = (10, 20, 40, 60, 100)


@dataclass
class ResultTable:
    title: str
    metric: str
    columns: list
    cells: dict = field(default_factory=dict)  # (row, column) -> value
    notes: list = field(default_factory=list)

    @property
    def rows(self) -> list:
        seen = []
        for row, _ in self.cells:
            if row not in seen:
                seen.append(row)
        return seen

    def value(self, row, column=None):
        return self.cells[(row, self.columns[0] if column is None else column)]

    def render(self) -> str:
        fmt = (lambda v: f"{v:.4f}") if "accuracy" in self.metric else (lambda v: f"{v:.4g}")
        head = ["model", *map(str, self.columns)]
        body = [[row, *(fmt(self.cells[(row, col)]) if (row, col) in self.cells else "-"
                        for col in self.columns)] for row in self.rows]
        widths = [max(len(r[i]) for r in [head, *body]) for i in range(len(head))]
        line = lambda cells: "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
        out = [self.title, line(head), line(["-" * w for w in widths]), *map(line, body)]
        return "\n".join(out + self.notes)


@dataclass(frozen=True)
class Experiment:
    name: str
    title: str
    metric: str
    builder: object  # (data_dir, extended) -> (columns, {(row, col): RunConfig})

    def configs(self, data_dir=None, extended=False):
        return self.builder(data_dir, extended)


def _sine_base(**kw) -> RunConfig:
    base = dict(task="sine", n_samples=200, data_seed=0, seed=1, epochs=5000, batch_size=20,
                lr_weights=0.01, lr_coeffs=0.011, stop_loss=1e-4)
    return RunConfig(**{**base, **kw})


def sine_configs(data_dir=None, extended=False):
    """Two DEUs (ReQU + ReLU start) against fixed-activation baselines."""
    col = "train MSE"
    grid = {
        ("DEU-2", col): _sine_base(deu_init=SINE_DEU_INIT, spike_guard=10.0),
        ("ReLU-2", col): _sine_base(activations=["relu", "identity"]),
        ("ReLU-20", col): _sine_base(sizes=[1, 20, 1], activations=["relu", "identity"]),
        ("Sigmoid-100", col): _sine_base(sizes=[1, 100, 1], activations=["sigmoid", "identity"]),
    }
    return [col], grid


def sine_relu_config(**kw) -> RunConfig:
    """Single DEU started exactly at ReLU, for watching its regime change."""
    return _sine_base(sizes=[1, 1, 1], deu_init=[RELU_INIT], spike_guard=10.0, **kw)


def complex_configs(data_dir=None, extended=False):
    col = "train MSE"
    base = dict(task="complex", n_samples=400, data_seed=0, seed=0, epochs=2000, batch_size=32,
                lr_weights=0.01, lr_coeffs=0.011)
    grid = {
        ("DEU (10, 5)", col): RunConfig(sizes=[1, 10, 5, 1], activations=["deu", "deu", "identity"],
                                        spike_guard=10.0, **base),
        ("ReLU (10, 5)", col): RunConfig(sizes=[1, 10, 5, 1], activations=["relu", "relu", "identity"], **base),
        ("ReLU (100, 50)", col): RunConfig(sizes=[1, 100, 50, 1], activations=["relu", "relu", "identity"],
                                           **base),
    }
    return [col], grid


def circles_configs(data_dir=None, extended=False):
    widths = [2, 4]
    base = dict(task="circles", n_samples=400, noise=0.1, data_seed=0, seed=0, epochs=300, batch_size=32,
                lr_weights=0.01, lr_coeffs=0.011)
    grid = {}
    for w in widths:
        grid[("DEU", w)] = RunConfig(sizes=[2, w, 2], activations=["deu", "identity"], spike_guard=10.0, **base)
        grid[("ReLU", w)] = RunConfig(sizes=[2, w, 2], activations=["relu", "identity"], **base)
    return widths, grid


def _diabetes_file(data_dir) -> Path:
    root = resolve_data_dir(data_dir)
    if root is None:
        raise DataError("diabetes needs a data directory (--data-dir or DEU_DATA_DIR) holding "
                        f"{DIABETES_FILES[0]}: 442 rows of 10 features then the target, comma or whitespace "
                        "delimited, optional header line")
    for name in DIABETES_FILES:
        if (root / name).exists():
            return root / name
    raise DataError(f"{root / DIABETES_FILES[0]}: missing diabetes table (442 rows of 10 features then "
                    "the target, comma or whitespace delimited, optional header line)")


def diabetes_configs(data_dir=None, extended=False):
    """DEU width 2 against ReLU width 10, 3-fold cross-validated test MSE."""
    col = "test MSE (3-fold mean)"
    path = str(_diabetes_file(data_dir))
    base = dict(task="tabular", data_file=path, kfold=3, data_seed=0, seed=0, epochs=200, batch_size=32,
                lr_weights=0.01, lr_coeffs=0.011)
    grid = {
        ("DEU-2", col): RunConfig(sizes=[10, 2, 1], activations=["deu", "identity"], spike_guard=10.0, **base),
        ("ReLU-10", col): RunConfig(sizes=[10, 10, 1], activations=["relu", "identity"], **base),
    }
    return [col], grid


def mnist_configs(data_dir=None, extended=False):
    runner.find_mnist(data_dir)  # fail early, naming the missing file
    root = str(resolve_data_dir(data_dir))
    base = dict(task="mnist", data_dir=root, seed=0, epochs=10, batch_size=128, lr_weights=1e-3,
                lr_coeffs=0.011, coef_update_every="epoch")
    grid = {}
    for act, label in (("relu", "ReLU"), ("selu", "SELU"), ("elu", "ELU"), ("leaky_relu", "LReLU"),
                       ("deu", "DEU")):
        for w in MNIST_WIDTHS:
            extra = {"spike_guard": 10.0} if act == "deu" else {}
            grid[(label, w)] = RunConfig(sizes=[784, w, 10], activations=[act, "identity"], **base, **extra)
    columns = list(MNIST_WIDTHS)
    if extended:
        columns.append("1024/512")
        for act, label in (("relu", "ReLU"), ("deu", "DEU")):
            extra = {"spike_guard": 10.0} if act == "deu" else {}
            grid[(label, "1024/512")] = RunConfig(sizes=[784, 1024, 512, 10], activations=[act, act, "identity"],
                                                  **base, **extra)
    return columns, grid


EXPERIMENTS = {
    "sine": Experiment("sine", "sine regression, final train MSE", "train MSE", sine_configs),
    "complex": Experiment("complex", "complex periodic regression, final train MSE", "train MSE",
                          complex_configs),
    "circles": Experiment("circles", "noisy circles, test accuracy by hidden width", "test accuracy",
                          circles_configs),
    "diabetes": Experiment("diabetes", "diabetes regression, cross-validated test MSE", "test MSE",
                           diabetes_configs),
    "mnist-width-sweep": Experiment("mnist-width-sweep", "MNIST, one hidden layer, test accuracy by width",
                                    "test accuracy", mnist_configs),
}


def headline(results, metric: str) -> float:
    """Reduce a run (one RunMetrics per fold) to the table's number."""
    key = {"train MSE": "train_loss", "test MSE": "eval_loss", "test accuracy": "accuracy"}[metric]
    return float(np.mean([r.final[key] for r in results]))


def reproduce(name: str, data_dir=None, extended: bool = False, output_root="runs/reproduce",
              on_run=None) -> ResultTable:
    """Run every configuration of experiment ``name`` and tabulate the results.

    Each run writes its usual outputs under ``output_root/name/<row>-<col>``.
    ``on_run(row, col, results)`` is called after each run.
    """
    if name not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {name!r}; choose from {', '.join(sorted(EXPERIMENTS))}")
    exp = EXPERIMENTS[name]
    columns, grid = exp.configs(data_dir, extended)
    table = ResultTable(exp.title, exp.metric, columns)
    for (row, col), cfg in grid.items():
        label = row if len(columns) == 1 else f"{row} {col}"
        slug = re.sub(r"[^a-z0-9]+", "-", label.lower()).strip("-")
        cfg = replace(cfg, output_dir=str(Path(output_root) / name / slug))
        results = runner.run(cfg)
        table.cells[(row, col)] = headline(results, exp.metric)
        if on_run is not None:
            on_run(row, col, results)
    return table
