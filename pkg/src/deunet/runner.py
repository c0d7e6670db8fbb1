"""Turn a RunConfig into datasets, a network and a training run on disk."""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from . import data
from .config import ConfigError, RunConfig
from .data import DataError, Dataset
from .deu import TStarMode
from .nn import Network, make_network, save_checkpoint
from .ode_core import DeuParams, StabilityConfig
from .training import RunMetrics, TrainConfig, train

__all__ = ["resolve_data_dir", "build_datasets", "build_network", "run", "find_mnist", "write_jsonl"]

MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


def resolve_data_dir(data_dir=None) -> Path | None:
    """Explicit directory first, then the DEU_DATA_DIR environment variable."""
    chosen = data_dir or os.environ.get("DEU_DATA_DIR")
    return Path(chosen) if chosen else None


def find_mnist(data_dir) -> dict[str, Path]:
    """Locate the four MNIST IDX files (plain or .gz) under ``data_dir``."""
    root = resolve_data_dir(data_dir)
    if root is None:
        raise DataError("MNIST needs a data directory (--data-dir or DEU_DATA_DIR) holding the IDX files "
                        + ", ".join(MNIST_FILES.values()))
    found = {}
    for key, stem in MNIST_FILES.items():
        for name in (stem, stem + ".gz"):
            if (root / name).exists():
                found[key] = root / name
                break
        else:
            raise DataError(f"{root / stem}: missing MNIST file (IDX format, optionally .gz)")
    return found


def _tabular_path(cfg: RunConfig) -> Path:
    path = Path(cfg.data_file)
    if not path.is_absolute():
        root = resolve_data_dir(cfg.data_dir)
        if root is not None and (root / path).exists():
            path = root / path
    return path


def build_datasets(cfg: RunConfig) -> tuple[Dataset, Dataset | None]:
    """``(train, eval)`` for the configured task; eval is None for the toy regressions."""
    seed = cfg.data_rng_seed
    if cfg.task == "sine":
        return data.gen_sine(cfg.n_samples, seed, cfg.extend), None
    if cfg.task == "complex":
        return data.gen_complex_periodic(cfg.n_samples, seed), None
    if cfg.task == "circles":
        ds = data.gen_circles(cfg.n_samples, cfg.noise, seed)
        return data.train_test_split(ds, cfg.test_fraction, seed)
    if cfg.task == "tabular":
        schema = data.DelimitedSchema(header=None, target_column=cfg.target_column, labels=cfg.labels)
        ds = data.load_delimited(_tabular_path(cfg), schema)
        return data.train_test_split(ds, cfg.test_fraction, seed)
    files = find_mnist(cfg.data_dir)
    train_ds = data.load_idx(files["train_images"], files["train_labels"])
    test_ds = data.load_idx(files["test_images"], files["test_labels"])
    return train_ds, Dataset(test_ds.inputs, test_ds.targets, "test")


def _output_width(cfg: RunConfig, ds: Dataset) -> int:
    if cfg.loss == "cross_entropy":
        return int(ds.targets.max()) + 1
    return ds.targets.shape[1]


def build_network(cfg: RunConfig, ds: Dataset | None = None, seed_offset: int = 0) -> Network:
    sizes = list(cfg.sizes)
    if ds is not None:
        if sizes[0] != ds.inputs.shape[1]:
            raise ConfigError(f"sizes: input width {sizes[0]} but the data has {ds.inputs.shape[1]} features")
        if cfg.loss == "cross_entropy" and sizes[-1] < _output_width(cfg, ds):
            raise ConfigError(f"sizes: {sizes[-1]} outputs for {_output_width(cfg, ds)} classes")
        if cfg.loss == "mse" and sizes[-1] != _output_width(cfg, ds):
            raise ConfigError(f"sizes: {sizes[-1]} outputs for {_output_width(cfg, ds)} regression targets")
    stab = StabilityConfig(cfg.eps, cfg.s_delta, cfg.s_act)
    deu_init = None
    if cfg.deu_init is not None:
        deu_init = {cfg.activations.index("deu"): [DeuParams(*row) for row in cfg.deu_init]}
    return make_network(sizes, cfg.activations, cfg.seed + seed_offset, stab, deu_init,
                        TStarMode(cfg.t_star_mode))


def train_config(cfg: RunConfig) -> TrainConfig:
    return TrainConfig(epochs=cfg.epochs, batch_size=cfg.batch_size, lr_weights=cfg.lr_weights,
                       lr_coeffs=cfg.lr_coeffs, coef_update_every=cfg.coef_update_every, loss=cfg.loss,
                       seed=cfg.seed, eval_every=cfg.eval_every, spike_guard=cfg.spike_guard,
                       stop_loss=cfg.stop_loss)


def write_jsonl(path, records):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _folds(cfg: RunConfig):
    train_ds, eval_ds = build_datasets(cfg)
    if cfg.kfold is None:
        yield None, train_ds, eval_ds
        return
    full = train_ds
    if eval_ds is not None:
        full = Dataset(np.concatenate([train_ds.inputs, eval_ds.inputs]),
                       np.concatenate([train_ds.targets, eval_ds.targets]), "train",
                       train_ds.normalization)
    for k, (tr, te) in enumerate(data.kfold_splits(full, cfg.kfold, cfg.data_rng_seed)):
        yield k, tr, te


def run(cfg: RunConfig, write: bool = True, on_epoch=None) -> list[RunMetrics]:
    """Train per the config (once, or once per fold) and write the outputs.

    Writes ``config.json``, ``metrics.jsonl`` (one record per evaluated
    epoch), ``timings.jsonl`` (wall-clock per epoch, kept apart so metrics
    stay byte-identical across runs) and ``checkpoint.json`` (one per fold
    with k-fold).
    """
    out = Path(cfg.output_dir)
    results, records, timings = [], [], []
    for fold, train_ds, eval_ds in _folds(cfg):
        net = build_network(cfg, train_ds, seed_offset=fold or 0)
        metrics = train(net, train_ds, train_config(cfg), eval_ds, on_epoch=on_epoch)
        tag = {} if fold is None else {"fold": fold}
        records += [{**tag, **r} for r in metrics.records]
        timings += [{**tag, **r} for r in metrics.timings]
        results.append(metrics)
        if write:
            out.mkdir(parents=True, exist_ok=True)
            name = "checkpoint.json" if fold is None else f"checkpoint-fold{fold}.json"
            save_checkpoint(net, out / name)
    if write:
        (out / "config.json").write_text(cfg.dumps() + "\n")
        write_jsonl(out / "metrics.jsonl", records)
        write_jsonl(out / "timings.jsonl", timings)
    return results
