"""Run configuration: a flat JSON document with one key per field."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .nn import FIXED_ACTIVATIONS

__all__ = ["RunConfig", "ConfigError", "TASKS", "load_config"]

TASKS = ("sine", "complex", "circles", "tabular", "mnist")


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending field."""


@dataclass
class RunConfig:
    task: str = "sine"
    sizes: list = field(default_factory=lambda: [1, 2, 1])
    activations: list = field(default_factory=lambda: ["deu", "identity"])
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0
    # seed for generated data and splits; falls back to ``seed``
    data_seed: int | None = None
    lr_weights: float = 1e-3
    lr_coeffs: float = 1e-2
    coef_update_every: str = "batch"
    eps: float = 0.01
    s_delta: float = 100.0
    s_act: float = 1.0
    t_star_mode: str = "batch_mean"
    spike_guard: float | None = None
    stop_loss: float | None = None
    # explicit [a, b, c, c1, c2] rows for the first DEU layer (random init if null)
    deu_init: list | None = None
    n_samples: int = 200
    noise: float = 0.1
    extend: float = 0.0
    test_fraction: float = 0.2
    kfold: int | None = None
    data_dir: str | None = None
    data_file: str | None = None
    target_column: int = -1
    labels: bool = False
    output_dir: str = "runs/latest"
    eval_every: int = 1

    def __post_init__(self):
        self.validate()

    @property
    def loss(self) -> str:
        if self.task in ("circles", "mnist") or (self.task == "tabular" and self.labels):
            return "cross_entropy"
        return "mse"

    def validate(self):
        def bad(name, why):
            raise ConfigError(f"{name}: {why}")

        if self.task not in TASKS:
            bad("task", f"must be one of {', '.join(TASKS)}, got {self.task!r}")
        sizes, acts = list(self.sizes), list(self.activations)
        if len(sizes) < 2 or not all(isinstance(s, int) and not isinstance(s, bool) and s > 0 for s in sizes):
            bad("sizes", "need at least two positive integer layer sizes")
        if len(acts) != len(sizes) - 1:
            bad("activations", f"need {len(sizes) - 1} entries (one per non-input layer), got {len(acts)}")
        for kind in acts:
            if kind != "deu" and kind not in FIXED_ACTIVATIONS:
                bad("activations", f"unknown activation {kind!r}")
        for name in ("epochs", "batch_size", "n_samples", "eval_every"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                bad(name, f"must be a positive integer, got {v!r}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            bad("seed", f"must be a non-negative integer, got {self.seed!r}")
        if self.data_seed is not None and (not isinstance(self.data_seed, int) or isinstance(self.data_seed, bool)
                                           or self.data_seed < 0):
            bad("data_seed", f"must be null or a non-negative integer, got {self.data_seed!r}")
        for name in ("lr_weights", "lr_coeffs", "eps", "s_delta", "s_act"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
                bad(name, f"must be a positive number, got {v!r}")
        if self.coef_update_every not in ("batch", "epoch"):
            bad("coef_update_every", "must be 'batch' or 'epoch'")
        if self.t_star_mode not in ("batch_mean", "fixed_zero"):
            bad("t_star_mode", "must be 'batch_mean' or 'fixed_zero'")
        if self.spike_guard is not None and not (isinstance(self.spike_guard, (int, float)) and self.spike_guard > 1):
            bad("spike_guard", "must be null or a number above 1")
        if self.stop_loss is not None and not (isinstance(self.stop_loss, (int, float)) and self.stop_loss > 0):
            bad("stop_loss", "must be null or a positive number")
        if self.noise < 0 or self.extend < 0:
            bad("noise" if self.noise < 0 else "extend", "must be non-negative")
        if not 0 < self.test_fraction < 1:
            bad("test_fraction", "must lie strictly between 0 and 1")
        if self.kfold is not None and (not isinstance(self.kfold, int) or self.kfold < 2):
            bad("kfold", "must be null or an integer >= 2")
        if self.deu_init is not None:
            rows = self.deu_init
            if "deu" not in acts:
                bad("deu_init", "given but no layer uses the deu activation")
            width = sizes[acts.index("deu") + 1]
            if len(rows) != width or any(len(r) != 5 for r in rows):
                bad("deu_init", f"need {width} rows of [a, b, c, c1, c2]")
        if self.task == "tabular" and not self.data_file:
            bad("data_file", "required for the tabular task")

    @property
    def data_rng_seed(self) -> int:
        return self.seed if self.data_seed is None else self.data_seed

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config: expected a JSON object of key/value pairs")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"{unknown[0]}: unknown config key")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(f"config: {exc}") from None

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config: {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: {path} is not valid JSON ({exc})") from None
    return RunConfig.from_dict(doc)
