"""Minibatch training loop with per-epoch metrics and regime census."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .nn import AdamState, Network, adam_step, loss_eval, network_backward, network_forward
from .ode_core import Regime

__all__ = ["TrainConfig", "RunMetrics", "train", "evaluate_dataset", "regime_census"]


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    lr_weights: float = 1e-3
    lr_coeffs: float = 1e-2
    coef_update_every: str = "batch"  # or "epoch"
    loss: str = "mse"
    seed: int = 0
    eval_every: int = 1
    # undo a step that multiplies its batch loss by more than this factor
    # (or makes it non-finite); None disables the guard
    spike_guard: float | None = None
    # end training early once a recorded train loss falls below this
    stop_loss: float | None = None

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.eval_every < 1:
            raise ValueError("epochs, batch_size and eval_every must be positive")
        if self.spike_guard is not None and not self.spike_guard > 1:
            raise ValueError("spike_guard must exceed 1")
        if self.coef_update_every not in ("batch", "epoch"):
            raise ValueError("coef_update_every must be 'batch' or 'epoch'")
        if self.loss not in ("mse", "cross_entropy"):
            raise ValueError(f"unknown loss {self.loss!r}")


@dataclass
class RunMetrics:
    records: list = field(default_factory=list)
    timings: list = field(default_factory=list)

    @property
    def final(self) -> dict:
        return self.records[-1]

    def summary(self) -> dict:
        last = self.final
        out = {k: last[k] for k in ("epoch", "train_loss", "eval_loss", "accuracy") if k in last}
        out["best_train_loss"] = min(r["train_loss"] for r in self.records)
        return out


def regime_census(net: Network) -> dict[str, int]:
    counts = dict.fromkeys((r.name for r in Regime), 0)
    for state in net.deu_layers():
        for name, n in state.census().items():
            counts[name] += n
    return counts


def evaluate_dataset(net: Network, ds: Dataset, loss: str, batch_size: int = 4096):
    """Mean loss (and accuracy for classification) over a whole dataset."""
    total, correct, n = 0.0, 0, len(ds)
    for start in range(0, n, batch_size):
        xb = ds.inputs[start:start + batch_size]
        yb = ds.targets[start:start + batch_size]
        out, _ = network_forward(net, xb)
        value, _ = loss_eval(loss, out, yb)
        total += value * len(xb)
        if loss == "cross_entropy":
            correct += int((out.argmax(axis=1) == yb).sum())
    acc = correct / n if loss == "cross_entropy" else None
    return total / n, acc


def _record(net, epoch, train_ds, eval_ds, cfg):
    rec = {"epoch": epoch}
    rec["train_loss"], train_acc = evaluate_dataset(net, train_ds, cfg.loss)
    if eval_ds is not None:
        rec["eval_loss"], acc = evaluate_dataset(net, eval_ds, cfg.loss)
        if acc is not None:
            rec["accuracy"] = acc
    elif train_acc is not None:
        rec["accuracy"] = train_acc
    if net.deu_layers():
        rec["census"] = regime_census(net)
    return rec


def _snapshot(params, adam):
    moments = {k: (adam.m[k].copy(), adam.v[k].copy(), adam.counts[k]) for k in adam.m}
    return {k: p.copy() for k, p in params.items()}, moments, adam.step


def _restore(params, adam, snap):
    values, moments, step = snap
    for k, p in params.items():
        p[...] = values[k]
    adam.m = {k: m.copy() for k, (m, _, _) in moments.items()}
    adam.v = {k: v.copy() for k, (_, v, _) in moments.items()}
    adam.counts = {k: n for k, (_, _, n) in moments.items()}
    adam.step = step


def train(net: Network, train_ds: Dataset, cfg: TrainConfig, eval_ds: Dataset | None = None,
          adam: AdamState | None = None, on_epoch=None) -> RunMetrics:
    """Train ``net`` in place.  Deterministic given ``cfg.seed``.

    With ``coef_update_every == "epoch"`` DEU coefficient gradients are summed
    over the epoch and applied once at its end; weights update every batch.

    With ``cfg.spike_guard`` set, every step is checked on its own batch: if
    the loss grew by more than that factor the step is undone and the step
    size halved (doubling back on each accepted step).  DEUs that wander into
    a stiff regime can produce losses many orders of magnitude above the
    running level, and a single such gradient otherwise dominates Adam's
    moment estimates for hundreds of steps.
    """
    adam = adam or AdamState(lr_weights=cfg.lr_weights, lr_coeffs=cfg.lr_coeffs)
    rng = np.random.default_rng(cfg.seed)
    params = net.params()
    eps_by_key = {f"deu{i}": l.activation.cfg.eps for i, l in enumerate(net.layers) if l.is_deu}
    eps = min(eps_by_key.values()) if eps_by_key else None
    metrics = RunMetrics()
    metrics.records.append(_record(net, 0, train_ds, eval_ds, cfg))
    n = len(train_ds)
    guard = cfg.spike_guard
    scale, rejected = 1.0, 0

    def batch_loss(idx, with_grad):
        with np.errstate(over="ignore", invalid="ignore"):
            out, caches = network_forward(net, train_ds.inputs[idx])
            value, grad = loss_eval(cfg.loss, out, train_ds.targets[idx])
        if not with_grad:
            return value
        if not np.isfinite(value):
            raise FloatingPointError(f"epoch {epoch}: non-finite training loss")
        return value, network_backward(net, caches, grad)

    def step(grads, idx, before):
        # with the guard on, re-check the batch and undo a step that blew it up
        nonlocal scale, rejected
        snap = _snapshot(params, adam) if guard is not None else None
        adam_step(adam, params, grads, eps, lr_scale=scale)
        if snap is None:
            return
        if batch_loss(idx, False) <= guard * before:
            scale = min(1.0, 2.0 * scale)
        else:
            _restore(params, adam, snap)
            scale *= 0.5
            rejected += 1

    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        perm = rng.permutation(n)
        pending = {}
        for start in range(0, n, cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            value, grads = batch_loss(idx, True)
            if cfg.coef_update_every == "epoch":
                for key in eps_by_key:
                    pending[key] = pending.get(key, 0.0) + grads.pop(key)
            step(grads, idx, value)
        if pending:
            idx = perm[:cfg.batch_size]
            step(pending, idx, batch_loss(idx, False))
        wall_ms = (time.perf_counter() - t0) * 1e3
        if epoch % cfg.eval_every == 0 or epoch == cfg.epochs:
            metrics.records.append(_record(net, epoch, train_ds, eval_ds, cfg))
            if guard is not None:
                metrics.records[-1]["rejected_steps"] = rejected
            metrics.timings.append({"epoch": epoch, "wall_ms": wall_ms})
            if on_epoch is not None:
                on_epoch(metrics.records[-1])
            if cfg.stop_loss is not None and metrics.records[-1]["train_loss"] < cfg.stop_loss:
                break
    return metrics
