"""Activation sweeps written as CSV plot data."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .deu import sweep_activation
from .ode_core import DEFAULT_CONFIG, DeuParams, StabilityConfig, clamp_params

__all__ = ["sweep_family", "write_sweep", "read_sweep", "parse_range"]


def parse_range(text: str) -> tuple[float, float]:
    """``"lo:hi"`` -> (lo, hi); rejects empty or reversed ranges."""
    try:
        lo, hi = (float(x) for x in text.split(":"))
    except ValueError:
        raise ValueError(f"range must look like lo:hi, got {text!r}") from None
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo >= hi:
        raise ValueError(f"degenerate range {text!r}")
    return lo, hi


def sweep_family(p: DeuParams, t_min: float, t_max: float, n: int, vary: str | None = None,
                 values=(), cfg: StabilityConfig = DEFAULT_CONFIG):
    """Return ``(t, columns)`` where columns maps a label to the y values.

    Without ``vary`` there is one column ``y`` for ``p``.  With ``vary`` in
    {a, b, c, c1, c2} there is one column per value, the other coefficients
    held at ``p``.  Parameters are clamped before evaluation.
    """
    if vary is None:
        pts = sweep_activation(clamp_params(p, cfg), t_min, t_max, n, cfg)
        t = np.array([x for x, _ in pts])
        return t, {"y": np.array([y for _, y in pts])}
    if vary not in ("a", "b", "c", "c1", "c2"):
        raise ValueError(f"can only vary one of a, b, c, c1, c2, not {vary!r}")
    if len(values) == 0:
        raise ValueError("a coefficient family needs at least one value")
    cols, t = {}, None
    for v in values:
        pts = sweep_activation(clamp_params(p.replace(**{vary: float(v)}), cfg), t_min, t_max, n, cfg)
        t = np.array([x for x, _ in pts])
        cols[f"{vary}={float(v):g}"] = np.array([y for _, y in pts])
    return t, cols


def write_sweep(path, t, columns, params: DeuParams | None = None):
    path = Path(path)
    with open(path, "w", newline="") as fh:
        if params is not None:
            fh.write(f"# a={params.a!r} b={params.b!r} c={params.c!r} c1={params.c1!r} c2={params.c2!r}\n")
        writer = csv.writer(fh)
        writer.writerow(["t", *columns])
        for i, ti in enumerate(t):
            writer.writerow([repr(float(ti)), *(repr(float(col[i])) for col in columns.values())])


def read_sweep(path):
    """Inverse of ``write_sweep``: ``(t, columns)``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(line for line in fh if not line.startswith("#")))
    header, body = rows[0], np.array(rows[1:], dtype=np.float64).reshape(-1, len(rows[0]))
    return body[:, 0], {name: body[:, i + 1] for i, name in enumerate(header[1:])}
