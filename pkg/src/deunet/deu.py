"""DEU neurons as a trainable layer.

Forward evaluation follows the masked per-regime dispatch: neurons are
grouped by solution regime and each regime's closed form is evaluated once
over its block of columns.  Backward assembles input and coefficient
gradients and, for coefficients sitting in a singular subspace, borrows the
partial derivatives of a nearby non-singular ODE (outward gravitation).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .ode_core import (
    DEFAULT_CONFIG,
    ActivationEval,
    DeuParams,
    Regime,
    StabilityConfig,
    clamp_arrays,
    classify_arrays,
    evaluate_arrays,
    evaluate_regime,
    evaluate,
)

__all__ = [
    "TStarMode",
    "DeuLayerState",
    "DeuCache",
    "GravitationResult",
    "init_params",
    "forward_batch",
    "backward_batch",
    "outward_gravitation",
    "gravitation_arrays",
    "reference_point",
    "sweep_activation",
    "REGULARIZATION",
]

REGULARIZATION = 1e-9


class TStarMode(str, enum.Enum):
    BATCH_MEAN = "batch_mean"
    FIXED_ZERO = "fixed_zero"


@dataclass
class DeuLayerState:
    """Per-neuron coefficients of one DEU layer, stored as a (width, 5) array."""

    coeffs: np.ndarray
    cfg: StabilityConfig = DEFAULT_CONFIG
    t_star_mode: TStarMode = TStarMode.BATCH_MEAN
    # bound on partials borrowed from the hypothetical ODE; its stiff modes
    # grow like exp(|t - t*| / eps) away from the reference point
    grav_clip: float = 1e3

    def __post_init__(self):
        self.coeffs = np.array(self.coeffs, dtype=np.float64).reshape(-1, 5)
        if self.coeffs.shape[0] < 1:
            raise ValueError("a DEU layer needs at least one neuron")
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("non-finite DEU coefficients")
        self.t_star_mode = TStarMode(self.t_star_mode)
        self.clamp()

    @classmethod
    def from_params(cls, params, cfg: StabilityConfig = DEFAULT_CONFIG, t_star_mode=TStarMode.BATCH_MEAN,
                    grav_clip: float = 1e3):
        return cls(np.array([p.as_array() for p in params]), cfg, t_star_mode, grav_clip)

    @property
    def width(self) -> int:
        return self.coeffs.shape[0]

    @property
    def params(self) -> list[DeuParams]:
        return [DeuParams.from_array(row) for row in self.coeffs]

    def clamp(self):
        a, b, c = clamp_arrays(self.coeffs[:, 0], self.coeffs[:, 1], self.coeffs[:, 2], self.cfg.eps)
        self.coeffs[:, 0], self.coeffs[:, 1], self.coeffs[:, 2] = a, b, c

    def regimes(self) -> np.ndarray:
        return classify_arrays(self.coeffs[:, 0], self.coeffs[:, 1], self.coeffs[:, 2])

    def census(self) -> dict[str, int]:
        counts = np.bincount(self.regimes(), minlength=len(Regime))
        return {r.name: int(counts[r]) for r in Regime}


@dataclass
class DeuCache:
    t: np.ndarray
    coeffs: np.ndarray
    regimes: np.ndarray
    ev: ActivationEval


@dataclass(frozen=True)
class GravitationResult:
    """Hypothetical non-singular ODE matched to a neuron at ``origin``.

    The homogeneous basis of the hypothetical solution is anchored at
    ``origin`` (t* for singular neurons, 0 for the identity case).
    """

    a_t: float
    b_t: float
    c_t: float
    c1_t: float
    c2_t: float
    origin: float = 0.0

    @property
    def params(self) -> DeuParams:
        return DeuParams(self.a_t, self.b_t, self.c_t, self.c1_t, self.c2_t)


def init_params(seed: int, width: int, cfg: StabilityConfig = DEFAULT_CONFIG) -> list[DeuParams]:
    """a, b, c ~ Uniform(eps, 1) independently; c1 = c2 = 0."""
    if width < 1:
        raise ValueError("width must be at least 1")
    rng = np.random.default_rng(seed)
    abc = rng.uniform(cfg.eps, 1.0, size=(width, 3))
    coeffs = np.zeros((width, 5))
    coeffs[:, :3] = abc
    a, b, c = clamp_arrays(abc[:, 0], abc[:, 1], abc[:, 2], cfg.eps)
    coeffs[:, 0], coeffs[:, 1], coeffs[:, 2] = a, b, c
    return [DeuParams.from_array(row) for row in coeffs]


def reference_point(pre_activations, mode=TStarMode.BATCH_MEAN):
    """Reference t* per neuron: the batch mean of its pre-activation column.

    A 1-D input is treated as a single column and yields a float.
    """
    x = np.asarray(pre_activations, dtype=np.float64)
    if x.size == 0 or x.shape[0] == 0:
        raise ValueError("reference point of an empty batch")
    mode = TStarMode(mode)
    if mode is TStarMode.FIXED_ZERO:
        out = np.zeros(x.shape[1:]) if x.ndim > 1 else 0.0
    else:
        out = x.mean(axis=0)
    return float(out) if np.ndim(out) == 0 else out


def forward_batch(state: DeuLayerState, pre_activations):
    t = np.asarray(pre_activations, dtype=np.float64)
    if t.ndim != 2 or t.shape[1] != state.width:
        raise ValueError(f"expected input of shape (batch, {state.width}), got {t.shape}")
    if not np.all(np.isfinite(t)):
        raise ValueError("non-finite pre-activations")
    coeffs = state.coeffs.copy()
    regimes = state.regimes()
    outs = [np.zeros_like(t) for _ in range(7)]
    for reg in np.unique(regimes):
        mask = regimes == reg
        a, b, c, c1, c2 = coeffs[mask].T
        res = evaluate_regime(reg, t[:, mask], a, b, c, c1, c2, state.cfg)
        for dst, src in zip(outs, (res.y, res.dy_dt, res.dy_da, res.dy_db, res.dy_dc, res.dy_dc1, res.dy_dc2)):
            dst[:, mask] = src
    ev = ActivationEval(*outs)
    return ev.y, DeuCache(t=t, coeffs=coeffs, regimes=regimes, ev=ev)


def gravitation_arrays(coeffs, t_star, cfg: StabilityConfig = DEFAULT_CONFIG):
    """Vectorized outward gravitation for rows of clamped (a, b, c, c1, c2).

    Returns ``(tilde_coeffs, origin)``.  Non-singular rows come back unchanged
    with origin 0.
    """
    coeffs = np.array(coeffs, dtype=np.float64).reshape(-1, 5)
    t_star = np.broadcast_to(np.asarray(t_star, dtype=np.float64), coeffs.shape[:1]).copy()
    eps = cfg.eps
    out = coeffs.copy()
    origin = np.zeros(len(coeffs))
    abc = coeffs[:, :3]
    singular = np.any(np.abs(abc) < eps, axis=1)
    if not singular.any():
        return out, origin

    sub = abc[singular]
    tilde = np.where((sub > -eps) & (sub < 0), -eps, np.where((sub >= 0) & (sub < eps), eps, sub))
    ta, tb, tc = clamp_arrays(tilde[:, 0], tilde[:, 1], tilde[:, 2], eps)
    ts = t_star[singular]
    c1, c2 = coeffs[singular, 3], coeffs[singular, 4]

    actual = evaluate_arrays(ts, sub[:, 0], sub[:, 1], sub[:, 2], c1, c2, cfg)
    zero = np.zeros_like(ts)
    one = np.ones_like(ts)
    h0 = evaluate_arrays(ts, ta, tb, tc, zero, zero, cfg, origin=ts)
    h1 = evaluate_arrays(ts, ta, tb, tc, one, zero, cfg, origin=ts)
    h2 = evaluate_arrays(ts, ta, tb, tc, zero, one, cfg, origin=ts)

    A = np.empty((len(ts), 2, 2))
    A[:, 0, 0] = h1.y - h0.y
    A[:, 0, 1] = h2.y - h0.y
    A[:, 1, 0] = h1.dy_dt - h0.dy_dt
    A[:, 1, 1] = h2.dy_dt - h0.dy_dt
    B = np.stack([actual.y - h0.y, actual.dy_dt - h0.dy_dt], axis=1)
    At = np.transpose(A, (0, 2, 1))
    lhs = At @ A + REGULARIZATION * np.eye(2)
    rhs = (At @ B[:, :, None])[:, :, 0]
    sol = np.linalg.solve(lhs, rhs[:, :, None])[:, :, 0]

    out[singular] = np.column_stack([ta, tb, tc, sol[:, 0], sol[:, 1]])
    origin[singular] = ts
    return out, origin


def outward_gravitation(p: DeuParams, cfg: StabilityConfig = DEFAULT_CONFIG, t_star: float = 0.0) -> GravitationResult:
    out, origin = gravitation_arrays(p.as_array(), t_star, cfg)
    return GravitationResult(*(float(v) for v in out[0]), origin=float(origin[0]))


def _check_cache(state: DeuLayerState, cache: DeuCache, upstream):
    if not isinstance(cache, DeuCache):
        raise TypeError("backward_batch needs the cache returned by forward_batch")
    if cache.coeffs.shape != state.coeffs.shape or not np.array_equal(cache.coeffs, state.coeffs):
        raise ValueError("stale cache: layer coefficients changed since the forward pass")
    if upstream.shape != cache.t.shape:
        raise ValueError(f"upstream gradient shape {upstream.shape} != activations {cache.t.shape}")


def backward_batch(state: DeuLayerState, cache: DeuCache, upstream_grad):
    """Return ``(input_grad, param_grads)`` with param_grads of shape (width, 5).

    Coefficient gradients are summed over the batch.
    """
    g = np.asarray(upstream_grad, dtype=np.float64)
    _check_cache(state, cache, g)
    ev = cache.ev
    input_grad = g * ev.dy_dt
    partials = [ev.dy_da, ev.dy_db, ev.dy_dc, ev.dy_dc1, ev.dy_dc2]

    singular = cache.coeffs[:, :3] == 0
    cols = np.flatnonzero(singular.any(axis=1))
    if cols.size:
        partials = [p.copy() for p in partials[:3]] + partials[3:]
        t_star = reference_point(cache.t[:, cols], state.t_star_mode)
        tilde, origin = gravitation_arrays(cache.coeffs[cols], t_star, state.cfg)
        t = cache.t[:, cols]
        hyp = evaluate_arrays(t, *tilde.T, cfg=state.cfg, origin=origin)
        clip = state.grav_clip
        hyp_partials = [np.clip(d, -clip, clip) for d in (hyp.dy_da, hyp.dy_db, hyp.dy_dc)]
        for k in range(3):
            sel = singular[cols, k]
            if sel.any():
                partials[k][:, cols[sel]] = hyp_partials[k][:, sel]

    param_grads = np.stack([(g * p).sum(axis=0) for p in partials], axis=1)
    return input_grad, param_grads


def sweep_activation(p: DeuParams, t_min: float, t_max: float, n: int,
                     cfg: StabilityConfig = DEFAULT_CONFIG) -> list[tuple[float, float]]:
    if not (np.isfinite(t_min) and np.isfinite(t_max)) or t_min >= t_max:
        raise ValueError(f"degenerate sweep range [{t_min}, {t_max}]")
    if n < 2:
        raise ValueError("a sweep needs at least 2 points")
    grid = np.linspace(t_min, t_max, n)
    ys = evaluate(p, grid, cfg).y
    return [(float(t), float(y)) for t, y in zip(grid, ys)]
