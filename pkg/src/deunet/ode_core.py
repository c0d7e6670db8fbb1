"""Closed-form solutions of ``a y'' + b y' + c y = u(t)`` and their partials.

Every parameter subspace of (a, b, c) has its own closed form
``y(t) = f(t) + c1 * f1(t) + c2 * f2(t)`` where ``f`` is the step response
(zero value and slope at t = 0) and ``f1``, ``f2`` span the homogeneous
solutions.  Each regime kernel returns the value together with the analytic
derivatives with respect to t, a, b, c, c1 and c2.

All kernels are vectorized over numpy arrays.  Dirac deltas produced by
differentiating ``u(t)`` are replaced with the sigmoid-derivative surrogate
``delta_approx`` and every exponent argument is clipped to
``+-exp_arg_cap``; derivatives of a clipped exponential are zero.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, fields

import numpy as np

__all__ = [
    "DeuParams",
    "StabilityConfig",
    "Regime",
    "ActivationEval",
    "DEFAULT_CONFIG",
    "clamp_params",
    "clamp_arrays",
    "classify_regime",
    "classify_arrays",
    "heaviside",
    "delta_approx",
    "sigmoid",
    "core_activation",
    "evaluate",
    "evaluate_arrays",
    "evaluate_regime",
    "singular_mask",
]


@dataclass(frozen=True)
class StabilityConfig:
    eps: float = 0.01
    s_delta: float = 100.0
    s_act: float = 1.0
    exp_arg_cap: float = 50.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not np.isfinite(v) or v <= 0:
                raise ValueError(f"{f.name} must be a positive finite number, got {v!r}")


DEFAULT_CONFIG = StabilityConfig()


@dataclass(frozen=True)
class DeuParams:
    """The five learnable coefficients of one DEU neuron."""

    a: float
    b: float
    c: float
    c1: float = 0.0
    c2: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c, self.c1, self.c2], dtype=np.float64)

    @classmethod
    def from_array(cls, arr) -> "DeuParams":
        a, b, c, c1, c2 = (float(x) for x in arr)
        return cls(a, b, c, c1, c2)

    def replace(self, **kw) -> "DeuParams":
        d = dict(a=self.a, b=self.b, c=self.c, c1=self.c1, c2=self.c2)
        d.update(kw)
        return DeuParams(**d)


class Regime(enum.IntEnum):
    SIGMOID_CORE = 0  # a=0, b=0, c!=0
    FIRST_ORDER_PURE = 1  # a=0, b!=0, c=0
    FIRST_ORDER_DECAY = 2  # a=0, b!=0, c!=0
    PURE_QUADRATIC = 3  # a!=0, b=0, c=0
    PURE_OSCILLATION = 4  # b=0, ac>0
    PURE_EXPONENTIAL = 5  # b=0, ac<0
    DAMPED_NO_STIFFNESS = 6  # a!=0, b!=0, c=0
    GENERAL_UNDERDAMPED = 7  # abc!=0, disc<0
    GENERAL_OVERDAMPED = 8  # abc!=0, disc>0
    GENERAL_CRITICAL = 9  # abc!=0, disc==0


@dataclass(frozen=True)
class ActivationEval:
    """Value and partial derivatives of an activation; fields are floats or arrays."""

    y: object
    dy_dt: object
    dy_da: object
    dy_db: object
    dy_dc: object
    dy_dc1: object
    dy_dc2: object

    def param_grads(self) -> np.ndarray:
        """Stack the five parameter partials along a trailing axis."""
        return np.stack(
            np.broadcast_arrays(self.dy_da, self.dy_db, self.dy_dc, self.dy_dc1, self.dy_dc2),
            axis=-1,
        )


# ---------------------------------------------------------------------------
# Clamping and classification
# ---------------------------------------------------------------------------


def clamp_arrays(a, b, c, eps: float):
    """Vectorized clamp of (a, b, c); returns new float64 arrays.

    1. Coefficients with ``0 < |q| < eps`` become 0 (``|q| == eps`` is kept).
    2. ``a = b = c = 0`` becomes ``b = eps``.
    3. If ``b != 0``, ``sign(a) == sign(c)`` and ``|b^2 - 4ac| < eps`` the
       discriminant is forced to zero with ``|a| = |c| = m`` where
       ``m = max(|b| / 2, eps)`` (``b`` is only rescaled when ``|b| < 2 eps``).
    """
    a, b, c = (np.array(x, dtype=np.float64, copy=True) for x in np.broadcast_arrays(a, b, c))
    for q in (a, b, c):
        q[np.abs(q) < eps] = 0.0
    all_zero = (a == 0) & (b == 0) & (c == 0)
    b[all_zero] = eps

    disc = b * b - 4.0 * a * c
    near = (b != 0) & (a != 0) & (c != 0) & (np.sign(a) == np.sign(c)) & (np.abs(disc) < eps)
    if np.any(near):
        m = np.maximum(np.abs(b[near]) / 2.0, eps)
        a[near] = np.sign(a[near]) * m
        c[near] = np.sign(c[near]) * m
        b[near] = np.sign(b[near]) * 2.0 * m
    return a, b, c


def clamp_params(p: DeuParams, cfg: StabilityConfig = DEFAULT_CONFIG) -> DeuParams:
    arr = p.as_array()
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"non-finite DEU parameters: {p}")
    a, b, c = clamp_arrays(p.a, p.b, p.c, cfg.eps)
    return DeuParams(float(a), float(b), float(c), p.c1, p.c2)


def classify_arrays(a, b, c, eps: float | None = None) -> np.ndarray:
    """Regime tag per element.  With ``eps`` given, unclamped input is rejected."""
    a, b, c = (np.asarray(x, dtype=np.float64) for x in np.broadcast_arrays(a, b, c))
    if eps is not None:
        ca, cb, cc = clamp_arrays(a, b, c, eps)
        if not (np.array_equal(ca, a) and np.array_equal(cb, b) and np.array_equal(cc, c)):
            raise ValueError("parameters are not clamped; call clamp_params first")
    az, bz, cz = a == 0, b == 0, c == 0
    if np.any(az & bz & cz):
        raise ValueError("a = b = c = 0 is not a valid DEU parameter set")
    disc = b * b - 4.0 * a * c
    ac = a * c
    out = np.full(a.shape, -1, dtype=np.int64)
    out[az & bz & ~cz] = Regime.SIGMOID_CORE
    out[az & ~bz & cz] = Regime.FIRST_ORDER_PURE
    out[az & ~bz & ~cz] = Regime.FIRST_ORDER_DECAY
    out[~az & bz & cz] = Regime.PURE_QUADRATIC
    out[~az & bz & ~cz & (ac > 0)] = Regime.PURE_OSCILLATION
    out[~az & bz & ~cz & (ac < 0)] = Regime.PURE_EXPONENTIAL
    out[~az & ~bz & cz] = Regime.DAMPED_NO_STIFFNESS
    general = ~az & ~bz & ~cz
    out[general & (disc < 0)] = Regime.GENERAL_UNDERDAMPED
    out[general & (disc > 0)] = Regime.GENERAL_OVERDAMPED
    out[general & (disc == 0)] = Regime.GENERAL_CRITICAL
    return out


def classify_regime(p: DeuParams, cfg: StabilityConfig = DEFAULT_CONFIG) -> Regime:
    return Regime(int(classify_arrays(p.a, p.b, p.c, cfg.eps)))


def singular_mask(a, b, c) -> np.ndarray:
    """Boolean (..., 3) array flagging which of a, b, c sit in a singular subspace."""
    return np.stack(np.broadcast_arrays(np.asarray(a) == 0, np.asarray(b) == 0, np.asarray(c) == 0), axis=-1)


# ---------------------------------------------------------------------------
# Elementary functions
# ---------------------------------------------------------------------------


def heaviside(t):
    """Unit step with u(0) = 0."""
    out = (np.asarray(t) > 0).astype(np.float64)
    return float(out) if out.ndim == 0 else out


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    z = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    return float(out) if out.ndim == 0 else out


def delta_approx(t, s: float = DEFAULT_CONFIG.s_delta):
    """Smooth surrogate for Dirac's delta: the derivative of ``sigmoid(s t)``."""
    if s <= 0:
        raise ValueError("s must be positive")
    z = np.exp(-s * np.abs(np.asarray(t, dtype=np.float64)))
    out = s * z / (1.0 + z) ** 2
    return float(out) if out.ndim == 0 else out


def core_activation(regime, t, cfg: StabilityConfig = DEFAULT_CONFIG):
    """Forcing term of the ODE: sigmoid(s_act t) for the sigmoid core, u(t) otherwise."""
    regime = np.asarray(regime)
    t = np.asarray(t, dtype=np.float64)
    return np.where(regime == Regime.SIGMOID_CORE, sigmoid(cfg.s_act * t), heaviside(t))


def _cexp(x, cap):
    """exp of a clipped argument plus the mask where the clip is inactive."""
    return np.exp(np.clip(x, -cap, cap)), (np.abs(x) <= cap).astype(np.float64)


# ---------------------------------------------------------------------------
# Regime kernels
#
# Signature: (t, tau, a, b, c, c1, c2, cfg) -> (y, dt, da, db, dc, dc1, dc2)
# ``tau = t - origin`` is the argument of the homogeneous basis; the step
# response always starts at t = 0.
# ---------------------------------------------------------------------------


def _k_sigmoid_core(t, tau, a, b, c, c1, c2, cfg):
    s = cfg.s_act
    sg = sigmoid(s * t)
    zero = np.zeros_like(t)
    y = sg / c
    dt = s * sg * (1.0 - sg) / c
    dc = -sg / (c * c)
    return y, dt, zero, zero, dc, zero, zero


def _k_first_order_pure(t, tau, a, b, c, c1, c2, cfg):
    U = heaviside(t)
    D = delta_approx(t, cfg.s_delta)
    zero = np.zeros_like(t)
    y = U * t / b + c1
    dt = U / b + D * t / b
    db = -U * t / (b * b)
    return y, dt, zero, db, zero, np.ones_like(t), zero


def _k_first_order_decay(t, tau, a, b, c, c1, c2, cfg):
    cap = cfg.exp_arg_cap
    U = heaviside(t)
    D = delta_approx(t, cfg.s_delta)
    k = -c / b
    e, m = _cexp(k * tau, cap)
    E, M = _cexp(k * t, cap)
    y = c1 * e + U * (1.0 - E) / c
    dt = c1 * k * m * e - (U / c) * k * M * E + D * (1.0 - E) / c
    dy_dk = c1 * tau * e * m - (U / c) * t * E * M
    db = dy_dk * (c / (b * b))
    dc = dy_dk * (-1.0 / b) - U * (1.0 - E) / (c * c)
    zero = np.zeros_like(t)
    return y, dt, zero, db, dc, e, zero


def _k_pure_quadratic(t, tau, a, b, c, c1, c2, cfg):
    U = heaviside(t)
    D = delta_approx(t, cfg.s_delta)
    zero = np.zeros_like(t)
    y = U * t * t / (2.0 * a) + c2 * tau + c1
    dt = U * t / a + D * t * t / (2.0 * a) + c2
    da = -U * t * t / (2.0 * a * a)
    return y, dt, da, zero, zero, np.ones_like(t), tau


def _k_pure_oscillation(t, tau, a, b, c, c1, c2, cfg):
    U = heaviside(t)
    D = delta_approx(t, cfg.s_delta)
    w = np.sqrt(c / a)
    cs, sn = np.cos(w * tau), np.sin(w * tau)
    C, S = np.cos(w * t), np.sin(w * t)
    y = c1 * cs + c2 * sn + U * (1.0 - C) / c
    dt = w * (c2 * cs - c1 * sn) + (U / c) * w * S + D * (1.0 - C) / c
    dy_dw = tau * (c2 * cs - c1 * sn) + (U / c) * t * S
    da = dy_dw * (-w / (2.0 * a))
    dc = dy_dw * (w / (2.0 * c)) - U * (1.0 - C) / (c * c)
    zero = np.zeros_like(t)
    return y, dt, da, zero, dc, cs, sn


def _k_pure_exponential(t, tau, a, b, c, c1, c2, cfg):
    cap = cfg.exp_arg_cap
    U = heaviside(t)
    D = delta_approx(t, cfg.s_delta)
    k = np.sqrt(-c / a)
    ep, mp = _cexp(k * tau, cap)
    em, mm = _cexp(-k * tau, cap)
    Ep, Mp = _cexp(k * t, cap)
    Em, Mm = _cexp(-k * t, cap)
    part = 1.0 - 0.5 * (Ep + Em)
    y = c1 * ep + c2 * em + U * part / c
    dt = k * (c1 * mp * ep - c2 * mm * em) - (U / (2.0 * c)) * k * (Mp * Ep - Mm * Em) + D * part / c
    dy_dk = tau * (c1 * mp * ep - c2 * mm * em) - (U / (2.0 * c)) * t * (Mp * Ep - Mm * Em)
    da = dy_dk * (-k / (2.0 * a))
    dc = dy_dk * (k / (2.0 * c)) - U * part / (c * c)
    zero = np.zeros_like(t)
    return y, dt, da, zero, dc, ep, em


def _k_damped_no_stiffness(t, tau, a, b, c, c1, c2, cfg):
    cap = cfg.exp_arg_cap
    U = heaviside(t)
    D = delta_approx(t, cfg.s_delta)
    k = -b / a
    e, m = _cexp(k * tau, cap)
    E, M = _cexp(k * t, cap)
    ab2 = a / (b * b)
    y = U * ab2 * (E - 1.0) - c1 * (a / b) * e + U * t / b + c2
    dt = U * ab2 * k * M * E - c1 * (a / b) * k * m * e + U / b + D * (ab2 * (E - 1.0) + t / b)
    dy_dk = U * ab2 * t * E * M - c1 * (a / b) * tau * e * m
    da = U * (E - 1.0) / (b * b) - c1 * e / b + dy_dk * (b / (a * a))
    db = (-2.0 * U * a * (E - 1.0) / b**3 + c1 * a * e / (b * b) - U * t / (b * b)
          + dy_dk * (-1.0 / a))
    zero = np.zeros_like(t)
    return y, dt, da, db, zero, -(a / b) * e, np.ones_like(t)


def _k_general_overdamped(t, tau, a, b, c, c1, c2, cfg):
    cap = cfg.exp_arg_cap
    U = heaviside(t)
    D = delta_approx(t, cfg.s_delta)
    sq = np.sqrt(b * b - 4.0 * a * c)
    # stable roots; r1 takes +sq, r2 takes -sq
    q = -0.5 * (b + np.where(b >= 0, sq, -sq))
    r_small, r_big = c / q, q / a
    r1 = np.where(b >= 0, r_small, r_big)
    r2 = np.where(b >= 0, r_big, r_small)
    e1, m1 = _cexp(r1 * tau, cap)
    e2, m2 = _cexp(r2 * tau, cap)
    E1, M1 = _cexp(r1 * t, cap)
    E2, M2 = _cexp(r2 * t, cap)
    part = 1.0 / c + E1 / (r1 * sq) - E2 / (r2 * sq)

    y = c1 * e1 + c2 * e2 + U * part
    dt = c1 * r1 * m1 * e1 + c2 * r2 * m2 * e2 + U * (M1 * E1 - M2 * E2) / sq + D * part

    dy_dr1 = c1 * tau * e1 * m1 + U * (t * E1 * M1 / (r1 * sq) - E1 / (r1 * r1 * sq))
    dy_dr2 = c2 * tau * e2 * m2 + U * (-t * E2 * M2 / (r2 * sq) + E2 / (r2 * r2 * sq))
    dy_dsq = U * (-E1 / (r1 * sq * sq) + E2 / (r2 * sq * sq))
    # implicit differentiation of a r^2 + b r + c = 0; 2 a r1 + b = sq, 2 a r2 + b = -sq
    da = -dy_dr1 * r1 * r1 / sq + dy_dr2 * r2 * r2 / sq + dy_dsq * (-2.0 * c / sq)
    db = -dy_dr1 * r1 / sq + dy_dr2 * r2 / sq + dy_dsq * (b / sq)
    dc = -dy_dr1 / sq + dy_dr2 / sq + dy_dsq * (-2.0 * a / sq) - U / (c * c)
    return y, dt, da, db, dc, e1, e2


def _k_general_underdamped(t, tau, a, b, c, c1, c2, cfg):
    cap = cfg.exp_arg_cap
    U = heaviside(t)
    D = delta_approx(t, cfg.s_delta)
    qd = np.sqrt(4.0 * a * c - b * b)
    al = -b / (2.0 * a)
    be = qd / (2.0 * a)
    e, m = _cexp(al * tau, cap)
    E, M = _cexp(al * t, cap)
    cs, sn = np.cos(be * tau), np.sin(be * tau)
    C, S = np.cos(be * t), np.sin(be * t)
    P = C - (al / be) * S
    part = (1.0 - E * P) / c

    y = e * (c1 * cs + c2 * sn) + U * part
    dt = (c1 * (al * m * e * cs - be * e * sn) + c2 * (al * m * e * sn + be * e * cs)
          - (U / c) * (al * M * E * P + E * (-be * S - al * C)) + D * part)

    dy_dal = tau * e * m * (c1 * cs + c2 * sn) - (U / c) * (t * E * M * P - E * S / be)
    dy_dbe = e * tau * (c2 * cs - c1 * sn) - (U / c) * E * (-t * S - (al / be) * t * C + (al / (be * be)) * S)
    da = dy_dal * (b / (2.0 * a * a)) + dy_dbe * (-be / a + c / (a * qd))
    db = dy_dal * (-1.0 / (2.0 * a)) + dy_dbe * (-b / (2.0 * a * qd))
    dc = dy_dbe * (1.0 / qd) - U * part / c
    return y, dt, da, db, dc, e * cs, e * sn


def _k_general_critical(t, tau, a, b, c, c1, c2, cfg):
    # The step response is analytic in s = r^2 - c/a = disc / 4a^2 across the
    # critical manifold: with r = -b/2a it equals
    #   (1/c) (1 + e^{rt} (r sinh(sqrt(s) t) / sqrt(s) - cosh(sqrt(s) t))),
    # and carrying its first-order term in s makes the (a, b, c) partials
    # agree with the neighbouring over- and underdamped forms.
    cap = cfg.exp_arg_cap
    U = heaviside(t)
    D = delta_approx(t, cfg.s_delta)
    r = -b / (2.0 * a)
    s = r * r - c / a
    e, m = _cexp(r * tau, cap)
    E, M = _cexp(r * t, cap)
    t2, t3 = t * t, t * t * t
    Q = r * (t + s * t3 / 6.0) - 1.0 - s * t2 / 2.0
    part = (1.0 + E * Q) / c
    y = e * (c1 + c2 * tau) + U * part
    dt = (c1 * r * m * e + c2 * (e + tau * r * m * e)
          + (U / c) * (r * M * E * Q + E * (r + r * s * t2 / 2.0 - s * t)) + D * part)
    dy_dr = tau * e * m * (c1 + c2 * tau) + (U / c) * (t * E * M * Q + E * (t + s * t3 / 6.0))
    dy_ds = (U / c) * E * (r * t3 / 6.0 - t2 / 2.0)
    da = dy_dr * (-r / a) + dy_ds * (-2.0 * r * r / a + c / (a * a))
    db = dy_dr * (-1.0 / (2.0 * a)) + dy_ds * (-r / a)
    dc = dy_ds * (-1.0 / a) - U * part / c
    return y, dt, da, db, dc, e, tau * e


_KERNEL_LIST = {
    Regime.SIGMOID_CORE: _k_sigmoid_core,
    Regime.FIRST_ORDER_PURE: _k_first_order_pure,
    Regime.FIRST_ORDER_DECAY: _k_first_order_decay,
    Regime.PURE_QUADRATIC: _k_pure_quadratic,
    Regime.PURE_OSCILLATION: _k_pure_oscillation,
    Regime.PURE_EXPONENTIAL: _k_pure_exponential,
    Regime.DAMPED_NO_STIFFNESS: _k_damped_no_stiffness,
    Regime.GENERAL_UNDERDAMPED: _k_general_underdamped,
    Regime.GENERAL_OVERDAMPED: _k_general_overdamped,
    Regime.GENERAL_CRITICAL: _k_general_critical,
}
# plain-int keys as well, so numpy integer tags index without an enum lookup
_KERNELS = {**_KERNEL_LIST, **{int(k): v for k, v in _KERNEL_LIST.items()}}


# ---------------------------------------------------------------------------
# Public evaluation API
# ---------------------------------------------------------------------------


def _check_finite(*arrays):
    for x in arrays:
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite input to DEU evaluation")


def evaluate_regime(regime, t, a, b, c, c1=0.0, c2=0.0, cfg: StabilityConfig = DEFAULT_CONFIG,
                    origin=0.0) -> ActivationEval:
    """Evaluate one regime's closed form, without checking that it applies.

    Used by the batched layer (one call per regime block) and by derivative
    checks that perturb a parameter inside a fixed functional form.
    """
    a, b, c, c1, c2, origin = (np.asarray(x, dtype=np.float64) for x in (a, b, c, c1, c2, origin))
    t = np.asarray(t, dtype=np.float64)
    shape = np.broadcast_shapes(t.shape, a.shape, b.shape, c.shape, c1.shape, c2.shape, origin.shape)
    if t.shape != shape:
        t = np.broadcast_to(t, shape)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        out = _KERNELS[regime](t, t - origin, a, b, c, c1, c2, cfg)
    return ActivationEval(*(v if v.shape == shape else np.broadcast_to(v, shape).copy() for v in out))


def evaluate_arrays(t, a, b, c, c1, c2, cfg: StabilityConfig = DEFAULT_CONFIG, origin=0.0,
                    regimes=None) -> ActivationEval:
    """Evaluate clamped parameters elementwise (all inputs broadcast together).

    ``regimes`` may be passed when already known to skip classification.
    """
    arrs = np.broadcast_arrays(*(np.asarray(x, dtype=np.float64) for x in (t, a, b, c, c1, c2, origin)))
    _check_finite(*arrs)
    t, a, b, c, c1, c2, origin = arrs
    if regimes is None:
        regimes = classify_arrays(a, b, c)
    regimes = np.broadcast_to(regimes, t.shape)
    out = [np.zeros(t.shape) for _ in range(7)]
    for reg in np.unique(regimes):
        sel = regimes == reg
        res = evaluate_regime(reg, t[sel], a[sel], b[sel], c[sel], c1[sel], c2[sel], cfg, origin[sel])
        for dst, src in zip(out, (res.y, res.dy_dt, res.dy_da, res.dy_db, res.dy_dc, res.dy_dc1, res.dy_dc2)):
            dst[sel] = src
    return ActivationEval(*out)


def evaluate(p: DeuParams, t, cfg: StabilityConfig = DEFAULT_CONFIG, origin: float = 0.0) -> ActivationEval:
    """Evaluate one neuron's activation at ``t`` (scalar or array).

    ``p`` must already be clamped.  Scalar ``t`` yields float fields.
    """
    classify_regime(p, cfg)
    scalar = np.ndim(t) == 0
    res = evaluate_arrays(t, p.a, p.b, p.c, p.c1, p.c2, cfg, origin)
    if scalar:
        return ActivationEval(*(float(v) for v in (res.y, res.dy_dt, res.dy_da, res.dy_db,
                                                  res.dy_dc, res.dy_dc1, res.dy_dc2)))
    return res
