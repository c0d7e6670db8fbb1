"""Independent checks: ODE residuals, finite differences, and the Fourier construction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .deu import DeuLayerState, TStarMode
from .nn import DenseLayer, Fixed, Network, loss_eval, network_backward, network_forward
from .ode_core import (
    DEFAULT_CONFIG,
    DeuParams,
    Regime,
    StabilityConfig,
    clamp_params,
    classify_arrays,
    classify_regime,
    core_activation,
    evaluate,
    evaluate_regime,
)

__all__ = [
    "FourierSpec",
    "ode_residual",
    "finite_diff",
    "build_fourier_network",
    "fourier_sum",
    "sample_params",
    "max_exponent",
    "gradient_errors",
    "relative_residual",
    "run_gradcheck",
    "GradcheckReport",
    "PARTIALS",
    "network_gradient_errors",
    "preactivation_margin",
]

PARTIALS = ("t", "a", "b", "c", "c1", "c2")


def finite_diff(fn, x: float, h: float = 1e-5) -> float:
    """Central difference ``(fn(x + h) - fn(x - h)) / 2h``."""
    if h <= 0:
        raise ValueError("step must be positive")
    return (fn(x + h) - fn(x - h)) / (2.0 * h)


def ode_residual(p: DeuParams, t: float, h: float = 1e-3, cfg: StabilityConfig = DEFAULT_CONFIG) -> float:
    """``a y'' + b y' + c y - g(t)`` with five-point stencils on the evaluated solution.

    ``g`` is the regime's forcing term (the sigmoid core for a = b = 0, the
    unit step otherwise).
    """
    if abs(t) <= 2 * h:
        raise ValueError(f"|t| = {abs(t)} is within 2h of the step at 0")
    grid = t + h * np.arange(-2, 3)
    y = evaluate(p, grid, cfg).y
    d1 = (y[0] - 8 * y[1] + 8 * y[3] - y[4]) / (12 * h)
    d2 = (-y[0] + 16 * y[1] - 30 * y[2] + 16 * y[3] - y[4]) / (12 * h * h)
    forcing = core_activation(classify_arrays(p.a, p.b, p.c), t, cfg)
    return float(p.a * d2 + p.b * d1 + p.c * y[2] - forcing)


def relative_residual(p: DeuParams, t: float, h: float = 1e-3, cfg: StabilityConfig = DEFAULT_CONFIG) -> float:
    """``ode_residual`` divided by ``max(1, |a y''|, |b y'|, |c y|)``.

    Growing exponentials reach 1e20 inside the exponent cap, where an
    absolute residual only measures stencil rounding.
    """
    grid = t + h * np.arange(-2, 3)
    y = evaluate(p, grid, cfg).y
    d1 = (y[0] - 8 * y[1] + 8 * y[3] - y[4]) / (12 * h)
    d2 = (-y[0] + 16 * y[1] - 30 * y[2] + 16 * y[3] - y[4]) / (12 * h * h)
    scale = max(1.0, abs(p.a * d2), abs(p.b * d1), abs(p.c * y[2]))
    return abs(ode_residual(p, t, h, cfg)) / scale


def max_exponent(p: DeuParams, t: float) -> float:
    """Largest ``|Re(r) * t|`` over the characteristic roots of ``p``.

    Computed from ``np.roots`` rather than the closed forms, so it can flag
    points where the exponent cap bends the solution.
    """
    if p.a != 0:
        roots = np.roots([p.a, p.b, p.c])
    elif p.b != 0:
        roots = np.array([-p.c / p.b])
    else:
        return 0.0
    return float(np.max(np.abs(roots.real)) * abs(t))


def _nonzero(rng, lo, hi):
    return rng.choice([-1.0, 1.0]) * rng.uniform(lo, hi)


def sample_params(rng: np.random.Generator, regime: Regime, bound: float = 3.0,
                  cfg: StabilityConfig = DEFAULT_CONFIG, floor: float = 0.1) -> DeuParams:
    """Random clamped parameters inside ``regime`` with |a|, |b|, |c| <= bound.

    Nonzero coefficients have magnitude at least ``floor``; c1, c2 ~ U[-1, 1].
    """
    regime = Regime(regime)
    zeros = {
        Regime.SIGMOID_CORE: "ab", Regime.FIRST_ORDER_PURE: "ac", Regime.FIRST_ORDER_DECAY: "a",
        Regime.PURE_QUADRATIC: "bc", Regime.PURE_OSCILLATION: "b", Regime.PURE_EXPONENTIAL: "b",
        Regime.DAMPED_NO_STIFFNESS: "c",
    }.get(regime, "")
    for _ in range(10_000):
        coef = {k: 0.0 if k in zeros else _nonzero(rng, floor, bound) for k in "abc"}
        if regime is Regime.GENERAL_CRITICAL:
            coef["c"] = coef["b"] ** 2 / (4.0 * coef["a"])
        if abs(coef["c"]) > bound:
            continue
        p = clamp_params(DeuParams(coef["a"], coef["b"], coef["c"],
                                   rng.uniform(-1, 1), rng.uniform(-1, 1)), cfg)
        if classify_regime(p, cfg) is regime:
            return p
    raise RuntimeError(f"could not sample {regime.name}")


def gradient_errors(p: DeuParams, t: float, h: float = 1e-5, cfg: StabilityConfig = DEFAULT_CONFIG,
                    floor: float = 1e-2, evaluator=evaluate_regime) -> dict[str, float]:
    """Relative error of each analytic partial against a central difference.

    Perturbations stay inside ``p``'s regime, and coefficients that are
    exactly zero are skipped: their training gradient comes from outward
    gravitation instead.  ``evaluator`` supplies the analytic side (a hook
    for testing the checker itself).  The error is ``|analytic - fd| / max(|analytic|,
    |fd|, floor, noise)`` where ``noise = 1e-7 |y|`` sits a few hundred times
    above the rounding error of a difference quotient with step ``h = 1e-5``.
    """
    regime = classify_regime(p, cfg)
    base = dict(t=t, a=p.a, b=p.b, c=p.c, c1=p.c1, c2=p.c2)
    ev = evaluator(regime, cfg=cfg, **base)
    noise = 1e-7 * abs(float(ev.y)) * (1e-5 / h)
    errs = {}
    for name in PARTIALS:
        if name in "abc" and base[name] == 0:
            continue

        def f(x, name=name):
            return float(evaluate_regime(regime, cfg=cfg, **{**base, name: x}).y)

        fd = finite_diff(f, base[name], h)
        an = float(getattr(ev, f"dy_d{name}"))
        errs[name] = abs(an - fd) / max(abs(an), abs(fd), floor, noise)
    return errs


def preactivation_margin(net: Network, x) -> np.ndarray:
    """Per row of ``x``, the smallest |pre-activation| over all hidden units.

    Rows with a small margin sit on an activation kink (or inside the
    smoothed step) where finite differences and analytic partials disagree.
    """
    _, caches = network_forward(net, x)
    hidden = [np.abs(c.z).min(axis=1) for c in caches[:-1]]
    return np.min(hidden, axis=0) if hidden else np.full(len(caches[0].z), np.inf)


def network_gradient_errors(net: Network, x, y, loss: str = "mse", h: float = 1e-5,
                            floor: float = 1e-5) -> dict[str, float]:
    """Worst relative error per parameter array of backprop against central differences.

    Every element of every weight, bias and DEU coefficient table is
    perturbed in turn.  Coefficients that are exactly zero are skipped (their
    gradient is borrowed from outward gravitation by design).  The step is
    divided by the largest of 1, |gradient| and (for DEU coefficients) the
    neuron's own sensitivity max |dy/dtheta| over the batch, so a stiff mode
    far from its origin does not carry the difference quotient out of the
    linear range.
    """
    out, caches = network_forward(net, x)
    _, grad = loss_eval(loss, out, y)
    analytic = network_backward(net, caches, grad)
    sens = {}
    for i, (layer, cache) in enumerate(zip(net.layers, caches)):
        if layer.is_deu:
            ev = cache.act.ev
            parts = (ev.dy_da, ev.dy_db, ev.dy_dc, ev.dy_dc1, ev.dy_dc2)
            sens[f"deu{i}"] = np.stack([np.abs(p).max(axis=0) for p in parts], axis=1)
    worst = {}
    for name, arr in net.params().items():
        errs = [0.0]
        for idx in np.ndindex(arr.shape):
            if name.startswith("deu") and idx[1] < 3 and arr[idx] == 0:
                continue
            orig = arr[idx]

            def f(v):
                arr[idx] = v
                return loss_eval(loss, network_forward(net, x)[0], y)[0]

            an = analytic[name][idx]
            scale = max(1.0, abs(an), sens[name][idx] if name in sens else 0.0)
            fd = finite_diff(f, orig, h / scale)
            arr[idx] = orig
            errs.append(abs(an - fd) / max(abs(an), abs(fd), floor))
        worst[name] = max(errs)
    return worst


@dataclass(frozen=True)
class FourierSpec:
    """Terms ``(omega, beta, gamma)`` of ``sum beta sin(omega t) + gamma cos(omega t)``."""

    terms: tuple = ()

    def __post_init__(self):
        terms = tuple(tuple(float(v) for v in term) for term in self.terms)
        for omega, _, _ in terms:
            if not omega > 0:
                raise ValueError(f"frequencies must be positive, got {omega}")
        object.__setattr__(self, "terms", terms)


def fourier_sum(spec: FourierSpec, t):
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros_like(t)
    for omega, beta, gamma in spec.terms:
        out += beta * np.sin(omega * t) + gamma * np.cos(omega * t)
    return out


def build_fourier_network(spec: FourierSpec, cfg: StabilityConfig = DEFAULT_CONFIG) -> Network:
    """One hidden DEU layer reproducing a finite Fourier sum exactly.

    Each term gets a pair of oscillating neurons (a = 1/omega^2, b = 0, c = 1)
    that share the particular solution; the first carries the sine/cosine
    coefficients as initial conditions and the output weights +1 / -1 cancel
    the shared part.  When 1/omega^2 would fall below ``eps`` the input weight
    carries the frequency instead (a = 1, weight = omega).
    """
    coeffs, w_in, w_out = [], [], []
    for omega, beta, gamma in spec.terms:
        a, w = 1.0 / omega**2, 1.0
        if a < cfg.eps:
            a, w = 1.0, omega
        coeffs += [[a, 0.0, 1.0, gamma, beta], [a, 0.0, 1.0, 0.0, 0.0]]
        w_in += [w, w]
        w_out += [1.0, -1.0]
    if not coeffs:
        # the empty sum: a single neuron with zero output weight
        coeffs, w_in, w_out = [[1.0, 0.0, 1.0, 0.0, 0.0]], [1.0], [0.0]
    hidden = DenseLayer(np.array(w_in)[:, None], np.zeros(len(w_in)),
                        DeuLayerState(np.array(coeffs), cfg, TStarMode.FIXED_ZERO))
    output = DenseLayer(np.array(w_out)[None, :], np.zeros(1), Fixed("identity"))
    return Network([hidden, output])


@dataclass
class GradcheckReport:
    trials: int
    residual_tol: float
    grad_tol: float
    worst_residual: dict  # regime name -> largest relative ODE residual
    worst_grad: dict  # regime name -> (largest relative error, partial name)
    counts: dict  # regime name -> trials run

    @property
    def ok(self) -> bool:
        return (all(v < self.residual_tol for v in self.worst_residual.values())
                and all(v < self.grad_tol for v, _ in self.worst_grad.values()))

    def lines(self) -> list[str]:
        out = []
        for name in self.counts:
            res = self.worst_residual[name]
            err, which = self.worst_grad[name]
            flag = "ok" if res < self.residual_tol and err < self.grad_tol else "FAIL"
            out.append(f"{name:20s} n={self.counts[name]:4d}  residual={res:.2e}  "
                       f"grad={err:.2e} (d/d{which})  {flag}")
        return out


def run_gradcheck(trials: int, seed: int = 0, cfg: StabilityConfig = DEFAULT_CONFIG,
                  residual_tol: float = 1e-4, grad_tol: float = 1e-3, evaluator=evaluate_regime,
                  t_max: float = 5.0, t_min: float = 0.1) -> GradcheckReport:
    """ODE-residual and finite-difference checks cycling through every regime.

    Sample points with ``t_min < |t| <= t_max`` where the exponent cap would
    bend the solution are redrawn.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rng = np.random.default_rng(seed)
    regimes = list(Regime)
    worst_res = {r.name: 0.0 for r in regimes}
    worst_grad = {r.name: (0.0, "-") for r in regimes}
    counts = {r.name: 0 for r in regimes}
    margin = cfg.exp_arg_cap - 5.0
    for i in range(trials):
        regime = regimes[i % len(regimes)]
        p = sample_params(rng, regime, cfg=cfg)
        t = rng.choice([-1.0, 1.0]) * rng.uniform(t_min, t_max)
        while max_exponent(p, abs(t) + 0.01) > margin:
            t = rng.choice([-1.0, 1.0]) * rng.uniform(t_min, t_max)
        counts[regime.name] += 1
        worst_res[regime.name] = max(worst_res[regime.name], relative_residual(p, t, cfg=cfg))
        errs = gradient_errors(p, t, cfg=cfg, evaluator=evaluator)
        name = max(errs, key=errs.get)
        if errs[name] >= worst_grad[regime.name][0]:
            worst_grad[regime.name] = (errs[name], name)
    return GradcheckReport(trials, residual_tol, grad_tol, worst_res, worst_grad, counts)
