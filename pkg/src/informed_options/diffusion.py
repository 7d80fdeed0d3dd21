"""Time-varying parameter curves: lattices, yields, and a Monte Carlo
pricer for the diffusion limit.

Curves are plain callables of calendar time. Lattice steps reuse the same
first-order factor construction as the constant-parameter trees, evaluated
at each step's left endpoint, so a constant curve set reduces exactly to
the constant-parameter tree. When the per-step spreads differ the tree
no longer recombines and is materialized in a binary layout; that grows as
2^n, so exact trees are capped and long-horizon work goes through
``feynman_kac_price``, which integrates the same limit dynamics by
simulation with a deterministic, thread-count-independent seeding scheme.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np

from .core_model import OptionSpec, payoff_eval
from .errors import DomainError, ParameterRegimeError
from .lattice import (
    Lattice,
    StepParams,
    _first_order_factors,
    build_lattice,
    first_order_q,
)

TV_EXACT_TREE_MAX_STEPS = 24
_CHUNK = 1 << 15

AS_PRINTED = "as_printed"
PDE_CONSISTENT = "pde_consistent"

Curve = Callable[[float], float]


@dataclass(frozen=True)
class ParamCurves:
    """Time-varying market description on [0, horizon]: drift, volatility,
    rate, upturn probability and information intensity psi, each a callable
    of calendar time in years."""

    mu: Curve
    sigma: Curve
    r: Curve
    p: Curve
    psi: Curve
    horizon: float

    def __post_init__(self) -> None:
        if self.horizon <= 0.0:
            raise DomainError(f"horizon must be positive, got {self.horizon}")

    @classmethod
    def constant(cls, mu: float, sigma: float, r: float, p: float,
                 psi: float = 0.0, horizon: float = 1.0) -> "ParamCurves":
        return cls(
            mu=lambda t: mu,
            sigma=lambda t: sigma,
            r=lambda t: r,
            p=lambda t: p,
            psi=lambda t: psi,
            horizon=horizon,
        )

    def validate(self, samples: int = 257) -> None:
        """Spot-check the curves at evenly spaced times: finite values,
        positive volatility, probability inside (0, 1)."""
        for t in np.linspace(0.0, self.horizon, samples):
            t = float(t)
            for name in ("mu", "sigma", "r", "p", "psi"):
                v = getattr(self, name)(t)
                if not math.isfinite(v):
                    raise DomainError(f"curve {name} is not finite at t={t}")
            if self.sigma(t) <= 0.0:
                raise DomainError(f"sigma curve must stay positive, fails at t={t}")
            if not 0.0 < self.p(t) < 1.0:
                raise DomainError(f"p curve leaves (0, 1) at t={t}")


def _theta_at(c: ParamCurves, t: float) -> float:
    return (c.mu(t) - c.r(t)) / c.sigma(t)


def tv_step(c: ParamCurves, k: int, dt: float) -> StepParams:
    """Step k of the time-varying tree, from curve values at t = k dt.

    Same first-order factors and weight as the constant-parameter tree, so
    constant curves reproduce it exactly.
    """
    t = k * dt
    mu, sigma, p = c.mu(t), c.sigma(t), c.p(t)
    if not 0.0 < p < 1.0:
        raise DomainError(f"p curve value {p} outside (0, 1) at step {k}")
    up, down = _first_order_factors(mu, sigma, p, dt)
    q = first_order_q(mu, sigma, c.r(t), p, dt)
    if not 0.0 < q < 1.0:
        raise ParameterRegimeError(
            f"risk-neutral weight {q} outside (0, 1) at step {k} (t={t})"
        )
    return StepParams(up=up, down=down, p=p, q=q)


def tv_risk_neutral_q(c: ParamCurves, k: int, dt: float) -> float:
    """p_t - theta_t sqrt(p_t (1-p_t) dt) at t = k dt, validated in (0, 1)."""
    return tv_step(c, k, dt).q


def tv_lattice(spot: float, c: ParamCurves, n: int) -> Lattice:
    """Tree over [0, horizon] with n steps of the time-varying dynamics.

    If every step has the same up-down spread the tree recombines and costs
    O(n^2) nodes. Otherwise each level doubles; that exact layout is capped
    at TV_EXACT_TREE_MAX_STEPS steps, beyond which use feynman_kac_price.
    """
    if n < 1:
        raise DomainError(f"need at least one step, got n={n}")
    c.validate()
    dt = c.horizon / n
    steps = tuple(tv_step(c, k, dt) for k in range(n))
    spread0 = steps[0].spread
    if all(abs(s.spread - spread0) <= 1e-12 for s in steps):
        return build_lattice(spot, steps, n, mode="tv", dt=dt)
    if n > TV_EXACT_TREE_MAX_STEPS:
        raise DomainError(
            f"non-recombining tree with n={n} steps would hold 2^{n} nodes; "
            f"cap is {TV_EXACT_TREE_MAX_STEPS}, use feynman_kac_price instead"
        )
    if spot <= 0.0:
        raise DomainError(f"spot must be positive, got {spot}")
    levels = [np.array([spot])]
    for k in range(n):
        prev = levels[-1]
        nxt = np.empty(2 * prev.size)
        nxt[0::2] = prev * math.exp(steps[k].down)
        nxt[1::2] = prev * math.exp(steps[k].up)
        levels.append(nxt)
    return Lattice(
        n_steps=n,
        node_prices=tuple(levels),
        steps=steps,
        mode="tv",
        recombining=False,
        dt=dt,
    )


def tv_yield(c: ParamCurves, t: float, formula: str = AS_PRINTED) -> float:
    """Instantaneous information rent at time t.

    as_printed: sign(psi) (1 - theta / sqrt(theta^2 + 4 p (1-p) psi^2)),
    a dimensionless fraction. pde_consistent: sigma_t (sqrt(theta^2 +
    4 p (1-p) psi^2) - theta), the rate that actually enters the valuation
    operator. Requires theta_t > 0.
    """
    theta = _theta_at(c, t)
    if theta <= 0.0:
        raise ParameterRegimeError(
            f"information rent requires mu > r along the curve; theta={theta} at t={t}"
        )
    p, psi = c.p(t), c.psi(t)
    root = math.sqrt(theta * theta + 4.0 * p * (1.0 - p) * psi * psi)
    sign = (psi > 0.0) - (psi < 0.0)
    if formula == AS_PRINTED:
        return sign * (1.0 - theta / root)
    if formula == PDE_CONSISTENT:
        return c.sigma(t) * (root - theta)
    raise DomainError(f"formula must be '{AS_PRINTED}' or '{PDE_CONSISTENT}'")


def tv_optimal_n(c: ParamCurves, t: float) -> float:
    """Optimal forward count 2 (psi_t / theta_t) sqrt(p_t (1 - p_t))."""
    theta = _theta_at(c, t)
    if theta <= 0.0:
        raise ParameterRegimeError(f"optimal count requires mu > r; theta={theta}")
    p = c.p(t)
    return 2.0 * (c.psi(t) / theta) * math.sqrt(p * (1.0 - p))


def tv_optimal_theta(c: ParamCurves, t: float) -> float:
    """Market price of risk at the optimal overlay,
    sqrt(theta^2 + 4 p (1-p) psi^2)."""
    theta = _theta_at(c, t)
    p, psi = c.p(t), c.psi(t)
    return math.sqrt(theta * theta + 4.0 * p * (1.0 - p) * psi * psi)


def tv_forward_moments(c: ParamCurves, n_fwd: Curve, k: int,
                       dt: float) -> Tuple[float, float]:
    """One-step mean and variance of the forward strategy excess return at
    step k when the trader holds n_fwd(t) forwards:
    mean = 2 n psi sigma sqrt(p (1-p)) dt, var = n^2 sigma^2 dt."""
    t = k * dt
    n_t = n_fwd(t)
    p, psi, sigma = c.p(t), c.psi(t), c.sigma(t)
    mean = 2.0 * n_t * psi * sigma * math.sqrt(p * (1.0 - p)) * dt
    var = n_t * n_t * sigma * sigma * dt
    return mean, var


def _worker_count(explicit: Optional[int] = None) -> int:
    if explicit is not None:
        if explicit < 1:
            raise DomainError(f"worker count must be >= 1, got {explicit}")
        return explicit
    env = os.environ.get("INFORMED_OPTIONS_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise DomainError(
                f"INFORMED_OPTIONS_THREADS must be an integer, got {env!r}"
            ) from exc
        if n < 1:
            raise DomainError(f"INFORMED_OPTIONS_THREADS must be >= 1, got {n}")
        return n
    return min(os.cpu_count() or 1, 8)


def feynman_kac_price(c: ParamCurves, d_y: Union[float, Curve], opt: OptionSpec,
                      spot: float, paths: int, steps: int, seed: int,
                      workers: Optional[int] = None) -> Tuple[float, float]:
    """Monte Carlo price of a European option under the diffusion limit of
    the time-varying tree, with risk-neutral log dynamics
        d ln S = (r_t - d_y(t) - sigma_t^2 / 2) dt + sigma_t dW.

    Returns (price, standard_error). The estimate is bit-for-bit
    reproducible for a given seed regardless of worker count: paths are cut
    into fixed chunks of 32768, each chunk draws from its own generator
    keyed by (seed, chunk index), and partial sums are combined in chunk
    order. Worker count comes from the argument, then the
    INFORMED_OPTIONS_THREADS environment variable, then the CPU count.
    """
    if paths < 1000:
        raise DomainError(f"need at least 1000 paths, got {paths}")
    if steps < 1:
        raise DomainError(f"need at least one time step, got {steps}")
    if spot <= 0.0:
        raise DomainError(f"spot must be positive, got {spot}")
    if c.horizon + 1e-9 < opt.maturity:
        raise DomainError(
            f"curves end at {c.horizon} but the option matures at {opt.maturity}"
        )
    c.validate()
    yield_fn: Curve = d_y if callable(d_y) else (lambda t: d_y)
    h = opt.maturity / steps
    t_left = np.arange(steps) * h
    sig = np.array([c.sigma(float(t)) for t in t_left])
    rate = np.array([c.r(float(t)) for t in t_left])
    rent = np.array([float(yield_fn(float(t))) for t in t_left])
    if not np.all(np.isfinite(rent)):
        raise DomainError("yield curve is not finite on the step grid")
    vol = sig * math.sqrt(h)
    drift_total = float(np.sum((rate - rent - 0.5 * sig * sig) * h))
    disc = math.exp(-float(np.sum(rate * h)))
    log_spot = math.log(spot)

    is_call = opt.kind == "call"
    is_put = opt.kind == "put"

    def chunk_sums(idx: int) -> Tuple[float, float]:
        lo = idx * _CHUNK
        size = min(_CHUNK, paths - lo)
        rng = np.random.default_rng([seed, idx])
        z = rng.standard_normal((size, steps))
        terminal = np.exp(log_spot + drift_total + z @ vol)
        if is_call:
            pay = np.maximum(terminal - opt.strike, 0.0)
        elif is_put:
            pay = np.maximum(opt.strike - terminal, 0.0)
        else:
            pay = np.array([payoff_eval(opt, float(s)) for s in terminal])
        return float(np.sum(pay)), float(np.sum(pay * pay))

    n_chunks = (paths + _CHUNK - 1) // _CHUNK
    n_workers = _worker_count(workers)
    if n_workers == 1 or n_chunks == 1:
        partials = [chunk_sums(i) for i in range(n_chunks)]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            partials = list(pool.map(chunk_sums, range(n_chunks)))
    total = 0.0
    total_sq = 0.0
    for s1, s2 in partials:
        total += s1
        total_sq += s2
    mean = total / paths
    var = max(total_sq / paths - mean * mean, 0.0) * paths / max(paths - 1, 1)
    std_error = disc * math.sqrt(var / paths)
    return disc * mean, std_error
