"""Pricing when information arrives through the step probability itself.

Here the informed view shifts the per-step upturn probability to
p = p0 + delta sqrt(dt) instead of overlaying forwards, and a second
intensity rho tilts the guesser's conditional accuracy. Both effects decay
like sqrt(dt), so they survive in the diffusion limit as a deviation
premium (from delta) and an inflated drift/volatility pair (from rho).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core_model import MarketParams, OptionSpec, market_price_of_risk
from .errors import DomainError, ParameterRegimeError
from .lattice import (
    Lattice,
    StepParams,
    _first_order_factors,
    build_lattice,
    lattice_price,
)

ROOTED = "rooted"
PLAIN = "plain"


@dataclass(frozen=True)
class MeanInfoSpec:
    """delta_info shifts the step probability by delta sqrt(dt); rho_info
    is the accuracy intensity of the directional guess, rho >= 0."""

    delta_info: float
    rho_info: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.delta_info) or not math.isfinite(self.rho_info):
            raise DomainError("delta_info and rho_info must be finite")
        if self.rho_info < 0.0:
            raise DomainError(f"rho_info must be non-negative, got {self.rho_info}")


def step_probability(m: MarketParams, delta: float) -> float:
    """Shifted upturn probability p0 + delta sqrt(dt), validated in (0, 1)."""
    p = m.p0 + delta * math.sqrt(m.dt)
    if not 0.0 < p < 1.0:
        raise ParameterRegimeError(
            f"shifted probability {p} outside (0, 1) for p0={m.p0}, "
            f"delta={delta}, dt={m.dt}"
        )
    return p


def guess_probability(m: MarketParams, spec: MeanInfoSpec) -> float:
    """Directional accuracy 1/2 (1 + rho / sqrt(p (1-p)) sqrt(dt)) at the
    shifted step probability, validated in (0, 1)."""
    p = step_probability(m, spec.delta_info)
    g = 0.5 * (1.0 + spec.rho_info / math.sqrt(p * (1.0 - p)) * math.sqrt(m.dt))
    if not 0.0 < g < 1.0:
        raise ParameterRegimeError(f"guess probability {g} outside (0, 1)")
    return g


def dev_from_delta(m: MarketParams, delta: float, denominator: str = ROOTED) -> float:
    """Annualized deviation premium carried by the probability shift.

    The default normalizes by sqrt(p0 (1-p0)), which makes the premium the
    drift correction appearing in the diffusion limit. denominator="plain"
    divides by p0 (1-p0) instead, an alternative normalization kept for
    comparison; the two agree at p0 = 1/2 up to the factor 2.
    """
    if denominator == ROOTED:
        return m.sigma * delta / math.sqrt(m.p0 * (1.0 - m.p0))
    if denominator == PLAIN:
        return m.sigma * delta / (m.p0 * (1.0 - m.p0))
    raise DomainError(f"denominator must be '{ROOTED}' or '{PLAIN}', got {denominator!r}")


def info_drift(m: MarketParams, rho: float) -> float:
    """Drift of the accuracy-enhanced process, mu + 4 sigma^2 rho^2 / (mu - r).
    Requires mu > r."""
    if m.mu <= m.r:
        raise ParameterRegimeError(
            f"accuracy enhancement requires mu > r, got mu={m.mu}, r={m.r}"
        )
    return m.mu + 4.0 * m.sigma ** 2 * rho ** 2 / (m.mu - m.r)


def info_vol(m: MarketParams, rho: float) -> float:
    """Volatility of the accuracy-enhanced process,
    sigma sqrt(1 + 4 sigma^2 rho^2 / (mu - r)^2). Requires mu > r."""
    if m.mu <= m.r:
        raise ParameterRegimeError(
            f"accuracy enhancement requires mu > r, got mu={m.mu}, r={m.r}"
        )
    theta = market_price_of_risk(m)
    return m.sigma * math.sqrt(1.0 + 4.0 * rho ** 2 / theta ** 2)


def mean_info_q(m: MarketParams, spec: MeanInfoSpec) -> float:
    """Risk-neutral upturn weight at the shifted probability with the
    accuracy-enhanced market price of risk sqrt(theta^2 + 4 rho^2):
    q = p_dt - theta_enh sqrt(p_dt (1-p_dt) dt)."""
    p = step_probability(m, spec.delta_info)
    theta = market_price_of_risk(m)
    theta_enh = math.sqrt(theta * theta + 4.0 * spec.rho_info ** 2)
    q = p - theta_enh * math.sqrt(p * (1.0 - p) * m.dt)
    if not 0.0 < q < 1.0:
        raise ParameterRegimeError(
            f"risk-neutral weight {q} outside (0, 1) at p={p}, "
            f"theta_enh={theta_enh}, dt={m.dt}"
        )
    return q


def mean_info_step(m: MarketParams, spec: MeanInfoSpec) -> StepParams:
    """One lattice step of the mean-information model: first-order factors
    built from the enhanced drift and volatility at the shifted probability,
    weighted by mean_info_q."""
    p = step_probability(m, spec.delta_info)
    v = info_drift(m, spec.rho_info)
    s = info_vol(m, spec.rho_info)
    up, down = _first_order_factors(v, s, p, m.dt)
    q = mean_info_q(m, spec)
    return StepParams(up=up, down=down, p=p, q=q)


def mean_info_lattice(m: MarketParams, spec: MeanInfoSpec, spot: float,
                      n: int) -> Lattice:
    return build_lattice(spot, mean_info_step(m, spec), n,
                         mode="mean_info", dt=m.dt)


def mean_info_price(m: MarketParams, spec: MeanInfoSpec, opt: OptionSpec,
                    spot: float, n: int, strike_smoothing: bool = False) -> float:
    """Tree price of a European option under the mean-information model.

    n steps of length m.dt must span the option maturity to within 1e-9.
    As delta -> 0 and rho -> 0 the price converges to the plain lognormal
    model at (r, sigma); for rho > 0 the limit volatility is info_vol, with
    discounting still at r and no yield leg.
    """
    if abs(n * m.dt - opt.maturity) > 1e-9:
        raise DomainError(
            f"n * dt = {n * m.dt} does not match maturity {opt.maturity}; "
            "set dt = maturity / n"
        )
    step = mean_info_step(m, spec)
    return lattice_price(step, spot, opt, n, m.r, m.dt,
                         strike_smoothing=strike_smoothing)


def _price_call_grid(m: MarketParams, rho: float, deltas: np.ndarray,
                     spot: float, strike: float, maturity: float, n: int,
                     strike_smoothing: bool = True) -> np.ndarray:
    """Call prices for a whole grid of delta values at one (rho, quote),
    vectorized across the grid. Used by the calibration two-stage fit where
    the same tree is rebuilt for hundreds of deltas.

    The step length is maturity / n, so any quoted expiry is admissible.
    """
    dt = maturity / n
    sq = math.sqrt(dt)
    deltas = np.asarray(deltas, dtype=float)
    p = m.p0 + deltas * sq
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise ParameterRegimeError("a grid delta pushes the probability out of (0, 1)")
    v = info_drift(m, rho)
    s = info_vol(m, rho)
    up_g = 1.0 + v * dt + s * np.sqrt((1.0 - p) / p * dt)
    dn_g = 1.0 + v * dt - s * np.sqrt(p / (1.0 - p) * dt)
    if np.any(dn_g <= 0.0):
        raise ParameterRegimeError("a grid delta drives the down factor negative")
    up, down = np.log(up_g), np.log(dn_g)
    theta = market_price_of_risk(m)
    theta_enh = math.sqrt(theta * theta + 4.0 * rho * rho)
    q = p - theta_enh * np.sqrt(p * (1.0 - p) * dt)
    if np.any(q <= 0.0) or np.any(q >= 1.0):
        raise ParameterRegimeError("a grid delta pushes q out of (0, 1)")
    spread = up - down
    j = np.arange(n + 1)[:, None]
    log_nodes = math.log(spot) + n * down[None, :] + spread[None, :] * j
    values = np.maximum(np.exp(log_nodes) - strike, 0.0)
    if strike_smoothing:
        y_k = math.log(strike)
        centered = log_nodes + 0.5 * spread[None, :]
        idx = np.sum(centered < y_k, axis=0)
        cols = np.arange(deltas.size)
        ok = idx <= n
        i_ok = np.where(ok, idx, 0)
        y = log_nodes[i_ok, cols]
        a, b = y - 0.5 * spread, y + 0.5 * spread
        inside = ok & (a <= y_k) & (y_k < b)
        avg = ((np.exp(b) - strike) - strike * (b - y_k)) / spread
        values[i_ok[inside], cols[inside]] = avg[inside]
    disc = math.exp(-m.r * dt)
    for _ in range(n):
        values = disc * (q[None, :] * values[1:, :] + (1.0 - q)[None, :] * values[:-1, :])
    return values[0]
