"""Closed-form lognormal pricing with an information-rent dividend yield.

Two drift conventions are exposed for d1 because they disagree once the
yield is nonzero and both are in circulation:

* ``"as_printed"`` keeps d1 = [ln(S/K) + (r + sigma^2/2) tau] / (sigma
  sqrt(tau)) while still discounting the stock leg by exp(-d_y tau). This is
  the headline form and the package default.
* ``"pde_consistent"`` uses (r - d_y + sigma^2/2) in d1, which is the unique
  choice solving the yield-corrected valuation PDE and matching put-call
  parity with a continuously paid yield.

With d_y = 0 the two coincide with the plain lognormal model.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence, Tuple

from .errors import DomainError

AS_PRINTED = "as_printed"
PDE_CONSISTENT = "pde_consistent"
_FORMULAS = (AS_PRINTED, PDE_CONSISTENT)

SQRT2 = math.sqrt(2.0)


def norm_cdf(x: float) -> float:
    """Standard normal CDF via the complementary error function."""
    return 0.5 * math.erfc(-x / SQRT2)


@dataclass(frozen=True)
class BsmInputs:
    """Inputs to the closed-form model. tau is time to expiry in years;
    d_y is the continuously compounded information-rent yield."""

    spot: float
    strike: float
    tau: float
    r: float
    sigma: float
    d_y: float = 0.0

    def __post_init__(self) -> None:
        if self.spot <= 0.0:
            raise DomainError(f"spot must be positive, got {self.spot}")
        if self.strike <= 0.0:
            raise DomainError(f"strike must be positive, got {self.strike}")
        if self.tau <= 0.0:
            raise DomainError(f"tau must be positive, got {self.tau}")
        if self.sigma <= 0.0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")
        for name in ("spot", "strike", "tau", "r", "sigma", "d_y"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")


def _d1_d2(inp: BsmInputs, formula: str) -> Tuple[float, float]:
    if formula not in _FORMULAS:
        raise DomainError(f"formula must be one of {_FORMULAS}, got {formula!r}")
    drift = inp.r + 0.5 * inp.sigma ** 2
    if formula == PDE_CONSISTENT:
        drift -= inp.d_y
    s = inp.sigma * math.sqrt(inp.tau)
    d1 = (math.log(inp.spot / inp.strike) + drift * inp.tau) / s
    return d1, d1 - s


def bsm_call(inp: BsmInputs, formula: str = AS_PRINTED) -> float:
    """Yield-corrected call price
    exp(-d_y tau) N(d1) S - N(d2) K exp(-r tau)."""
    d1, d2 = _d1_d2(inp, formula)
    return (
        math.exp(-inp.d_y * inp.tau) * norm_cdf(d1) * inp.spot
        - norm_cdf(d2) * inp.strike * math.exp(-inp.r * inp.tau)
    )


def bsm_put(inp: BsmInputs, formula: str = AS_PRINTED) -> float:
    """Put price from the call by parity with a continuously paid yield:
    P = C - exp(-d_y tau) S + exp(-r tau) K."""
    call = bsm_call(inp, formula)
    return (
        call
        - math.exp(-inp.d_y * inp.tau) * inp.spot
        + math.exp(-inp.r * inp.tau) * inp.strike
    )


def pde_residual(f: Callable[[float, float], float], m, d_y: float,
                 x_grid: Sequence[float], t_grid: Sequence[float],
                 maturity: float, h: float = 1e-2, k: float = 1e-4) -> float:
    """Max absolute residual of the yield-corrected valuation operator
        f_t + (r - d_y) x f_x + sigma^2 x^2 f_xx / 2 - r f
    over a grid of (x, t) points, by central differences with absolute
    price step h and time step k.

    f must be smooth on the sampled stencil. Points within k of the payoff
    kink at t = maturity raise DomainError: the payoff is not differentiable
    there and the residual would be meaningless.
    """
    if h <= 0.0 or k <= 0.0:
        raise DomainError("difference steps must be positive")
    r, sigma = m.r, m.sigma
    worst = 0.0
    for t in t_grid:
        if t + k >= maturity:
            raise DomainError(
                f"t={t} with time step {k} touches the payoff kink at "
                f"maturity {maturity}"
            )
        for x in x_grid:
            if x - h <= 0.0:
                raise DomainError(f"x={x} with price step {h} leaves x > 0")
            f0 = f(x, t)
            f_t = (f(x, t + k) - f(x, t - k)) / (2.0 * k)
            f_x = (f(x + h, t) - f(x - h, t)) / (2.0 * h)
            f_xx = (f(x + h, t) - 2.0 * f0 + f(x - h, t)) / (h * h)
            res = (
                f_t
                + (r - d_y) * x * f_x
                + 0.5 * sigma ** 2 * x ** 2 * f_xx
                - r * f0
            )
            worst = max(worst, abs(res))
    return worst


def bsm_value_fn(inp: BsmInputs, maturity: float,
                 formula: str = AS_PRINTED) -> Callable[[float, float], float]:
    """The call as a function of (spot, calendar time) for a fixed maturity,
    suitable for pde_residual. tau = maturity - t; inp.tau is ignored."""
    def value(x: float, t: float) -> float:
        return bsm_call(replace(inp, spot=x, tau=maturity - t), formula)

    return value
