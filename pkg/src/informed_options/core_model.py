"""Market and contract types shared by every pricer in the package.

Conventions
-----------
Rates (``mu``, ``r``) are continuously quoted per year, volatility is
annualized, maturities are in year fractions, and ``dt`` is the lattice step
in years. ``p0`` is the natural (real-world) probability of an upturn over
one step; pricers keep it alongside the risk-neutral weight instead of
discarding it, which is what lets the calibration routines read information
out of quoted prices.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from .errors import DomainError

TRADING_DT = 1.0 / 252.0

_PAYOFF_KINDS = ("call", "put", "custom")


def _require_finite(name: str, value: float) -> float:
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value!r}")
    return float(value)


@dataclass(frozen=True)
class MarketParams:
    """Natural-world description of the underlying market.

    Parameters
    ----------
    mu : float
        Annualized drift of the underlying.
    sigma : float
        Annualized volatility, strictly positive.
    r : float
        Annualized riskless rate.
    p0 : float
        Natural per-step upturn probability, in (0, 1).
    dt : float
        Step length in years, strictly positive. Defaults to one trading
        day out of 252.
    """

    mu: float
    sigma: float
    r: float
    p0: float = 0.5
    dt: float = TRADING_DT

    def __post_init__(self) -> None:
        for name in ("mu", "sigma", "r", "p0", "dt"):
            _require_finite(name, getattr(self, name))
        if self.sigma <= 0.0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")
        if not 0.0 < self.p0 < 1.0:
            raise DomainError(f"p0 must lie in (0, 1), got {self.p0}")
        if self.dt <= 0.0:
            raise DomainError(f"dt must be positive, got {self.dt}")


def market_price_of_risk(m: MarketParams) -> float:
    """Excess drift per unit volatility, (mu - r) / sigma."""
    return (m.mu - m.r) / m.sigma


@dataclass(frozen=True)
class OptionSpec:
    """European contract: strike, maturity and a terminal payoff.

    ``kind`` is one of ``"call"``, ``"put"`` or ``"custom"``. A custom payoff
    supplies ``payoff_fn`` mapping the terminal price to a cash amount; the
    strike is still recorded for moneyness bookkeeping.
    """

    strike: float
    maturity: float
    kind: str = "call"
    payoff_fn: Optional[Callable[[float], float]] = None

    def __post_init__(self) -> None:
        _require_finite("strike", self.strike)
        _require_finite("maturity", self.maturity)
        if self.strike <= 0.0:
            raise DomainError(f"strike must be positive, got {self.strike}")
        if self.maturity <= 0.0:
            raise DomainError(f"maturity must be positive, got {self.maturity}")
        if self.kind not in _PAYOFF_KINDS:
            raise DomainError(f"kind must be one of {_PAYOFF_KINDS}, got {self.kind!r}")
        if self.kind == "custom" and self.payoff_fn is None:
            raise DomainError("custom payoff requires payoff_fn")
        if self.kind != "custom" and self.payoff_fn is not None:
            raise DomainError("payoff_fn is only allowed with kind='custom'")

    @classmethod
    def call(cls, strike: float, maturity: float) -> "OptionSpec":
        return cls(strike=strike, maturity=maturity, kind="call")

    @classmethod
    def put(cls, strike: float, maturity: float) -> "OptionSpec":
        return cls(strike=strike, maturity=maturity, kind="put")


def payoff_eval(spec: OptionSpec, terminal_price: float) -> float:
    """Evaluate the terminal payoff at one price.

    Custom payoffs are checked: a non-finite or negative value raises
    DomainError rather than propagating silently into a tree.
    """
    if spec.kind == "call":
        return max(terminal_price - spec.strike, 0.0)
    if spec.kind == "put":
        return max(spec.strike - terminal_price, 0.0)
    value = spec.payoff_fn(terminal_price)
    value = float(value)
    if not math.isfinite(value) or value < 0.0:
        raise DomainError(
            f"custom payoff returned {value!r} at price {terminal_price}; "
            "payoffs must be finite and non-negative"
        )
    return value


@dataclass(frozen=True)
class SurfaceRow:
    """One calibrated point: moneyness (strike / spot), maturity in years,
    the fitted value, and the squared relative pricing residual left at the
    solution. ``value`` and ``residual`` are None for failed fits."""

    moneyness: float
    maturity: float
    value: Optional[float]
    residual: Optional[float]
    status: str = "ok"

    def __post_init__(self) -> None:
        if self.status not in ("ok", "boundary", "failed"):
            raise DomainError(f"unknown row status {self.status!r}")
        if self.residual is not None and self.residual < 0.0:
            raise DomainError("residual must be non-negative")
        if self.status == "failed" and self.value is not None:
            raise DomainError("failed rows carry no value")


@dataclass(frozen=True)
class Surface:
    """Rows keyed by (moneyness, maturity); each pair appears at most once."""

    rows: tuple

    def __post_init__(self) -> None:
        object.__setattr__(self, "rows", tuple(self.rows))
        seen = set()
        for row in self.rows:
            key = (row.moneyness, row.maturity)
            if key in seen:
                raise DomainError(f"duplicate surface key {key}")
            seen.add(key)

    def sorted_rows(self) -> tuple:
        """Rows ordered by maturity, then moneyness."""
        return tuple(sorted(self.rows, key=lambda r: (r.maturity, r.moneyness)))


def as_step_sequence(steps, n: int) -> tuple:
    """Normalize a single per-step parameter set, or a sequence of them, to a
    tuple of length n."""
    if isinstance(steps, Sequence) and not hasattr(steps, "up"):
        out = tuple(steps)
        if len(out) != n:
            raise DomainError(f"expected {n} step parameter sets, got {len(out)}")
        return out
    return (steps,) * n
