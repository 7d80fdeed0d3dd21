import math

import pytest

from informed_options import MarketParams

SQ252 = math.sqrt(252.0)


@pytest.fixture
def daily_market():
    """Annualized daily-estimate regime used across calibration tests:
    per-day mean 1.8e-4 and deviation 0.02 scaled to year units."""
    return MarketParams(
        mu=1.8e-4 * 252.0,
        sigma=0.02 * SQ252,
        r=0.0064,
        p0=0.56,
        dt=1.0 / 252.0,
    )
