import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from multibinom import MarketParams
from multibinom.supermodular import SetFunction

settings.register_profile(
    "default", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

SPREAD_ARRAYS = ([100.0, 90.0], [1.2, 1.15], [0.8, 0.9])

# lines appended by tests/test_acceptance.py, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def spread_market(n: int = 2, R: float = 1.02) -> MarketParams:
    return MarketParams.from_arrays(*SPREAD_ARRAYS, R, n)


def market_from_b(b, n: int = 1, spread=None, rng=None, prices=None) -> MarketParams:
    """A market with R = 1 whose risk-neutral weights are exactly ``b`` (up to rounding)."""
    b = np.asarray(b, dtype=float)
    m = b.size
    if spread is None:
        spread = np.full(m, 0.3) if rng is None else rng.uniform(0.05, 0.5, m)
    down = 1.0 - b * spread
    up = down + spread
    S0 = np.full(m, 100.0) if prices is None else prices
    return MarketParams.from_arrays(S0, up, down, 1.0, n)


def random_market(rng, m: int, n: int, small_b: bool = False) -> MarketParams:
    """Random admissible market; ``small_b`` forces sum(b) <= 1."""
    R = rng.uniform(1.0, 1.05)
    if small_b:
        b = rng.dirichlet(np.ones(m + 1))[:m] * rng.uniform(0.5, 1.0)
    else:
        b = rng.uniform(0.05, 0.95, m)
    width = rng.uniform(0.1, 0.5, m)
    down = R - b * width
    up = down + width
    S0 = rng.uniform(50, 150, m)
    return MarketParams.from_arrays(S0, up, down, R, n)


@st.composite
def markets(draw, m_max: int = 3, n_max: int = 3, m_min: int = 1, n_min: int = 1):
    m = draw(st.integers(m_min, m_max))
    n = draw(st.integers(n_min, n_max))
    R = draw(st.floats(1.0, 1.1))
    gaps = st.floats(0.01, 0.5)
    down = [R - draw(gaps) for _ in range(m)]
    up = [R + draw(gaps) for _ in range(m)]
    S0 = [draw(st.floats(10, 200)) for _ in range(m)]
    return MarketParams.from_arrays(S0, up, down, R, n)


@pytest.fixture
def spread2():
    return spread_market()


def random_supermodular(rng, m: int) -> SetFunction:
    """Nonnegative combination of coordinate products plus a modular part."""
    masks = np.arange(1 << m)
    members = (masks[:, None] >> np.arange(m)) & 1
    values = members @ rng.normal(size=m)
    for _ in range(rng.integers(1, 5)):
        A = rng.choice(m, size=rng.integers(1, m + 1), replace=False)
        values = values + rng.exponential() * members[:, A].prod(axis=1)
    return SetFunction(values)
