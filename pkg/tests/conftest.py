import pytest

from voltarget import MarketParams, OptionSpec, PortfolioState, StrategyConfig

# market and strategy used throughout the Greek examples
FIG_MARKET = MarketParams(r=0.05, t0=0.0, T=1.0)
FIG_STRATEGY = StrategyConfig(sigma_hat=0.2, leverage_cap=2.0)

# calibrated Heston parameters and a lower long-run variance variant
HESTON_BASE = dict(kappa=0.6067, theta=0.2207, xi=0.2928, rho=-0.75, nu0=0.2154, mu=0.0824, s0=100.0)
HESTON_LOW_THETA = dict(HESTON_BASE, theta=0.1707, nu0=0.1654)


@pytest.fixture
def market():
    return FIG_MARKET


@pytest.fixture
def strategy():
    return FIG_STRATEGY


@pytest.fixture
def state():
    return PortfolioState(v=12.0, s=10.0, b=1.0)


@pytest.fixture
def call():
    return OptionSpec(10.0, "call")


@pytest.fixture
def put():
    return OptionSpec(10.0, "put")


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
