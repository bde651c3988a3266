import pytest
from hypothesis import settings
from hypothesis import strategies as st

from prioinv import ModelParams

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

rates = st.floats(0.1, 10.0, allow_nan=False, allow_infinity=False)
probs = st.one_of(st.just(0.0), st.just(1.0), st.floats(0.0, 1.0))


@st.composite
def model_params(draw, max_b=6):
    b = draw(st.integers(2, max_b))
    s = draw(st.integers(1, b - 1))
    return ModelParams(draw(rates), draw(rates), draw(rates), draw(rates), draw(probs), s, b)


@st.composite
def stable_params(draw, max_b=6):
    mu = draw(st.floats(0.5, 10.0))
    share = draw(st.floats(0.01, 0.98))
    load = draw(st.floats(0.05, 0.98))
    lam1 = max(share * load * mu, 1e-3)
    lam2 = max((1 - share) * load * mu, 1e-3)
    b = draw(st.integers(2, max_b))
    s = draw(st.integers(1, b - 1))
    return ModelParams(lam1, lam2, mu, draw(rates), draw(probs), s, b)


@pytest.fixture
def base():
    """The reference parameter set used throughout the examples."""
    return ModelParams(lambda1=1, lambda2=2, mu=3, nu=4, p=0.5, s=1, b=2)


@pytest.fixture
def regime():
    """A stable set with lambda1/mu = 0.25 and p = 1."""
    return ModelParams(lambda1=1, lambda2=1, mu=4, nu=2, p=1.0, s=1, b=2)


# --- acceptance summary ----------------------------------------------------

_ACCEPTANCE = []


@pytest.fixture
def acceptance():
    def record(name, ok, detail=""):
        _ACCEPTANCE.append((name, bool(ok), detail))
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
