import math

import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

from nctorus.angles import GOLDEN_THETA
from nctorus.circle import TrigPoly, WindingMap

settings.register_profile("default", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("default")

GOLDEN = GOLDEN_THETA
ALPHAS = [0.0, 1.0 / 3.0, (math.sqrt(5.0) - 1.0) / 2.0]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_trig(rng, degree=4, scale=1.0) -> TrigPoly:
    ks = np.arange(-degree, degree + 1)
    vals = (rng.normal(size=ks.size) + 1j * rng.normal(size=ks.size)) * scale
    return TrigPoly.from_arrays(ks, vals)


def random_real_trig(rng, degree=3, scale=0.4) -> TrigPoly:
    c = {}
    for k in range(1, degree + 1):
        v = complex(rng.normal(), rng.normal()) * scale / k
        c[k] = v
        c[-k] = v.conjugate()
    c[0] = rng.normal()
    return TrigPoly(c)


def random_map(rng, winding=None, degree=3, scale=0.4) -> WindingMap:
    w = int(rng.integers(-2, 3)) if winding is None else winding
    return WindingMap(w, random_real_trig(rng, degree, scale))


seeds = st.integers(min_value=0, max_value=2**31 - 1)
angles = st.floats(min_value=-20.0, max_value=20.0, allow_nan=False)


# acceptance lines are echoed at the end of the run so they survive output capture
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
