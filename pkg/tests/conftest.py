from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings, strategies as st

from rilt import series as S

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

small_fracs = st.fractions(min_value=-5, max_value=5, max_denominator=7)


@st.composite
def rational_series(draw, cap=8, max_power=None, logs=True, lattice=(1, 2, 3)):
    """Random series on the rational backend with powers up to ``max_power``."""
    top = cap if max_power is None else max_power
    q = draw(st.sampled_from(lattice))
    n = draw(st.integers(0, 5))
    terms = {}
    for _ in range(n):
        p = Fraction(draw(st.integers(0, int(top * q))), q)
        m = draw(st.integers(0, 2)) if logs else 0
        c = draw(small_fracs)
        terms[(p, m)] = c
    return S.Series(terms, cap)


@pytest.fixture
def float_backend():
    from rilt.scalars import make_backend
    return make_backend("float", 50)
