import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import q_series
from teamjam.channel import MODULATION_SIZES
from teamjam.errors import DomainError, SingularityError
from teamjam.modulation import MqamScheme, q_function


def test_q_against_series():
    for x in np.linspace(0.0, 6.0, 20):
        assert abs(q_function(x) - q_series(x)) < 1e-12


def test_constants():
    s = MqamScheme(16)
    assert s.zeta == 3.0 and s.beta == pytest.approx(0.2) and s.bits == 4.0


def test_ber_examples():
    assert MqamScheme(4).ber(0.0) == pytest.approx(0.5, abs=1e-15)
    assert MqamScheme(2).ber(0.0) == pytest.approx(0.5858, abs=1e-4)  # not clamped to 0.5
    assert MqamScheme(2).ber(1e4) == 0.0
    assert MqamScheme(16).ber(1.0) == pytest.approx(0.75 * q_series(math.sqrt(0.2)), rel=1e-12)


def test_domain_errors():
    s = MqamScheme(2)
    with pytest.raises(DomainError):
        s.ber(-1e-3)
    with pytest.raises(SingularityError):
        s.ber_prime(0.0)
    with pytest.raises(SingularityError):
        s.ber_second(0.0)
    with pytest.raises(DomainError):
        MqamScheme(1)


def test_central_differences():
    s = MqamScheme(2)
    h = 1e-6
    fd1 = (s.ber(1 + h) - s.ber(1 - h)) / (2 * h)
    assert s.ber_prime(1.0) == pytest.approx(fd1, rel=1e-6)
    h = 1e-4
    fd2 = (s.ber(0.5 + h) - 2 * s.ber(0.5) + s.ber(0.5 - h)) / h ** 2
    assert s.ber_second(0.5) == pytest.approx(fd2, rel=1e-5)


def test_fourth_order_differences():
    for m in MODULATION_SIZES:
        sch = MqamScheme(m)
        for s in np.geomspace(1e-2, 50, 25):
            h = 1e-3 * s
            f = [sch.ber(s + k * h) for k in (-2, -1, 0, 1, 2)]
            fd1 = (f[0] - 8 * f[1] + 8 * f[3] - f[4]) / (12 * h)
            assert sch.ber_prime(s) == pytest.approx(fd1, rel=1e-6)


@pytest.mark.parametrize("m", MODULATION_SIZES)
@given(s=st.floats(1e-6, 200))
def test_signs_and_ratio(m, s):
    sch = MqamScheme(m)
    gp, gpp = sch.ber_prime(s), sch.ber_second(s)
    assert gp < 0 < gpp
    assert -gpp / gp == pytest.approx((1 + sch.beta * s) / (2 * s), rel=1e-10)


@pytest.mark.parametrize("m", MODULATION_SIZES)
def test_scaled_derivative_constant(m):
    sch = MqamScheme(m)
    vals = [sch.ber_prime(s) * math.exp(sch.beta * s / 2) * math.sqrt(s) for s in (0.01, 0.3, 2.0, 9.0)]
    assert vals == pytest.approx([vals[0]] * 4, rel=1e-12)


def test_decreasing_and_convex(rng):
    for m in MODULATION_SIZES:
        sch = MqamScheme(m)
        pairs = np.sort(rng.uniform(0, 40, size=(200, 2)), axis=1)
        for s1, s2 in pairs:
            if s1 == s2:
                continue
            g1, g2 = sch.ber(s1), sch.ber(s2)
            assert g1 > g2 or g2 == 0.0
            assert sch.ber(0.5 * (s1 + s2)) <= 0.5 * (g1 + g2)
