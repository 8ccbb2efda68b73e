import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rstre.errors import NumericRangeError
from rstre.xfloat import XFloat, xfrom_log, xfrom_log_array, xto_float

logs = st.floats(-1e6, 1e6, allow_nan=False)


def test_basic_values():
    assert float(XFloat(3.0)) == 3.0
    assert XFloat(3.0).significand == 1.5 and XFloat(3.0).exponent == 1
    assert float(XFloat(0.0)) == 0.0 and XFloat(0.0).log() == -math.inf
    assert XFloat(-2.0).sign == -1


def test_beyond_double_range():
    tiny = XFloat.from_log(-5000.0)
    assert float(tiny) == 0.0
    assert tiny.log() == pytest.approx(-5000.0, rel=1e-15)
    huge = XFloat.from_log(5000.0)
    assert float(huge) == math.inf
    assert float(huge * tiny) == pytest.approx(1.0, rel=1e-13)
    assert (huge / huge) == XFloat(1.0)


def test_errors():
    with pytest.raises(NumericRangeError):
        XFloat.from_log(math.inf)
    with pytest.raises(NumericRangeError):
        XFloat(-1.0).log()
    with pytest.raises(ZeroDivisionError):
        XFloat(1.0) / XFloat(0.0)
    assert XFloat.from_log(-math.inf) == XFloat(0.0)


@given(logs)
def test_from_log_round_trip(x):
    assert XFloat.from_log(x).log() == pytest.approx(x, rel=1e-15, abs=1e-15)


@given(logs, logs)
def test_mul_div_add_in_log_space(a, b):
    xa, xb = XFloat.from_log(a), XFloat.from_log(b)
    assert (xa * xb).log() == pytest.approx(a + b, rel=1e-14, abs=1e-12)
    assert (xa / xb).log() == pytest.approx(a - b, rel=1e-14, abs=1e-12)
    assert (xa + xb).log() == pytest.approx(np.logaddexp(a, b), rel=1e-14, abs=1e-12)


@given(st.floats(-1e300, 1e300, allow_nan=False), st.floats(-1e300, 1e300, allow_nan=False))
def test_matches_double_arithmetic(a, b):
    assert float(XFloat(a) + XFloat(b)) == pytest.approx(a + b, rel=1e-15, abs=1e-300)
    assert float(XFloat(a) - XFloat(b)) == pytest.approx(a - b, rel=1e-15, abs=1e-300)
    assert float(XFloat(a) * 1.0) == a


@given(logs, logs)
def test_ordering_follows_logs(a, b):
    xa, xb = XFloat.from_log(a), XFloat.from_log(b)
    if a < b:
        assert xa <= xb
    if xa < xb:
        assert a <= b


def test_kernels_agree_with_class():
    for x in (-1234.5, -0.1, 0.0, 3.7, 2000.0):
        m, e = xfrom_log(x)
        c = XFloat.from_log(x)
        assert (m, e) == (c.significand, c.exponent)
    m, e = xfrom_log_array(np.array([-1.0, 0.0, 1.0]))
    assert np.allclose([xto_float(a, b) for a, b in zip(m, e)], np.exp([-1.0, 0.0, 1.0]), rtol=1e-15)
