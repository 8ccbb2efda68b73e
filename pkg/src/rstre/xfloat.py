"""Wide-exponent floating point.

A value is stored as ``significand * 2**exponent`` with the significand a
double in [1, 2) (or exactly 0) and the exponent a 64-bit integer. This keeps
conductances like exp(-1e7) representable without resorting to rationals.

The scalar class is for the Python API; the ``x*`` functions below are the
numba kernels used inside the elimination loops, operating on (mantissa,
exponent) pairs.
"""

from __future__ import annotations

import math

import numba
import numpy as np

from .errors import NumericRangeError

LN2 = math.log(2.0)
# Cody-Waite split of ln 2: the high part has trailing zero bits so k*LN2_HI is
# exact for |k| < 2**32.
LN2_HI = 0.693145751953125
LN2_LO = 1.4286068203094172321e-06
INV_LN2 = 1.0 / LN2

EXP_LIMIT = 2**62


@numba.njit(inline="always")
def xnorm(m, e):
    if m == 0.0:
        return 0.0, 0
    f, k = math.frexp(m)
    return f * 2.0, e + k - 1


@numba.njit(inline="always")
def xfrom_log(x):
    """Exact-as-possible conversion of exp(x) for finite x."""
    if x == -np.inf:
        return 0.0, 0
    k = np.floor(x * INV_LN2)
    r = (x - k * LN2_HI) - k * LN2_LO
    m = np.exp(r)
    return xnorm(m, np.int64(k))


@numba.njit(inline="always")
def xmul(am, ae, bm, be):
    return xnorm(am * bm, ae + be)


@numba.njit(inline="always")
def xdiv(am, ae, bm, be):
    return xnorm(am / bm, ae - be)


@numba.njit(inline="always")
def xadd(am, ae, bm, be):
    if am == 0.0:
        return bm, be
    if bm == 0.0:
        return am, ae
    if ae >= be:
        d = ae - be
        if d > 1100:
            return am, ae
        return xnorm(am + math.ldexp(bm, -d), ae)
    d = be - ae
    if d > 1100:
        return bm, be
    return xnorm(bm + math.ldexp(am, -d), be)


@numba.njit(inline="always")
def xlog(m, e):
    if m == 0.0:
        return -np.inf
    return np.log(m) + e * LN2


@numba.njit(inline="always")
def xto_float(m, e):
    if m == 0.0:
        return 0.0
    if e > 1100:
        return np.inf
    if e < -1100:
        return 0.0
    return math.ldexp(m, e)


@numba.njit(cache=True)
def xfrom_log_array(x):
    mant = np.empty(x.shape[0])
    expo = np.empty(x.shape[0], dtype=np.int64)
    for i in range(x.shape[0]):
        mant[i], expo[i] = xfrom_log(x[i])
    return mant, expo


class XFloat:
    """Scalar wide-exponent float. Immutable; supports + - * / and comparisons."""

    __slots__ = ("significand", "exponent")

    def __init__(self, value: float = 0.0, exponent: int = 0):
        m, e = math.frexp(float(value))
        if m == 0.0:
            self.significand, self.exponent = 0.0, 0
        else:
            self.significand = m * 2.0
            self.exponent = int(exponent) + e - 1
        if abs(self.exponent) > EXP_LIMIT:
            raise NumericRangeError("XFloat exponent out of range")
        if not math.isfinite(self.significand):
            raise NumericRangeError("XFloat significand is not finite")

    @classmethod
    def from_log(cls, x: float) -> XFloat:
        if x == -math.inf:
            return cls(0.0)
        if not math.isfinite(x):
            raise NumericRangeError(f"cannot represent exp({x})")
        k = math.floor(x * INV_LN2)
        if abs(k) > EXP_LIMIT:
            raise NumericRangeError(f"cannot represent exp({x})")
        r = (x - k * LN2_HI) - k * LN2_LO
        return cls(math.exp(r), k)

    @property
    def sign(self) -> int:
        return (self.significand > 0) - (self.significand < 0)

    def log(self) -> float:
        if self.significand < 0:
            raise NumericRangeError("log of negative XFloat")
        if self.significand == 0.0:
            return -math.inf
        return math.log(self.significand) + self.exponent * LN2

    def __float__(self) -> float:
        if self.significand == 0.0:
            return 0.0
        try:
            return math.ldexp(self.significand, self.exponent)
        except OverflowError:
            return math.copysign(math.inf, self.significand)

    def _coerce(self, other):
        return other if isinstance(other, XFloat) else XFloat(other)

    def __add__(self, other):
        other = self._coerce(other)
        if self.significand == 0.0:
            return other
        if other.significand == 0.0:
            return self
        a, b = (self, other) if self.exponent >= other.exponent else (other, self)
        d = a.exponent - b.exponent
        if d > 1100:
            return a
        return XFloat(a.significand + math.ldexp(b.significand, -d), a.exponent)

    __radd__ = __add__

    def __neg__(self):
        return XFloat(-self.significand, self.exponent)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        return XFloat(self.significand * other.significand, self.exponent + other.exponent)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if other.significand == 0.0:
            raise ZeroDivisionError("XFloat division by zero")
        return XFloat(self.significand / other.significand, self.exponent - other.exponent)

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __eq__(self, other):
        if not isinstance(other, (XFloat, int, float)):
            return NotImplemented
        other = self._coerce(other)
        return self.significand == other.significand and self.exponent == other.exponent

    def __hash__(self):
        return hash((self.significand, self.exponent))

    def __lt__(self, other):
        other = self._coerce(other)
        return (self - other).significand < 0

    def __le__(self, other):
        other = self._coerce(other)
        return (self - other).significand <= 0

    def __gt__(self, other):
        return self._coerce(other) < self

    def __ge__(self, other):
        return self._coerce(other) <= self

    def __repr__(self):
        return f"XFloat({self.significand!r}, {self.exponent})"
