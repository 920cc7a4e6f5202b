"""Correlation functions for isotropic spatial fields.

Three families are supported, each a function of distance ``d`` and range
``r`` only through ``d / r``::

    gaussian     exp(-(d/r)**2)
    exponential  exp(-d/r)
    kbessel      (d/r) * K1(d/r)

``K1`` is the modified Bessel function of the second kind of order one and is
evaluated here without external special-function libraries.
"""

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from ._validation import (
    ValidationError,
    check_distances,
    check_family,
    check_nonnegative,
    check_positive,
)

__all__ = [
    "VariogramParams",
    "CorrelationModel",
    "bessel_k1",
    "correlation",
]

_EULER_GAMMA = 0.5772156649015329
_SERIES_TERMS = 14
_CF_MAXITER = 200
_CF_EPS = 1e-16
# x*K1(x) is below the smallest subnormal double beyond this
_UNDERFLOW = 750.0


@numba.njit(cache=True)
def _series_xk1(x):
    """x*K1(x) for 0 < x <= 2 from the ascending series.

    Uses K1(x) = 1/x + ln(x/2) I1(x) - (x/4) sum_k [psi(k+1)+psi(k+2)] t^k / (k!(k+1)!)
    with t = x^2/4; multiplying through by x keeps the leading 1 exact.
    """
    t = 0.25 * x * x
    log_half = math.log(0.5 * x)
    term = 1.0  # t^k / (k! (k+1)!)
    sum_i = 0.0
    sum_psi = 0.0
    psi_k1 = -_EULER_GAMMA  # psi(k+1)
    for k in range(_SERIES_TERMS):
        psi_k2 = psi_k1 + 1.0 / (k + 1)
        sum_i += term
        sum_psi += (psi_k1 + psi_k2) * term
        psi_k1 = psi_k2
        term = term * t / ((k + 1) * (k + 2))
    return 1.0 + t * (2.0 * log_half * sum_i - sum_psi)


@numba.njit(cache=True)
def _steed_xk1(x):
    """x*K1(x) for x > 2 via Steed's continued fraction (Temme's CF2, order 0)."""
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = d
    delh = d
    q1 = 0.0
    q2 = 1.0
    a1 = 0.25
    q = a1
    c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(1, _CF_MAXITER):
        a -= 2 * i
        c = -a * c / (i + 1.0)
        qnew = (q1 - b * q2) / a
        q1 = q2
        q2 = qnew
        q += c * qnew
        b += 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if abs(dels) < _CF_EPS * abs(s):
            break
    h = a1 * h
    # underflows to 0 rather than overflowing for large x
    return math.sqrt(0.5 * math.pi / x) * math.exp(-x) / s * (x + 0.5 - h)


@numba.vectorize(["float64(float64)"], cache=True)
def _xk1(x):
    """x*K1(x) for x >= 0, with the removable singularity at 0 set to 1."""
    if x < 1e-150:
        # 1 + O(x^2 log x) is exactly 1 in double precision
        return 1.0
    if x <= 2.0:
        return _series_xk1(x)
    if x > _UNDERFLOW:
        return 0.0
    return _steed_xk1(x)


def bessel_k1(x):
    """Modified Bessel function of the second kind, order one.

    Parameters
    ----------
    x : float or array_like
        Strictly positive arguments.

    Returns
    -------
    float or ndarray
        ``K1(x)``. Large arguments underflow smoothly to zero.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise ValidationError("bessel_k1 requires finite x > 0")
    out = np.asarray(_xk1(arr)) / arr
    return float(out) if out.ndim == 0 else out


def _gaussian(u):
    return np.exp(-u * u)


def _exponential(u):
    return np.exp(-u)


_KERNELS = {
    "gaussian": _gaussian,
    "exponential": _exponential,
    "kbessel": _xk1,
}


def correlation(family, d, r):
    """Evaluate the correlation ``f(d, r)`` of a family.

    ``d`` may be a scalar or an array of distances; a scalar in gives a float
    out. ``f(0, r)`` is exactly 1 for every family.
    """
    kernel = _KERNELS[check_family(family)]
    r = check_positive(r, "r")
    d = check_distances(d)
    out = np.asarray(kernel(d / r))
    out = np.where(d == 0, 1.0, out)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class VariogramParams:
    """Nugget, sill and range of a variogram.

    ``rho`` is the spatially structured share of variance,
    ``(sill - nugget) / sill``.
    """

    nugget: float
    sill: float
    range: float

    def __post_init__(self):
        check_nonnegative(self.nugget, "nugget")
        check_positive(self.sill, "sill")
        check_positive(self.range, "range")
        if self.nugget > self.sill:
            raise ValidationError("nugget must not exceed sill (0 <= C0 <= C1)")

    @property
    def rho(self):
        return (self.sill - self.nugget) / self.sill

    @classmethod
    def from_rho(cls, rho, range, sill=1.0):
        if not 0 <= rho <= 1:
            raise ValidationError(f"rho must satisfy 0 <= rho <= 1, got {rho!r}")
        return cls(nugget=sill * (1.0 - rho), sill=sill, range=range)


@dataclass(frozen=True)
class CorrelationModel:
    """A correlation family with its range ``r`` and scale ``rho``."""

    family: str
    r: float
    rho: float = 1.0
    params: VariogramParams = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "family", check_family(self.family))
        check_positive(self.r, "r")
        if not (0 <= self.rho <= 1):
            raise ValidationError(f"rho must satisfy 0 <= rho <= 1, got {self.rho!r}")
        if self.params is None:
            object.__setattr__(self, "params", VariogramParams.from_rho(self.rho, self.r))

    @classmethod
    def from_variogram(cls, family, params):
        return cls(family=family, r=params.range, rho=params.rho, params=params)

    def __call__(self, d):
        return correlation(self.family, d, self.r)
