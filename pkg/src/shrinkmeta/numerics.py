"""Normal-distribution special functions and a monotone root finder.

The complementary error function follows W. J. Cody's rational Chebyshev
approximations (CALERF) and the normal quantile follows Wichura's PPND16
(AS 241).  Both are written out here so results do not depend on the
platform libm.
"""
import math

__all__ = [
    "erfc",
    "std_normal_cdf",
    "std_normal_quantile",
    "bisect_increasing",
    "NoBracketError",
]

# Cody (1969), erf/erfc coefficients.
_A = (3.16112374387056560e00, 1.13864154151050156e02,
      3.77485237685302021e02, 3.20937758913846947e03,
      1.85777706184603153e-1)
_B = (2.36012909523441209e01, 2.44024637934444173e02,
      1.28261652607737228e03, 2.84423683343917062e03)
_C = (5.64188496988670089e-1, 8.88314979438837594e00,
      6.61191906371416295e01, 2.98635138197400131e02,
      8.81952221241769090e02, 1.71204761263407058e03,
      2.05107837782607147e03, 1.23033935479799725e03,
      2.15311535474403846e-8)
_D = (1.57449261107098347e01, 1.17693950891312499e02,
      5.37181101862009858e02, 1.62138957456669019e03,
      3.29079923573345963e03, 4.36261909014324716e03,
      3.43936767414372164e03, 1.23033935480374942e03)
_P = (3.05326634961232344e-1, 3.60344899949804439e-1,
      1.25781726111229246e-1, 1.60837851487422766e-2,
      6.58749161529837803e-4, 1.63153871373020978e-2)
_Q = (2.56852019228982242e00, 1.87295284992346725e00,
      5.27905102951428412e-1, 6.05183413124413191e-2,
      2.33520497626869185e-3)
_SQRPI = 5.6418958354775628695e-1  # 1/sqrt(pi)
_THRESH = 0.46875
_XSMALL = 1.11e-16
_XBIG = 26.543

# Wichura (1988), PPND16 coefficients.
_PA = (3.3871328727963666080e0, 1.3314166789178437745e2,
       1.9715909503065514427e3, 1.3731693765509461125e4,
       4.5921953931549871457e4, 6.7265770927008700853e4,
       3.3430575583588128105e4, 2.5090809287301226727e3)
_PB = (1.0, 4.2313330701600911252e1, 6.8718700749205790830e2,
       5.3941960214247511077e3, 2.1213794301586595867e4,
       3.9307895800092710610e4, 2.8729085735721942674e4,
       5.2264952788528545610e3)
_PC = (1.42343711074968357734e0, 4.63033784615654529590e0,
       5.76949722146069140550e0, 3.64784832476320460504e0,
       1.27045825245236838258e0, 2.41780725177450611770e-1,
       2.27238449892691845833e-2, 7.74545014278341407640e-4)
_PD = (1.0, 2.05319162663775882187e0, 1.67638483018380384940e0,
       6.89767334985100004550e-1, 1.48103976427480074590e-1,
       1.51986665636164571966e-2, 5.47593808499534494600e-4,
       1.05075007164441684324e-9)
_PE = (6.65790464350110377720e0, 5.46378491116411436990e0,
       1.78482653991729133580e0, 2.96560571828504891230e-1,
       2.65321895265761230930e-2, 1.24266094738807843860e-3,
       2.71155556874348757815e-5, 2.01033439929228813265e-7)
_PF = (1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1,
       1.48753612908506148525e-2, 7.86869131145613259100e-4,
       1.84631831751005468180e-5, 1.42151175831644588870e-7,
       2.04426310338993978564e-15)

_SQRT1_2 = 0.70710678118654752440


class NoBracketError(ValueError):
    """Raised when a root finder is given an interval that does not bracket the target."""


def erfc(x):
    """Complementary error function, accurate to a few ulps in relative terms."""
    if math.isnan(x):
        raise ValueError("non-finite input")
    y = abs(x)
    if y <= _THRESH:
        ysq = y * y if y > _XSMALL else 0.0
        xnum = _A[4] * ysq
        xden = ysq
        for i in range(3):
            xnum = (xnum + _A[i]) * ysq
            xden = (xden + _B[i]) * ysq
        return 1.0 - x * (xnum + _A[3]) / (xden + _B[3])
    if y <= 4.0:
        xnum = _C[8] * y
        xden = y
        for i in range(7):
            xnum = (xnum + _C[i]) * y
            xden = (xden + _D[i]) * y
        result = (xnum + _C[7]) / (xden + _D[7])
    elif y >= _XBIG:
        result = 0.0
    else:
        ysq = 1.0 / (y * y)
        xnum = _P[5] * ysq
        xden = ysq
        for i in range(4):
            xnum = (xnum + _P[i]) * ysq
            xden = (xden + _Q[i]) * ysq
        result = ysq * (xnum + _P[4]) / (xden + _Q[4])
        result = (_SQRPI - result) / y
    if result != 0.0:
        # split exp(-y*y) to keep the relative error small in the tail
        ysq = math.trunc(y * 16.0) / 16.0
        delta = (y - ysq) * (y + ysq)
        result = math.exp(-ysq * ysq) * math.exp(-delta) * result
    return 2.0 - result if x < 0 else result


def std_normal_cdf(x):
    """Standard normal CDF, Phi(x) = erfc(-x / sqrt(2)) / 2.

    Both tails keep full relative accuracy, so ``std_normal_cdf(-8)`` is
    about 6.2e-16 rather than a rounding artefact of ``1 - Phi(8)``.
    """
    x = float(x)
    if math.isnan(x):
        raise ValueError("non-finite input")
    return 0.5 * erfc(-x * _SQRT1_2)


def _poly(coef, x):
    acc = 0.0
    for c in reversed(coef):
        acc = acc * x + c
    return acc


def std_normal_quantile(p):
    """Inverse of the standard normal CDF (AS 241, about 1e-16 relative).

    Raises
    ------
    ValueError
        If ``p`` is not strictly inside (0, 1).
    """
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError("quantile domain")
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        return q * _poly(_PA, r) / _poly(_PB, r)
    r = p if q < 0 else 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r -= 1.6
        val = _poly(_PC, r) / _poly(_PD, r)
    else:
        r -= 5.0
        val = _poly(_PE, r) / _poly(_PF, r)
    return -val if q < 0 else val


def bisect_increasing(f, lo, hi, target, xtol):
    """Find ``x`` in ``[lo, hi]`` with ``f(x) = target`` for nondecreasing ``f``.

    The returned point is within ``xtol`` of a solution.  At most
    ``ceil(log2((hi - lo) / xtol)) + 2`` function evaluations are spent on
    bisection, after the two bracket checks.
    """
    if not xtol > 0:
        raise ValueError("xtol must be positive")
    if lo > hi:
        raise NoBracketError("no bracket")
    if f(lo) > target or f(hi) < target:
        raise NoBracketError("no bracket")
    while hi - lo > 2.0 * xtol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if f(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
