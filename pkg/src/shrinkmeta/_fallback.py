"""Pure-Python (numpy) versions of the compiled kernels in ``_kernels.pyx``."""
import math

import numpy as np

from . import numerics as _nx
from .errors import DegeneratePosteriorError, IntervalNotConverged

BACKEND = "python"

_INV_SQRT_2PI = 0.39894228040143267794
_MAX_ITER = 400

_A, _B, _C, _D, _P, _Q = _nx._A, _nx._B, _nx._C, _nx._D, _nx._P, _nx._Q


def erfc_array(x):
    """Vectorized Cody erfc; same branches and constants as ``numerics.erfc``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.abs(x)
    out = np.empty_like(y)

    small = y <= _nx._THRESH
    if small.any():
        ys = y[small]
        ysq = np.where(ys > _nx._XSMALL, ys * ys, 0.0)
        xnum = _A[4] * ysq
        xden = ysq.copy()
        for i in range(3):
            xnum = (xnum + _A[i]) * ysq
            xden = (xden + _B[i]) * ysq
        out[small] = 1.0 - x[small] * (xnum + _A[3]) / (xden + _B[3])

    mid = ~small & (y <= 4.0)
    far = (y > 4.0) & (y < _nx._XBIG)
    res = np.zeros_like(y)
    if mid.any():
        ym = y[mid]
        xnum = _C[8] * ym
        xden = ym.copy()
        for i in range(7):
            xnum = (xnum + _C[i]) * ym
            xden = (xden + _D[i]) * ym
        res[mid] = (xnum + _C[7]) / (xden + _D[7])
    if far.any():
        yf = y[far]
        ysq = 1.0 / (yf * yf)
        xnum = _P[5] * ysq
        xden = ysq.copy()
        for i in range(4):
            xnum = (xnum + _P[i]) * ysq
            xden = (xden + _Q[i]) * ysq
        r = ysq * (xnum + _P[4]) / (xden + _Q[4])
        res[far] = (_nx._SQRPI - r) / yf
    scaled = mid | far
    if scaled.any():
        ya = y[scaled]
        ysq = np.floor(ya * 16.0) / 16.0
        delta = (ya - ysq) * (ya + ysq)
        res[scaled] = np.exp(-ysq * ysq) * np.exp(-delta) * res[scaled]
    big = ~small
    out[big] = np.where(x[big] < 0, 2.0 - res[big], res[big])
    return out


def build_mixture(y, s, study, scale, tau_max, n):
    y = np.asarray(y, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    # overflow or NaN here is reported below as a degenerate posterior
    with np.errstate(all="ignore"):
        nodes = np.arange(n) * (tau_max / (n - 1))
        t2 = nodes[:, None] ** 2
        v = s[None, :] ** 2 + t2
        v_mu = 1.0 / np.sum(1.0 / v, axis=1)
        mu_hat = v_mu * np.sum(y[None, :] / v, axis=1)
        resid = y[None, :] - mu_hat[:, None]
        ld = 0.5 * np.log(v_mu) - np.sum(0.5 * np.log(v) + 0.5 * resid ** 2 / v, axis=1)
        ld += math.log(math.sqrt(2.0 / math.pi) / scale) - 0.5 * (nodes / scale) ** 2
    mx = ld.max()
    if not np.isfinite(mx):
        raise DegeneratePosteriorError("degenerate posterior grid")
    w = np.exp(ld - mx)
    w[0] *= 0.5
    w[-1] *= 0.5
    total = w.sum()
    if not (total > 0 and np.isfinite(total)):
        raise DegeneratePosteriorError("degenerate posterior grid")
    w /= total

    s2 = s[study] ** 2
    tt = nodes ** 2
    b = s2 / (s2 + tt)
    m = (1.0 - b) * y[study] + b * mu_hat
    sd = np.sqrt(s2 * tt / (s2 + tt) + b * b * v_mu)
    return nodes, w, m, sd


def mixture_cdf(x, w, m, sd):
    keep = w != 0.0
    return float(np.sum(w[keep] * 0.5 * erfc_array(-((x - m[keep]) / sd[keep]) * _nx._SQRT1_2)))


def _cdf_pdf(x, w, m, sd):
    z = (x - m) / sd
    cdf = np.sum(w * 0.5 * erfc_array(-z * _nx._SQRT1_2))
    pdf = np.sum(w * np.exp(-0.5 * z * z) / sd) * _INV_SQRT_2PI
    return float(cdf), float(pdf)


def mixture_quantile(p, w, m, sd, x0=None):
    """Safeguarded Newton inside the bisection bracket; |result - root| <= xtol."""
    smax = float(sd.max())
    lo = float(m.min()) - 10.0 * smax
    hi = float(m.max()) + 10.0 * smax
    xtol = 1e-8 * max(1.0, smax)
    keep = w != 0.0
    w, m, sd = w[keep], m[keep], sd[keep]

    def cdf(x):
        return mixture_cdf(x, w, m, sd)

    if cdf(lo) > p or cdf(hi) < p:
        raise IntervalNotConverged("interval not converged: no bracket")
    a, b = lo, hi
    if x0 is not None and a < x0 < b:
        x = float(x0)
    else:
        mean = float(np.dot(w, m))
        var = float(np.dot(w, sd * sd + (m - mean) ** 2))
        x = mean + _nx.std_normal_quantile(p) * math.sqrt(var)
        if not a < x < b:
            x = 0.5 * (a + b)
    dx_old = b - a
    for _ in range(_MAX_ITER):
        fx, dfx = _cdf_pdf(x, w, m, sd)
        if fx < p:
            a = x
        else:
            b = x
        if b - a <= 2.0 * xtol:
            return 0.5 * (a + b)
        if dfx > 0.0 and abs(fx - p) < 0.5 * dfx * dx_old:
            xn = x - (fx - p) / dfx
            if not a < xn < b:
                xn = 0.5 * (a + b)
        else:
            xn = 0.5 * (a + b)
        dx_old = abs(xn - x)
        if dx_old <= 0.5 * xtol:
            for xc in (xn - 0.5 * xtol, xn + 0.5 * xtol):
                if a < xc < b:
                    if cdf(xc) < p:
                        a = xc
                    else:
                        b = xc
            if b - a <= 2.0 * xtol:
                return 0.5 * (a + b)
            xn = 0.5 * (a + b)
            dx_old = b - a
        x = xn
    raise IntervalNotConverged()


def refined_interval(y, s, study, scale, tau_max, p_lo, p_hi, n_init, n_max, tol):
    n = n_init
    prev = None
    while True:
        _, w, m, sd = build_mixture(y, s, study, scale, tau_max, n)
        lo = mixture_quantile(p_lo, w, m, sd, None if prev is None else prev[0])
        hi = mixture_quantile(p_hi, w, m, sd, None if prev is None else prev[1])
        if prev is not None and abs(lo - prev[0]) < tol and abs(hi - prev[1]) < tol:
            return lo, hi, n
        prev = (lo, hi)
        if 2 * n - 1 > n_max:
            raise IntervalNotConverged()
        n = 2 * n - 1
