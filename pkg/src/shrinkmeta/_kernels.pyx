# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the tau grid, the shrinkage mixture and its quantiles.

Mirrors :mod:`shrinkmeta._fallback` function for function.  Every routine
that does real work runs without the GIL.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, sqrt, floor, fabs, isfinite, NAN
from libc.stdlib cimport malloc, free

from shrinkmeta.errors import DegeneratePosteriorError, IntervalNotConverged
from shrinkmeta.numerics import std_normal_quantile

cnp.import_array()

BACKEND = "cython"

# Cody (1969) erfc coefficients; identical to shrinkmeta.numerics.
cdef double A0 = 3.16112374387056560e00, A1 = 1.13864154151050156e02
cdef double A2 = 3.77485237685302021e02, A3 = 3.20937758913846947e03
cdef double A4 = 1.85777706184603153e-1
cdef double B0 = 2.36012909523441209e01, B1 = 2.44024637934444173e02
cdef double B2 = 1.28261652607737228e03, B3 = 2.84423683343917062e03
cdef double C0 = 5.64188496988670089e-1, C1 = 8.88314979438837594e00
cdef double C2 = 6.61191906371416295e01, C3 = 2.98635138197400131e02
cdef double C4 = 8.81952221241769090e02, C5 = 1.71204761263407058e03
cdef double C6 = 2.05107837782607147e03, C7 = 1.23033935479799725e03
cdef double C8 = 2.15311535474403846e-8
cdef double D0 = 1.57449261107098347e01, D1 = 1.17693950891312499e02
cdef double D2 = 5.37181101862009858e02, D3 = 1.62138957456669019e03
cdef double D4 = 3.29079923573345963e03, D5 = 4.36261909014324716e03
cdef double D6 = 3.43936767414372164e03, D7 = 1.23033935480374942e03
cdef double P0 = 3.05326634961232344e-1, P1 = 3.60344899949804439e-1
cdef double P2 = 1.25781726111229246e-1, P3 = 1.60837851487422766e-2
cdef double P4 = 6.58749161529837803e-4, P5 = 1.63153871373020978e-2
cdef double Q0 = 2.56852019228982242e00, Q1 = 1.87295284992346725e00
cdef double Q2 = 5.27905102951428412e-1, Q3 = 6.05183413124413191e-2
cdef double Q4 = 2.33520497626869185e-3
cdef double SQRPI = 5.6418958354775628695e-1
cdef double SQRT1_2 = 0.70710678118654752440
cdef double INV_SQRT_2PI = 0.39894228040143267794
cdef int MAX_ITER = 400

# error codes shared with the Python side
cdef enum:
    OK = 0
    ERR_DEGENERATE = 1
    ERR_BRACKET = 2
    ERR_NOT_CONVERGED = 3
    ERR_MEMORY = 4


cdef inline double _erfc(double x) noexcept nogil:
    cdef double y = fabs(x), ysq, xnum, xden, result, delta
    if y <= 0.46875:
        ysq = y * y if y > 1.11e-16 else 0.0
        xnum = A4 * ysq
        xden = ysq
        xnum = (xnum + A0) * ysq
        xden = (xden + B0) * ysq
        xnum = (xnum + A1) * ysq
        xden = (xden + B1) * ysq
        xnum = (xnum + A2) * ysq
        xden = (xden + B2) * ysq
        return 1.0 - x * (xnum + A3) / (xden + B3)
    if y <= 4.0:
        xnum = C8 * y
        xden = y
        xnum = (xnum + C0) * y
        xden = (xden + D0) * y
        xnum = (xnum + C1) * y
        xden = (xden + D1) * y
        xnum = (xnum + C2) * y
        xden = (xden + D2) * y
        xnum = (xnum + C3) * y
        xden = (xden + D3) * y
        xnum = (xnum + C4) * y
        xden = (xden + D4) * y
        xnum = (xnum + C5) * y
        xden = (xden + D5) * y
        xnum = (xnum + C6) * y
        xden = (xden + D6) * y
        result = (xnum + C7) / (xden + D7)
    elif y >= 26.543:
        result = 0.0
    else:
        ysq = 1.0 / (y * y)
        xnum = P5 * ysq
        xden = ysq
        xnum = (xnum + P0) * ysq
        xden = (xden + Q0) * ysq
        xnum = (xnum + P1) * ysq
        xden = (xden + Q1) * ysq
        xnum = (xnum + P2) * ysq
        xden = (xden + Q2) * ysq
        xnum = (xnum + P3) * ysq
        xden = (xden + Q3) * ysq
        result = ysq * (xnum + P4) / (xden + Q4)
        result = (SQRPI - result) / y
    if result != 0.0:
        ysq = floor(y * 16.0) / 16.0
        delta = (y - ysq) * (y + ysq)
        result = exp(-ysq * ysq) * exp(-delta) * result
    return 2.0 - result if x < 0 else result


cdef inline double _phi(double z) noexcept nogil:
    return 0.5 * _erfc(-z * SQRT1_2)


cdef int _fill(const double* y, const double* s, int k, int study, double scale,
               double tau_max, int n, double* nodes, double* w, double* m,
               double* sd) noexcept nogil:
    """Grid nodes, normalized trapezoid weights and mixture components for ``study``."""
    cdef int j, i
    cdef double h = tau_max / (n - 1)
    cdef double tau, t2, vi, sw, swy, mu_hat, v_mu, q, ld, mx, total, b, s2
    cdef double inv_scale = 1.0 / scale
    cdef double logc = log(sqrt(2.0 / 3.14159265358979323846) / scale)
    mx = -1.0 / 0.0
    for j in range(n):
        tau = j * h
        nodes[j] = tau
        t2 = tau * tau
        sw = 0.0
        swy = 0.0
        for i in range(k):
            vi = s[i] * s[i] + t2
            sw += 1.0 / vi
            swy += y[i] / vi
        v_mu = 1.0 / sw
        mu_hat = v_mu * swy
        ld = 0.5 * log(v_mu)
        for i in range(k):
            vi = s[i] * s[i] + t2
            q = y[i] - mu_hat
            ld -= 0.5 * log(vi) + 0.5 * q * q / vi
        ld += logc - 0.5 * (tau * inv_scale) * (tau * inv_scale)
        w[j] = ld
        if ld > mx:
            mx = ld
        s2 = s[study] * s[study]
        b = s2 / (s2 + t2)
        m[j] = (1.0 - b) * y[study] + b * mu_hat
        sd[j] = sqrt(s2 * t2 / (s2 + t2) + b * b * v_mu)
    if not isfinite(mx):
        return ERR_DEGENERATE
    total = 0.0
    for j in range(n):
        w[j] = exp(w[j] - mx)
        if j == 0 or j == n - 1:
            w[j] *= 0.5
        total += w[j]
    if not (total > 0.0) or not isfinite(total):
        return ERR_DEGENERATE
    for j in range(n):
        w[j] /= total
    return OK


cdef double _mix_cdf(double x, const double* w, const double* m, const double* sd,
                     int n) noexcept nogil:
    cdef double acc = 0.0
    cdef int j
    for j in range(n):
        if w[j] != 0.0:
            acc += w[j] * _phi((x - m[j]) / sd[j])
    return acc


cdef void _mix_cdf_pdf(double x, const double* w, const double* m, const double* sd,
                       int n, double* cdf, double* pdf) noexcept nogil:
    cdef double acc = 0.0, dens = 0.0, z
    cdef int j
    for j in range(n):
        if w[j] != 0.0:
            z = (x - m[j]) / sd[j]
            acc += w[j] * _phi(z)
            dens += w[j] * exp(-0.5 * z * z) / sd[j]
    cdf[0] = acc
    pdf[0] = dens * INV_SQRT_2PI


cdef double _mix_quantile(double p, double z_p, const double* w, const double* m,
                          const double* sd, int n, double x0, int* err) noexcept nogil:
    """Safeguarded Newton inside the bisection bracket; |result - root| <= xtol.

    ``x0`` is a starting point (NaN to start from the matched normal).
    """
    cdef double lo = m[0], hi = m[0], smax = sd[0], xtol
    cdef double a, b, x, xn, fx, dfx, dx_old, xl, xr, mean = 0.0, var = 0.0
    cdef int j, it
    for j in range(1, n):
        if m[j] < lo:
            lo = m[j]
        if m[j] > hi:
            hi = m[j]
        if sd[j] > smax:
            smax = sd[j]
    lo -= 10.0 * smax
    hi += 10.0 * smax
    xtol = 1e-8 * (smax if smax > 1.0 else 1.0)
    if _mix_cdf(lo, w, m, sd, n) > p or _mix_cdf(hi, w, m, sd, n) < p:
        err[0] = ERR_BRACKET
        return 0.0
    a = lo
    b = hi
    if x0 == x0 and a < x0 < b:
        x = x0
    else:
        for j in range(n):
            mean += w[j] * m[j]
        for j in range(n):
            var += w[j] * (sd[j] * sd[j] + (m[j] - mean) * (m[j] - mean))
        x = mean + z_p * sqrt(var)
        if not (a < x < b):
            x = 0.5 * (a + b)
    dx_old = b - a
    for it in range(MAX_ITER):
        _mix_cdf_pdf(x, w, m, sd, n, &fx, &dfx)
        if fx < p:
            a = x
        else:
            b = x
        if b - a <= 2.0 * xtol:
            return 0.5 * (a + b)
        if dfx > 0.0 and fabs(fx - p) < 0.5 * dfx * dx_old:
            xn = x - (fx - p) / dfx
            if not (a < xn < b):
                xn = 0.5 * (a + b)
        else:
            xn = 0.5 * (a + b)
        dx_old = fabs(xn - x)
        if dx_old <= 0.5 * xtol:
            # certify: shrink the bracket to [xn - xtol/2, xn + xtol/2]
            xl = xn - 0.5 * xtol
            xr = xn + 0.5 * xtol
            if a < xl < b:
                if _mix_cdf(xl, w, m, sd, n) < p:
                    a = xl
                else:
                    b = xl
            if a < xr < b:
                if _mix_cdf(xr, w, m, sd, n) < p:
                    a = xr
                else:
                    b = xr
            if b - a <= 2.0 * xtol:
                return 0.5 * (a + b)
            xn = 0.5 * (a + b)
            dx_old = b - a
        x = xn
    err[0] = ERR_NOT_CONVERGED
    return 0.0


def _raise(int code):
    if code == ERR_DEGENERATE:
        raise DegeneratePosteriorError("degenerate posterior grid")
    if code == ERR_BRACKET:
        raise IntervalNotConverged("interval not converged: no bracket")
    if code == ERR_NOT_CONVERGED:
        raise IntervalNotConverged()
    if code == ERR_MEMORY:
        raise MemoryError()


def build_mixture(y, s, int study, double scale, double tau_max, int n):
    """Return ``(nodes, weights, means, sds)`` for the mixture of ``study``."""
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef double[::1] sv = np.ascontiguousarray(s, dtype=np.float64)
    cdef int k = yv.shape[0]
    nodes = np.empty(n)
    w = np.empty(n)
    m = np.empty(n)
    sd = np.empty(n)
    cdef double[::1] nv = nodes, wv = w, mv = m, sdv = sd
    cdef int code
    with nogil:
        code = _fill(&yv[0], &sv[0], k, study, scale, tau_max, n,
                     &nv[0], &wv[0], &mv[0], &sdv[0])
    _raise(code)
    return nodes, w, m, sd


def mixture_cdf(double x, w, m, sd):
    cdef double[::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef double[::1] mv = np.ascontiguousarray(m, dtype=np.float64)
    cdef double[::1] sdv = np.ascontiguousarray(sd, dtype=np.float64)
    cdef double out
    with nogil:
        out = _mix_cdf(x, &wv[0], &mv[0], &sdv[0], wv.shape[0])
    return out


def mixture_quantile(double p, w, m, sd, x0=None):
    cdef double z_p = std_normal_quantile(p)
    cdef double start = NAN if x0 is None else x0
    cdef double[::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef double[::1] mv = np.ascontiguousarray(m, dtype=np.float64)
    cdef double[::1] sdv = np.ascontiguousarray(sd, dtype=np.float64)
    cdef int err = OK
    cdef double out
    with nogil:
        out = _mix_quantile(p, z_p, &wv[0], &mv[0], &sdv[0], wv.shape[0], start, &err)
    _raise(err)
    return out


def refined_interval(y, s, int study, double scale, double tau_max,
                     double p_lo, double p_hi, int n_init, int n_max, double tol):
    """Equal-tailed endpoints with grid doubling until both move less than ``tol``.

    Returns ``(lo, hi, n)`` where ``n`` is the size of the final grid.
    """
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef double[::1] sv = np.ascontiguousarray(s, dtype=np.float64)
    cdef int k = yv.shape[0]
    cdef int n = n_init, code = OK, first = 1
    cdef double lo = 0.0, hi = 0.0, prev_lo = NAN, prev_hi = NAN
    cdef double z_lo = std_normal_quantile(p_lo), z_hi = std_normal_quantile(p_hi)
    cdef double* buf
    with nogil:
        buf = <double*> malloc(4 * <size_t> n_max * sizeof(double))
        if buf == NULL:
            code = ERR_MEMORY
        while code == OK:
            code = _fill(&yv[0], &sv[0], k, study, scale, tau_max, n,
                         buf, buf + n_max, buf + 2 * n_max, buf + 3 * n_max)
            if code != OK:
                break
            lo = _mix_quantile(p_lo, z_lo, buf + n_max, buf + 2 * n_max, buf + 3 * n_max, n, prev_lo, &code)
            if code != OK:
                break
            hi = _mix_quantile(p_hi, z_hi, buf + n_max, buf + 2 * n_max, buf + 3 * n_max, n, prev_hi, &code)
            if code != OK:
                break
            if not first and fabs(lo - prev_lo) < tol and fabs(hi - prev_hi) < tol:
                break
            first = 0
            prev_lo = lo
            prev_hi = hi
            if 2 * n - 1 > n_max:
                code = ERR_NOT_CONVERGED
                break
            n = 2 * n - 1
        free(buf)
    _raise(code)
    return lo, hi, n
