# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernel backend.

Same contracts and branch structure as `pure.py`; see that module for the
regime documentation. These loops are the hot path of every per-model
variational fit, so they run elementwise in C with no temporaries.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, exp, expm1, fabs, log, sqrt
from scipy.special.cython_special cimport erfc, erfcx

cnp.import_array()

BACKEND_NAME = "compiled"

cdef double SQRT2 = sqrt(2.0)
cdef double SQRT_HALF_PI = sqrt(0.5 * 3.14159265358979323846)
cdef double LOG_SQRT_2PI = 0.5 * log(2.0 * 3.14159265358979323846)
cdef double INV_SQRT_2PI = 1.0 / sqrt(2.0 * 3.14159265358979323846)
cdef double NARROW_WIDTH = 0.5

cdef double[20] GL_X
cdef double[20] GL_W
GL_X = [
    -9.93128599185094885e-01, -9.63971927277913809e-01,
    -9.12234428251325835e-01, -8.39116971822218782e-01,
    -7.46331906460150796e-01, -6.36053680726515025e-01,
    -5.10867001950827126e-01, -3.73706088715419549e-01,
    -2.27785851141645096e-01, -7.65265211334973383e-02,
    7.65265211334973383e-02, 2.27785851141645096e-01,
    3.73706088715419549e-01, 5.10867001950827126e-01,
    6.36053680726515025e-01, 7.46331906460150796e-01,
    8.39116971822218782e-01, 9.12234428251325835e-01,
    9.63971927277913809e-01, 9.93128599185094885e-01,
]
GL_W = [
    1.76140071391532732e-02, 4.06014298003862170e-02,
    6.26720483341094425e-02, 8.32767415767046715e-02,
    1.01930119817240261e-01, 1.18194531961518245e-01,
    1.31688638449176526e-01, 1.42096109318381875e-01,
    1.49172986472603658e-01, 1.52753387130725782e-01,
    1.52753387130725782e-01, 1.49172986472603658e-01,
    1.42096109318381875e-01, 1.31688638449176526e-01,
    1.18194531961518245e-01, 1.01930119817240261e-01,
    8.32767415767046715e-02, 6.26720483341094425e-02,
    4.06014298003862170e-02, 1.76140071391532732e-02,
]


cdef inline double _phi(double x) noexcept nogil:
    return INV_SQRT_2PI * exp(-0.5 * x * x)


cdef inline double _mills(double x) noexcept nogil:
    return SQRT_HALF_PI * erfcx(x / SQRT2)


cdef inline double _sf(double x) noexcept nogil:
    return 0.5 * erfc(x / SQRT2)


cdef void _tn_one(double L, double U, double* lam, double* chi, double* logk) noexcept nogil:
    """Standardized truncated-normal quantities for one interval [L, U]
    with midpoint >= 0 or L-only truncation (caller reflects)."""
    cdef double h, kap, wc, delta, K, em1, n2, lam_s
    cdef double hw, c, a, b, i0, i1, x, g, ex, vx
    cdef int i

    if U == INFINITY:
        if L > 0.0:
            h = _mills(L)
            lam[0] = 1.0 / h
            logk[0] = log(0.5 * erfcx(L / SQRT2)) - 0.5 * L * L
        else:
            kap = _sf(L)
            lam[0] = _phi(L) / kap
            logk[0] = log(kap)
        chi[0] = 1.0 + lam[0] * (L - lam[0])
        return

    if U - L <= NARROW_WIDTH:
        # Gauss-Legendre on the parent density factored at the left edge.
        hw = 0.5 * (U - L)
        c = 0.5 * (U + L)
        a = c * hw
        b = hw * hw
        i0 = 0.0
        i1 = 0.0
        for i in range(20):
            x = GL_X[i]
            g = GL_W[i] * exp(-a * (x + 1.0) - 0.5 * b * (x * x - 1.0))
            i0 += g
            i1 += g * x
        ex = i1 / i0
        vx = 0.0
        for i in range(20):
            x = GL_X[i]
            g = GL_W[i] * exp(-a * (x + 1.0) - 0.5 * b * (x * x - 1.0))
            vx += g * (x - ex) * (x - ex)
        vx /= i0
        lam[0] = c + hw * ex
        chi[0] = b * vx
        logk[0] = log(hw * i0) - 0.5 * L * L - LOG_SQRT_2PI
        return

    if L >= 0.0:
        wc = 0.5 * (U - L) * (U + L)
        delta = exp(-wc)
        K = _mills(L) - delta * _mills(U)
        em1 = expm1(-wc)
        lam[0] = -em1 / K
        n2 = (-(U - L) - U * em1) / K
        chi[0] = 1.0 + n2 - lam[0] * lam[0]
        logk[0] = log(K) - 0.5 * L * L - LOG_SQRT_2PI
    else:
        kap = _sf(L) - _sf(U)
        lam_s = (_phi(L) - _phi(U)) / kap
        lam[0] = lam_s
        chi[0] = 1.0 + (L * _phi(L) - U * _phi(U)) / kap - lam_s * lam_s
        logk[0] = log(kap)


def tn_moments(const double[::1] mu, const double[::1] var,
               const double[::1] lower, const double[::1] upper):
    """Moments of N(mu, var) truncated to (lower, upper), elementwise.

    Returns (mean, variance, log_mass, entropy) as new arrays.
    """
    cdef Py_ssize_t n = mu.shape[0]
    out_mean = np.empty(n)
    out_var = np.empty(n)
    out_logk = np.empty(n)
    out_ent = np.empty(n)
    cdef double[::1] mean = out_mean
    cdef double[::1] variance = out_var
    cdef double[::1] logm = out_logk
    cdef double[::1] ent = out_ent

    cdef Py_ssize_t i
    cdef double sd, L, U, lam, chi, logk, t
    cdef bint flip

    with nogil:
        for i in range(n):
            sd = sqrt(var[i])
            L = (lower[i] - mu[i]) / sd
            U = (upper[i] - mu[i]) / sd
            if L == -INFINITY and U == INFINITY:
                lam = 0.0
                chi = 1.0
                logk = 0.0
            else:
                flip = 0
                if L == -INFINITY:
                    flip = 1
                elif U != INFINITY and L + U < 0.0:
                    flip = 1
                if flip:
                    t = L
                    L = -U
                    U = -t
                _tn_one(L, U, &lam, &chi, &logk)
                if flip:
                    lam = -lam
            mean[i] = mu[i] + sd * lam
            variance[i] = var[i] * chi
            logm[i] = logk
            ent[i] = logk + LOG_SQRT_2PI + 0.5 * log(var[i]) + 0.5 * (chi + lam * lam)

    return out_mean, out_var, out_logk, out_ent


cdef inline double _pln_f(double y, double eta, double tau, double m, double s) noexcept nogil:
    cdef double z = m + 0.5 * s
    if z > 700.0:
        z = 700.0
    return y * m - exp(z) - 0.5 * tau * (m - eta) * (m - eta) - 0.5 * s * tau + 0.5 * log(s)


def pln_newton(const double[::1] y, const double[::1] eta, double tau,
               double[::1] m, double[::1] s, int max_iter=50, double grad_tol=1e-10):
    """Coordinate-wise damped Newton ascent of the per-site objective;
    updates m and s in place and returns per-site iteration counts."""
    cdef Py_ssize_t n = y.shape[0]
    out_iters = np.zeros(n, dtype=np.int32)
    cdef int[::1] iters = out_iters
    cdef Py_ssize_t i
    cdef int it, k
    cdef double mi, si, rate, grad, step, f0, cand, gu, cu, gm, gs, z

    with nogil:
        for i in range(n):
            mi = m[i]
            si = s[i]
            for it in range(max_iter):
                # m-step; steps below the quadratic-regime threshold are
                # applied unguarded (objective differences are under
                # rounding noise there)
                z = mi + 0.5 * si
                rate = exp(z if z < 700.0 else 700.0)
                grad = y[i] - rate - tau * (mi - eta[i])
                step = grad / (rate + tau)
                if step > 30.0:
                    step = 30.0
                elif step < -30.0:
                    step = -30.0
                if fabs(step) <= 1e-4:
                    mi += step
                else:
                    f0 = _pln_f(y[i], eta[i], tau, mi, si)
                    for k in range(40):
                        cand = mi + step
                        if _pln_f(y[i], eta[i], tau, cand, si) >= f0:
                            mi = cand
                            break
                        step *= 0.5

                # s-step on log s
                z = mi + 0.5 * si
                rate = exp(z if z < 700.0 else 700.0)
                gu = 0.5 * (1.0 - si * (rate + tau))
                cu = 0.5 * si * (rate + tau) + 0.25 * si * si * rate
                step = gu / cu
                if step > 4.0:
                    step = 4.0
                elif step < -4.0:
                    step = -4.0
                if fabs(step) <= 1e-4:
                    si *= exp(step)
                else:
                    f0 = _pln_f(y[i], eta[i], tau, mi, si)
                    for k in range(40):
                        cand = si * exp(step)
                        if _pln_f(y[i], eta[i], tau, mi, cand) >= f0:
                            si = cand
                            break
                        step *= 0.5

                iters[i] = it + 1
                z = mi + 0.5 * si
                rate = exp(z if z < 700.0 else 700.0)
                gm = y[i] - rate - tau * (mi - eta[i])
                gs = -0.5 * rate - 0.5 * tau + 0.5 / si
                if fabs(gm) <= grad_tol and fabs(gs) <= grad_tol:
                    break
            m[i] = mi
            s[i] = si

    return out_iters
