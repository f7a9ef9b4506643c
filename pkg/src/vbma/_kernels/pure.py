"""Pure-numpy kernel backend.

Mirrors the compiled extension in `_core.pyx` function for function; the
two must agree to ~1e-12 so either can back the public API. Selected at
import time by `vbma._kernels` when the extension is unavailable or when
VBMA_PURE_PYTHON is set.

Truncated-normal moments are evaluated in three regimes:

* untruncated: trivial passthrough;
* narrow finite intervals (standardized width <= 0.5): fixed 20-point
  Gauss-Legendre quadrature of the parent density factored at the left
  edge, which is immune to the catastrophic cancellation the closed-form
  variance expression suffers on narrow intervals;
* everything else: closed forms using the scaled complementary error
  function, with same-tail survival differences and expm1 so that deep
  tails (standardized bounds beyond |8|) keep full relative precision.

Intervals are first reflected so the midpoint is non-negative; moments of
the reflected variable are mapped back at the end.
"""

import numpy as np
from scipy.special import erfc, erfcx

BACKEND_NAME = "pure"

_SQRT2 = np.sqrt(2.0)
_SQRT_HALF_PI = np.sqrt(0.5 * np.pi)
_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)
_NARROW_WIDTH = 0.5

_GL_X = np.array([
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
])
_GL_W = np.array([
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
])


def _phi(x):
    return np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)


def _mills(x):
    """Phi_c(x) / phi(x) via erfcx; valid without overflow for x >= ~-25."""
    return _SQRT_HALF_PI * erfcx(x / _SQRT2)


def _sf(x):
    """Upper-tail probability Phi_c(x), safe for any finite x <= ~37."""
    return 0.5 * erfc(x / _SQRT2)


def _log_sf(x):
    """log Phi_c(x), stable in the upper tail."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x > 0.0
    out[~pos] = np.log(0.5 * erfc(x[~pos] / _SQRT2))
    xp = x[pos]
    out[pos] = np.log(0.5 * erfcx(xp / _SQRT2)) - 0.5 * xp * xp
    return out


def _tn_onesided_lower(L):
    """Standardized moments for truncation to (L, inf)."""
    lam = np.empty_like(L)
    logk = np.empty_like(L)
    deep = L > 0.0
    h = _mills(L[deep])
    lam[deep] = 1.0 / h
    logk[deep] = np.log(0.5 * erfcx(L[deep] / _SQRT2)) - 0.5 * L[deep] ** 2
    Ln = L[~deep]
    kap = _sf(Ln)
    lam[~deep] = _phi(Ln) / kap
    logk[~deep] = np.log(kap)
    chi = 1.0 + lam * (L - lam)
    return lam, chi, logk


def _tn_twosided_wide(L, U):
    """Standardized moments for finite [L, U] with width > narrow cutoff
    and midpoint >= 0 (caller reflects)."""
    lam = np.empty_like(L)
    chi = np.empty_like(L)
    logk = np.empty_like(L)

    deep = L >= 0.0
    Ld, Ud = L[deep], U[deep]
    wc = 0.5 * (Ud - Ld) * (Ud + Ld)  # = (U^2 - L^2)/2 >= 0
    delta = np.exp(-wc)
    K = _mills(Ld) - delta * _mills(Ud)
    em1 = np.expm1(-wc)
    lam_d = -em1 / K
    n2 = (-(Ud - Ld) - Ud * em1) / K  # = (L - U*delta)/K without cancellation
    lam[deep] = lam_d
    chi[deep] = 1.0 + n2 - lam_d * lam_d
    logk[deep] = np.log(K) - 0.5 * Ld * Ld - _LOG_SQRT_2PI

    Ls, Us = L[~deep], U[~deep]  # straddling zero: kappa is O(1)
    kap = _sf(Ls) - _sf(Us)
    lam_s = (_phi(Ls) - _phi(Us)) / kap
    lam[~deep] = lam_s
    chi[~deep] = 1.0 + (Ls * _phi(Ls) - Us * _phi(Us)) / kap - lam_s * lam_s
    logk[~deep] = np.log(kap)
    return lam, chi, logk


def _tn_narrow(L, U):
    """Gauss-Legendre moments for finite [L, U] with small width.

    The parent density is factored at the left edge, so the quadrature sums
    run over exp(-a(x+1) - b(x^2-1)/2) <= e^{b/2}, which neither overflows
    nor underflows to a harmful degree for any midpoint location.
    """
    h = 0.5 * (U - L)
    c = 0.5 * (U + L)
    a = (c * h)[:, None]
    b = (h * h)[:, None]
    x = _GL_X[None, :]
    g = np.exp(-a * (x + 1.0) - 0.5 * b * (x * x - 1.0))
    wg = _GL_W[None, :] * g
    i0 = wg.sum(axis=1)
    ex = (wg @ _GL_X) / i0
    var_x = (wg * (x - ex[:, None]) ** 2).sum(axis=1) / i0
    lam = c + h * ex
    chi = h * h * var_x
    logk = np.log(h * i0) - 0.5 * L * L - _LOG_SQRT_2PI
    return lam, chi, logk


def tn_moments(mu, var, lower, upper):
    """Moments of N(mu, var) truncated to (lower, upper).

    All four arguments are 1-D float64 arrays of equal length; bounds may
    be -inf/+inf. Returns (mean, variance, log_mass, entropy).
    """
    mu = np.asarray(mu, dtype=np.float64)
    n = mu.shape[0]
    sd = np.sqrt(np.asarray(var, dtype=np.float64))
    L = (np.asarray(lower, dtype=np.float64) - mu) / sd
    U = (np.asarray(upper, dtype=np.float64) - mu) / sd

    lam = np.zeros(n)
    chi = np.ones(n)
    logk = np.zeros(n)

    lo_inf = np.isneginf(L)
    up_inf = np.isposinf(U)
    free = lo_inf & up_inf
    twosided = ~lo_inf & ~up_inf

    # Reflect so every non-trivial case is either lower-truncated or has a
    # non-negative midpoint.
    mid_neg = np.zeros(n, dtype=bool)
    mid_neg[twosided] = L[twosided] + U[twosided] < 0.0
    flip = (lo_inf & ~up_inf) | (twosided & mid_neg)
    Lw = np.where(flip, -U, L)
    Uw = np.where(flip, -L, U)

    onesided = ~free & np.isposinf(Uw)
    if np.any(onesided):
        lam[onesided], chi[onesided], logk[onesided] = _tn_onesided_lower(Lw[onesided])

    finite = ~free & ~onesided
    narrow = finite & (Uw - Lw <= _NARROW_WIDTH)
    wide = finite & ~narrow
    if np.any(narrow):
        lam[narrow], chi[narrow], logk[narrow] = _tn_narrow(Lw[narrow], Uw[narrow])
    if np.any(wide):
        lam[wide], chi[wide], logk[wide] = _tn_twosided_wide(Lw[wide], Uw[wide])

    lam = np.where(flip, -lam, lam)
    mean = mu + sd * lam
    variance = var * chi
    entropy = logk + _LOG_SQRT_2PI + 0.5 * np.log(var) + 0.5 * (chi + lam * lam)
    return mean, variance, logk, entropy


def _pln_objective(y, eta, tau, m, s):
    rate = np.exp(np.minimum(m + 0.5 * s, 700.0))
    return y * m - rate - 0.5 * tau * (m - eta) ** 2 - 0.5 * s * tau + 0.5 * np.log(s)


def pln_newton(y, eta, tau, m, s, max_iter=50, grad_tol=1e-10):
    """Coordinate-wise damped Newton ascent of the per-site objective
    y*m - exp(m + s/2) - (tau/2)(m - eta)^2 - s*tau/2 + log(s)/2.

    m and s are updated in place (s through its logarithm, which keeps it
    positive); each Newton step is halved until the objective does not
    decrease. Returns the per-site iteration counts.
    """
    y = np.asarray(y, dtype=np.float64)
    eta = np.asarray(eta, dtype=np.float64)
    n = y.shape[0]
    iters = np.zeros(n, dtype=np.int32)
    active = np.ones(n, dtype=bool)

    for _ in range(max_iter):
        if not np.any(active):
            break
        ya, ea = y[active], eta[active]
        ma, sa = m[active], s[active]

        # m-step; steps below the quadratic-regime threshold are applied
        # unguarded (the objective difference is under rounding noise there)
        rate = np.exp(np.minimum(ma + 0.5 * sa, 700.0))
        grad = ya - rate - tau * (ma - ea)
        step = grad / (rate + tau)
        np.clip(step, -30.0, 30.0, out=step)
        small = np.abs(step) <= 1e-4
        ma = np.where(small, ma + step, ma)
        step = np.where(small, 0.0, step)
        f0 = _pln_objective(ya, ea, tau, ma, sa)
        for _ in range(40):
            cand = ma + step
            improved = _pln_objective(ya, ea, tau, cand, sa) >= f0
            ma = np.where(improved, cand, ma)
            step = np.where(improved, 0.0, 0.5 * step)
            if np.all(improved) or np.all(step == 0.0):
                break

        # s-step on log s
        rate = np.exp(np.minimum(ma + 0.5 * sa, 700.0))
        grad_u = 0.5 * (1.0 - sa * (rate + tau))
        curv_u = 0.5 * sa * (rate + tau) + 0.25 * sa * sa * rate
        step = grad_u / curv_u
        np.clip(step, -4.0, 4.0, out=step)
        small = np.abs(step) <= 1e-4
        sa = np.where(small, sa * np.exp(step), sa)
        step = np.where(small, 0.0, step)
        f0 = _pln_objective(ya, ea, tau, ma, sa)
        for _ in range(40):
            cand = sa * np.exp(step)
            improved = _pln_objective(ya, ea, tau, ma, cand) >= f0
            sa = np.where(improved, cand, sa)
            step = np.where(improved, 0.0, 0.5 * step)
            if np.all(improved) or np.all(step == 0.0):
                break

        m[active], s[active] = ma, sa
        iters[active] += 1
        rate = np.exp(np.minimum(ma + 0.5 * sa, 700.0))
        gm = ya - rate - tau * (ma - ea)
        gs = -0.5 * rate - 0.5 * tau + 0.5 / sa
        still = (np.abs(gm) > grad_tol) | (np.abs(gs) > grad_tol)
        idx = np.where(active)[0]
        active[idx[~still]] = False

    return iters
