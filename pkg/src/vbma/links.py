"""Family-specific latent-site updates.

Probit, tobit, and the rounded-count (STAR) family have closed-form
truncated-normal site updates; the Poisson log-normal family optimizes
each Gaussian site by damped Newton. Everything here is a thin veneer
over the selected kernel backend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from ._kernels import pln_newton, tn_moments
from .data import Dataset
from .errors import DataError, ParameterError


@dataclass(frozen=True)
class TruncNormMoments:
    mean: float
    variance: float
    log_mass: float
    entropy: float


@dataclass
class PlnSiteParams:
    m: float
    s: float
    converged: bool = False
    newton_iters: int = 0


def _as1d(x) -> np.ndarray:
    return np.ascontiguousarray(np.atleast_1d(np.asarray(x, dtype=np.float64)))


def trunc_norm_moments(mu: float, var: float, lower: float, upper: float) -> TruncNormMoments:
    """Mean, variance, log normalizing mass, and entropy of N(mu, var)
    truncated to (lower, upper); bounds may be infinite."""
    if not var > 0:
        raise ParameterError(f"var must be positive, got {var}")
    if not lower < upper:
        raise ParameterError(f"need lower < upper, got [{lower}, {upper}]")
    m, s, logk, ent = tn_moments(_as1d(mu), _as1d(var), _as1d(lower), _as1d(upper))
    return TruncNormMoments(float(m[0]), float(s[0]), float(logk[0]), float(ent[0]))


def probit_bounds(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Half-line truncation per outcome: (0, inf) for y=1, (-inf, 0) for y=0."""
    pos = y > 0.5
    lower = np.where(pos, 0.0, -np.inf)
    upper = np.where(pos, np.inf, 0.0)
    return lower, upper


def star_bounds(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Count y maps to the latent interval [log y, log(y+1)), zeros to (-inf, 0)."""
    zero = y < 0.5
    with np.errstate(divide="ignore"):
        lower = np.where(zero, -np.inf, np.log(np.maximum(y, 1.0)))
    upper = np.where(zero, 0.0, np.log(y + 1.0))
    return lower, upper


def update_z_probit(mu_i: float, y_i: int) -> tuple[float, float, float, float]:
    """(m, s, entropy, log_mass) for one probit site with unit variance."""
    if y_i not in (0, 1):
        raise DataError(f"probit outcome must be 0/1, got {y_i}")
    if y_i == 1:
        tm = trunc_norm_moments(mu_i, 1.0, 0.0, np.inf)
    else:
        tm = trunc_norm_moments(mu_i, 1.0, -np.inf, 0.0)
    return tm.mean, tm.variance, tm.entropy, tm.log_mass


def update_z_tobit(mu_i: float, xi: float, y_i: float, y_L: float) -> tuple[float, float, float]:
    """Uncensored sites pass through as observed (m=y, s=0, entropy 0);
    censored sites get the lower-truncated moments."""
    if y_i < y_L:
        raise DataError(f"tobit outcome {y_i} below censoring bound {y_L}")
    if y_i > y_L:
        return float(y_i), 0.0, 0.0
    tm = trunc_norm_moments(mu_i, xi, -np.inf, y_L)
    return tm.mean, tm.variance, tm.entropy


def update_z_star(mu_i: float, xi: float, y_i: int) -> tuple[float, float, float]:
    if y_i == 0:
        tm = trunc_norm_moments(mu_i, xi, -np.inf, 0.0)
    else:
        tm = trunc_norm_moments(mu_i, xi, math.log(y_i), math.log(y_i + 1.0))
    return tm.mean, tm.variance, tm.entropy


def update_z_pln(
    y_i: float,
    eta_i: float,
    tau: float,
    init: PlnSiteParams,
    max_iter: int = 50,
    grad_tol: float = 1e-10,
) -> PlnSiteParams:
    """Optimize one Gaussian site of the Poisson log-normal ELBO."""
    if init.s <= 0:
        raise ParameterError("initial site variance must be positive")
    if tau <= 0:
        raise ParameterError("tau must be positive")
    m = _as1d(init.m)
    s = _as1d(init.s)
    iters = pln_newton(_as1d(float(y_i)), _as1d(eta_i), float(tau), m, s, max_iter, grad_tol)
    gm, gs = pln_site_grads(float(y_i), eta_i, tau, float(m[0]), float(s[0]))
    return PlnSiteParams(
        m=float(m[0]),
        s=float(s[0]),
        converged=bool(abs(gm) <= grad_tol and abs(gs) <= grad_tol),
        newton_iters=int(iters[0]),
    )


def pln_site_grads(y, eta, tau, m, s):
    """Analytic partials of the per-site objective with respect to m and s."""
    rate = np.exp(m + 0.5 * s)
    return y - rate - tau * (m - eta), -0.5 * rate - 0.5 * tau + 0.5 / s


def pln_site_objective(y, eta, tau, m, s):
    """Per-site objective y*m - exp(m+s/2) - tau/2 (m-eta)^2 - s tau/2 + log(s)/2."""
    return y * m - np.exp(m + 0.5 * s) - 0.5 * tau * (m - eta) ** 2 - 0.5 * s * tau + 0.5 * np.log(s)


def expected_loglik(family: str, y, m, s):
    """E_q[log p(y_i | z_i)] summed over sites: zero for the deterministic
    links, the Poisson expectation for PLN."""
    if family == "pln":
        return float(np.sum(y * m - np.exp(m + 0.5 * s) - gammaln(y + 1.0)))
    if family in ("probit", "tobit", "star"):
        return 0.0
    raise ParameterError(f"unknown family {family!r}")


def init_latent(dataset: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Family-aware starting values for the latent means and variances."""
    y = dataset.y
    n = dataset.n
    s = np.ones(n)
    if dataset.family == "probit":
        m = 2.0 * y - 1.0
    elif dataset.family == "tobit":
        m = np.where(y > dataset.y_L, y, dataset.y_L - 0.5)
    elif dataset.family == "star":
        with np.errstate(divide="ignore"):
            lo = np.where(y > 0, np.log(np.maximum(y, 1.0)), 0.0)
        m = np.where(y > 0, 0.5 * (lo + np.log(y + 1.0)), -0.5)
    elif dataset.family == "pln":
        m = np.log(y + 0.5)
    else:
        raise ParameterError(f"unknown family {dataset.family!r}")
    return m, s


def latent_sweep(
    dataset: Dataset,
    mu: np.ndarray,
    xi: float,
    tau: float,
    m: np.ndarray,
    s: np.ndarray,
    pln_max_iter: int = 50,
    pln_grad_tol: float = 1e-10,
) -> tuple[np.ndarray, np.ndarray]:
    """One full pass of site updates given the linear predictor ``mu`` and
    latent variance ``xi`` (= 1/tau). For PLN the passed (m, s) provide
    warm starts and are updated in place; the closed-form families return
    fresh arrays."""
    y = dataset.y
    if dataset.family == "probit":
        lower, upper = probit_bounds(y)
        m_new, s_new, _, _ = tn_moments(mu, np.ones_like(mu), lower, upper)
        return m_new, s_new
    if dataset.family == "tobit":
        cens = y <= dataset.y_L
        m_new = y.copy()
        s_new = np.zeros_like(y)
        if np.any(cens):
            mc, sc, _, _ = tn_moments(
                np.ascontiguousarray(mu[cens]),
                np.full(int(cens.sum()), xi),
                np.full(int(cens.sum()), -np.inf),
                np.full(int(cens.sum()), float(dataset.y_L)),
            )
            m_new[cens] = mc
            s_new[cens] = sc
        return m_new, s_new
    if dataset.family == "star":
        lower, upper = star_bounds(y)
        m_new, s_new, _, _ = tn_moments(mu, np.full_like(mu, xi), lower, upper)
        return m_new, s_new
    if dataset.family == "pln":
        pln_newton(y, np.ascontiguousarray(mu), float(tau), m, s, pln_max_iter, pln_grad_tol)
        return m, s
    raise ParameterError(f"unknown family {dataset.family!r}")


def latent_log_q_terms(
    dataset: Dataset,
    z_mu: np.ndarray | None,
    z_xi: float | None,
    m: np.ndarray,
    s: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-site (log q(z_i) at m_i, entropy of q(z_i)) for the variational
    latent factors defined by (z_mu, z_xi) for truncated-normal families or
    by (m, s) themselves for PLN. Tobit uncensored sites contribute zeros.

    These are exactly the latent pieces needed by the evidence criteria.
    """
    y = dataset.y
    n = dataset.n
    if dataset.family == "pln":
        ent = 0.5 * np.log(2.0 * np.pi * np.e * s)
        return -0.5 * np.log(2.0 * np.pi * s), ent

    if dataset.family == "probit":
        lower, upper = probit_bounds(y)
        var = np.ones(n)
        mask = np.ones(n, dtype=bool)
    elif dataset.family == "tobit":
        mask = y <= dataset.y_L
        lower = np.full(n, -np.inf)
        upper = np.full(n, float(dataset.y_L))
        var = np.full(n, z_xi)
    else:  # star
        lower, upper = star_bounds(y)
        var = np.full(n, z_xi)
        mask = np.ones(n, dtype=bool)

    logq = np.zeros(n)
    ent = np.zeros(n)
    if np.any(mask):
        _, _, logk, ent_m = tn_moments(
            np.ascontiguousarray(z_mu[mask]),
            np.ascontiguousarray(var[mask]),
            np.ascontiguousarray(lower[mask]),
            np.ascontiguousarray(upper[mask]),
        )
        zc = (m[mask] - z_mu[mask]) ** 2 / var[mask]
        # log of the truncated-normal density at the site mean m_i
        logq[mask] = -0.5 * np.log(2.0 * np.pi * var[mask]) - 0.5 * zc - logk
        ent[mask] = ent_m
    return logq, ent
