"""Coordinate-ascent updates for the regression block, the assembled
evidence lower bound, and the outer fitting loop.

The regression-block updates are generic across families given the latent
moments (m_i, s_i): a Gaussian factor for the intercept, a Gaussian factor
for the selected coefficients under the g-prior, and an inverse-gamma
factor for the error variance (fixed at one for probit). Convergence is
declared on the largest relative change of the monitored parameter vector
(intercept mean, coefficient means, and the error-variance scale b/a).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import digamma, gammaln

from .data import CrossProducts, Dataset, SubmodelChol, cross_products, submodel_chol
from .errors import NumericalError, ParameterError
from .links import expected_loglik, init_latent, latent_log_q_terms, latent_sweep
from .models import ModelIndex

LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class FitConfig:
    """Fitting knobs. ``g`` defaults to the sample size at fit time."""

    g: float | None = None
    tol: float = 1e-6
    max_iter: int = 10000
    ridge: float = 0.0
    pln_max_iter: int = 50
    pln_grad_tol: float = 1e-10

    def __post_init__(self):
        if self.tol <= 0:
            raise ParameterError("tol must be positive")
        if self.max_iter < 1:
            raise ParameterError("max_iter must be at least 1")
        if self.g is not None and self.g <= 0:
            raise ParameterError("g must be positive")

    def g_value(self, n: int) -> float:
        return float(self.g) if self.g is not None else float(n)


@dataclass
class VariationalState:
    """All variational parameters for one model fit.

    ``z_mu``/``z_xi`` are the location/scale defining the latent factors of
    the truncated-normal families (they may differ from the current linear
    predictor for frozen-latent fits); PLN sites are parametrized directly
    by (m, s) and leave them None.
    """

    mu_alpha: float
    omega_alpha: float
    mu_beta: np.ndarray
    Omega_beta: np.ndarray
    a: float
    b: float
    m: np.ndarray
    s: np.ndarray
    sigma2_fixed: bool
    z_mu: np.ndarray | None = None
    z_xi: float | None = None
    # model-independent latent reductions, prefilled by frozen-latent fits
    latent_logq_sum: float | None = None
    latent_entropy_sum: float | None = None
    latent_loglik_sum: float | None = None

    @property
    def xi(self) -> float:
        """Latent-factor variance scale b/a (1 when sigma2 is fixed)."""
        return 1.0 if self.sigma2_fixed else self.b / self.a

    @property
    def sigma2_hat(self) -> float:
        """Posterior mean of sigma^2 (inverse-gamma mean b/(a-1))."""
        if self.sigma2_fixed:
            return 1.0
        if self.a <= 1.0:
            raise ParameterError(f"sigma2 posterior mean needs a > 1, got a={self.a}")
        return self.b / (self.a - 1.0)


@dataclass
class FitResult:
    state: VariationalState
    iters: int
    converged: bool
    elbo_trace: list[float] = field(default_factory=list)


def _fresh_state(dataset: Dataset, model: ModelIndex, warm=None) -> VariationalState:
    pk = model.size
    if warm is not None:
        m = warm.m.copy()
        s = warm.s.copy()
        a, b = warm.a, warm.b
    else:
        m, s = init_latent(dataset)
        a, b = 1.0, 1.0
    state = VariationalState(
        mu_alpha=0.0,
        omega_alpha=1.0 / dataset.n,
        mu_beta=np.zeros(pk),
        Omega_beta=np.eye(pk),
        a=a,
        b=b,
        m=m,
        s=s,
        sigma2_fixed=dataset.family == "probit",
    )
    # a dimension-compatible warm start also seeds the monitored parameter
    # block, so a restart from a converged state stops after one sweep
    if warm is not None and warm.mu_beta.shape[0] == pk:
        state.mu_alpha = warm.mu_alpha
        state.omega_alpha = warm.omega_alpha
        state.mu_beta = warm.mu_beta.copy()
        state.Omega_beta = warm.Omega_beta.copy()
    return state


def update_theta(
    state: VariationalState,
    crossproducts: CrossProducts,
    model: ModelIndex,
    dataset: Dataset,
    config: FitConfig,
    chol: SubmodelChol | None = None,
) -> VariationalState:
    """One Gauss-Seidel pass over the regression-block factors given the
    current latent moments; returns the updated state (in place)."""
    n = dataset.n
    pk = model.size
    g = config.g_value(n)
    delta = g / (1.0 + g)
    m = state.m

    xi = state.xi
    state.mu_alpha = float(np.mean(m))
    state.omega_alpha = xi / n

    if pk > 0:
        if chol is None:
            chol = submodel_chol(crossproducts, model, config.ridge)
        idx = chol.idx
        Xk = dataset.X[:, idx]
        Gk = crossproducts.G[np.ix_(idx, idx)]
        Xtm = Xk.T @ m
        state.mu_beta = delta * chol.solve(Xtm)
        state.Omega_beta = delta * xi * chol.solve(np.eye(pk))
        resid = m - state.mu_alpha - Xk @ state.mu_beta
        quad = float(state.mu_beta @ Gk @ state.mu_beta)
        tr_GO = float(np.einsum("ij,ji->", Gk, state.Omega_beta))
    else:
        resid = m - state.mu_alpha
        quad = 0.0
        tr_GO = 0.0

    if not state.sigma2_fixed:
        state.a = 0.5 * (n + pk)
        state.b = 0.5 * (
            float(resid @ resid)
            + float(np.sum(state.s))
            + n * state.omega_alpha
            + quad / g
            + (1.0 + 1.0 / g) * tr_GO
        )
        if not np.isfinite(state.b) or state.b <= 0.0:
            raise NumericalError(f"inverse-gamma rate b became invalid: {state.b}")
    return state


def master_elbo(
    state: VariationalState,
    dataset: Dataset,
    model: ModelIndex,
    config: FitConfig,
    crossproducts: CrossProducts | None = None,
    chol: SubmodelChol | None = None,
) -> float:
    """Evidence lower bound of the mean-field family at ``state``."""
    n = dataset.n
    pk = model.size
    g = config.g_value(n)
    fixed = state.sigma2_fixed
    tau = 1.0 if fixed else state.a / state.b
    a, b = state.a, state.b

    if pk > 0:
        if crossproducts is None:
            crossproducts = cross_products(dataset)
        idx = np.asarray(model.indices, dtype=np.intp)
        Gk = crossproducts.G[np.ix_(idx, idx)]
        mu = state.mu_alpha + dataset.X[:, idx] @ state.mu_beta
        quad_beta = float(state.mu_beta @ Gk @ state.mu_beta)
        tr_GO = float(np.einsum("ij,ji->", Gk, state.Omega_beta))
        if chol is not None:
            logdet_G = chol.logdet
        else:
            logdet_G = float(np.linalg.slogdet(Gk)[1])
        logdet_Omega = float(np.linalg.slogdet(state.Omega_beta)[1])
    else:
        mu = np.full(n, state.mu_alpha)
        quad_beta = tr_GO = 0.0
        logdet_G = logdet_Omega = 0.0

    elbo = expected_loglik(dataset.family, dataset.y, state.m, state.s)
    elbo -= 0.5 * (n + pk) * LOG_2PI
    quad = float(np.sum(state.s) + np.sum((state.m - mu) ** 2)) + n * state.omega_alpha + tr_GO
    elbo -= 0.5 * tau * quad
    elbo += -0.5 * pk * np.log(g) + 0.5 * logdet_G - 0.5 * tau / g * (tr_GO + quad_beta)

    if state.latent_entropy_sum is not None:
        elbo += state.latent_entropy_sum
    else:
        _, ent = latent_log_q_terms(dataset, state.z_mu, state.z_xi, state.m, state.s)
        elbo += float(np.sum(ent))
    elbo += 0.5 * np.log(2.0 * np.pi * np.e * state.omega_alpha)
    elbo += 0.5 * (pk * np.log(2.0 * np.pi * np.e) + logdet_Omega)

    if not fixed:
        elbo -= 0.5 * (n + pk) * (np.log(b) - digamma(a))  # E_q[log sigma^2]
        elbo += digamma(a) - np.log(b)  # E_q[log p(sigma^2)]
        elbo += a + np.log(b) + gammaln(a) - (a + 1.0) * digamma(a)  # H[q(sigma^2)]
    return float(elbo)


def _theta_vector(state: VariationalState) -> np.ndarray:
    return np.concatenate(([state.mu_alpha], state.mu_beta, [state.xi]))


def _max_rel_change(new: np.ndarray, old: np.ndarray) -> float:
    return float(np.max(np.abs(new - old) / np.maximum(np.abs(old), 1e-8)))


def run_cavi(
    dataset: Dataset,
    model: ModelIndex,
    config: FitConfig | None = None,
    warm: VariationalState | None = None,
    crossproducts: CrossProducts | None = None,
    chol: SubmodelChol | None = None,
    track_elbo: bool = False,
) -> FitResult:
    """Alternate latent-site updates and regression-block updates until the
    largest relative change of the monitored parameters falls below tol."""
    config = config or FitConfig()
    if crossproducts is None:
        crossproducts = cross_products(dataset)
    if chol is None and model.size > 0:
        chol = submodel_chol(crossproducts, model, config.ridge)
    idx = np.asarray(model.indices, dtype=np.intp)

    state = _fresh_state(dataset, model, warm)
    theta_old = _theta_vector(state)
    elbos: list[float] = []
    converged = False
    iters = 0

    for it in range(1, config.max_iter + 1):
        iters = it
        update_theta(state, crossproducts, model, dataset, config, chol)
        if model.size:
            mu = state.mu_alpha + dataset.X[:, idx] @ state.mu_beta
        else:
            mu = np.full(dataset.n, state.mu_alpha)
        xi = state.xi
        state.m, state.s = latent_sweep(
            dataset, mu, xi, 1.0 / xi, state.m, state.s,
            config.pln_max_iter, config.pln_grad_tol,
        )
        state.z_mu = mu
        state.z_xi = xi
        if not (np.isfinite(state.m).all() and np.isfinite(state.b)):
            raise NumericalError(f"non-finite state at iteration {it}")
        if track_elbo:
            elbos.append(master_elbo(state, dataset, model, config, crossproducts, chol))
        theta_new = _theta_vector(state)
        if _max_rel_change(theta_new, theta_old) <= config.tol:
            converged = True
            break
        theta_old = theta_new

    return FitResult(state=state, iters=iters, converged=converged, elbo_trace=elbos)
