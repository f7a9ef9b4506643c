"""Evidence approximations and the frozen-latent fast path.

Two criteria are supported per fitted model: the evidence lower bound, and
the plug-in marginal-likelihood approximation obtained by evaluating the
joint-over-posterior ratio at the variational posterior means (the
-2-scaled version of which is only applied in reports). The fast path
freezes every latent site at its null-model fit, after which each model
costs one small linear solve plus scalar bookkeeping.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import gammaln

from .cavi import (
    LOG_2PI,
    FitConfig,
    FitResult,
    VariationalState,
    master_elbo,
    run_cavi,
)
from .data import CrossProducts, Dataset, SubmodelChol, cross_products, submodel_chol
from .errors import NumericalError, ParameterError, SingularModelError
from .links import latent_log_q_terms
from .models import ModelIndex, ModelPriorSpec, log_model_prior

METHODS = ("vb", "avb")
CRITERIA = ("vbc", "elbo")


@dataclass(frozen=True)
class EvidenceRecord:
    """Per-model evidence evaluation result."""

    model: ModelIndex
    log_evidence: float
    log_prior: float
    criterion: str
    method: str
    iters: int
    converged: bool
    mu_alpha: float
    mu_beta: np.ndarray
    wall_time_ns: int = 0

    @property
    def log_posterior_unnorm(self) -> float:
        return self.log_evidence + self.log_prior


@dataclass(frozen=True)
class NullCache:
    """Frozen null-model latent moments plus the precomputed reductions
    that let a per-model refit touch only selected-column quantities."""

    m_bar: np.ndarray
    s_bar: np.ndarray
    alpha0: float
    sigma2_0: float
    z_mu0: np.ndarray
    z_xi0: float
    Xt_mbar: np.ndarray
    sum_m: float
    sum_m2: float
    sum_s: float
    logq_z_sum: float
    entropy_z_sum: float
    loglik_z: float
    null_result: FitResult


def log_vbc(
    state: VariationalState,
    dataset: Dataset,
    model: ModelIndex,
    config: FitConfig,
    crossproducts: CrossProducts | None = None,
    chol: SubmodelChol | None = None,
) -> float:
    """Plug-in log evidence: log p(y|z) + log p(z|theta) + log p(theta)
    - log q(z) - log q(theta), all evaluated at the posterior expectations
    (latent means, coefficient means, inverse-gamma mean for sigma^2)."""
    n = dataset.n
    pk = model.size
    g = config.g_value(n)
    fixed = state.sigma2_fixed
    sigma2 = state.sigma2_hat
    m = state.m

    if pk > 0:
        idx = np.asarray(model.indices, dtype=np.intp)
        Xk = dataset.X[:, idx]
        mu_hat = state.mu_alpha + Xk @ state.mu_beta
        if crossproducts is None:
            crossproducts = cross_products(dataset)
        Gk = crossproducts.G[np.ix_(idx, idx)]
        quad_beta = float(state.mu_beta @ Gk @ state.mu_beta)
        logdet_G = chol.logdet if chol is not None else float(np.linalg.slogdet(Gk)[1])
        logdet_Omega = float(np.linalg.slogdet(state.Omega_beta)[1])
    else:
        mu_hat = np.full(n, state.mu_alpha)
        quad_beta = 0.0
        logdet_G = logdet_Omega = 0.0

    # log p(y | z-hat): zero for the interval likelihoods (means are
    # interval-interior), Poisson log-pmf at the latent means for PLN.
    if dataset.family != "pln":
        ll_z = 0.0
    elif state.latent_loglik_sum is not None:
        ll_z = state.latent_loglik_sum
    else:
        ll_z = float(np.sum(dataset.y * m - np.exp(m) - gammaln(dataset.y + 1.0)))

    lp_z = -0.5 * n * np.log(2.0 * np.pi * sigma2) - 0.5 * float(
        np.sum((m - mu_hat) ** 2)
    ) / sigma2

    lp_theta = 0.0
    if pk > 0:
        lp_theta += (
            -0.5 * pk * np.log(2.0 * np.pi * g * sigma2)
            + 0.5 * logdet_G
            - 0.5 * quad_beta / (g * sigma2)
        )
    if not fixed:
        lp_theta -= np.log(sigma2)  # improper 1/sigma^2 prior, kept at face value

    if state.latent_logq_sum is not None:
        lq_z = state.latent_logq_sum
    else:
        logq, _ = latent_log_q_terms(dataset, state.z_mu, state.z_xi, m, state.s)
        lq_z = float(np.sum(logq))

    lq_theta = -0.5 * np.log(2.0 * np.pi * state.omega_alpha)
    lq_theta += -0.5 * (pk * LOG_2PI + logdet_Omega)
    if not fixed:
        a, b = state.a, state.b
        lq_theta += a * np.log(b) - gammaln(a) - (a + 1.0) * np.log(sigma2) - b / sigma2

    out = ll_z + lp_z + lp_theta - lq_z - lq_theta
    if not np.isfinite(out):
        terms = dict(ll_z=ll_z, lp_z=lp_z, lp_theta=lp_theta, lq_z=lq_z, lq_theta=lq_theta)
        bad = [k for k, v in terms.items() if not np.isfinite(v)]
        raise NumericalError(f"non-finite evidence term(s): {bad}")
    return float(out)


def build_null_cache(
    dataset: Dataset,
    config: FitConfig | None = None,
    crossproducts: CrossProducts | None = None,
) -> NullCache:
    """Run the full variational fit of the intercept-only model and freeze
    its latent moments together with every model-independent reduction."""
    config = config or FitConfig()
    if crossproducts is None:
        crossproducts = cross_products(dataset)
    null = ModelIndex.null(dataset.p)
    result = run_cavi(dataset, null, config, crossproducts=crossproducts)
    st = result.state
    m_bar = st.m.copy()
    s_bar = st.s.copy()
    logq, ent = latent_log_q_terms(dataset, st.z_mu, st.z_xi, m_bar, s_bar)
    if dataset.family == "pln":
        loglik_z = float(
            np.sum(dataset.y * m_bar - np.exp(m_bar) - gammaln(dataset.y + 1.0))
        )
    else:
        loglik_z = 0.0
    return NullCache(
        m_bar=m_bar,
        s_bar=s_bar,
        alpha0=float(np.mean(m_bar)),
        sigma2_0=st.sigma2_hat,
        z_mu0=st.z_mu.copy(),
        z_xi0=st.z_xi,
        Xt_mbar=dataset.X.T @ m_bar,
        sum_m=float(np.sum(m_bar)),
        sum_m2=float(m_bar @ m_bar),
        sum_s=float(np.sum(s_bar)),
        logq_z_sum=float(np.sum(logq)),
        entropy_z_sum=float(np.sum(ent)),
        loglik_z=loglik_z,
        null_result=result,
    )


def run_avb(
    dataset: Dataset,
    model: ModelIndex,
    cache: NullCache,
    config: FitConfig | None = None,
    crossproducts: CrossProducts | None = None,
    chol: SubmodelChol | None = None,
) -> VariationalState:
    """Refit only the regression block with every latent site frozen at the
    null-model moments.

    With (m, s) fixed, the coefficient means do not depend on q(sigma^2),
    and the remaining a/b recursion is a linear contraction whose fixed
    point is available in closed form, so no iteration is needed.
    """
    config = config or FitConfig()
    n = dataset.n
    pk = model.size
    g = config.g_value(n)
    delta = g / (1.0 + g)
    mu_alpha = cache.sum_m / n

    if pk > 0:
        if chol is None:
            if crossproducts is None:
                crossproducts = cross_products(dataset)
            chol = submodel_chol(crossproducts, model, config.ridge)
        Xtm_k = cache.Xt_mbar[chol.idx]
        mu_beta = delta * chol.solve(Xtm_k)
        Ginv = chol.solve(np.eye(pk))
        quad = float(np.sum((chol.chol @ mu_beta) ** 2))
        cross = float(mu_beta @ Xtm_k)
    else:
        mu_beta = np.zeros(0)
        Ginv = np.eye(0)
        quad = cross = 0.0

    fixed = dataset.family == "probit"
    if fixed:
        a = b = 1.0
        xi = 1.0
    else:
        a = 0.5 * (n + pk)
        ssr = cache.sum_m2 - 2.0 * mu_alpha * cache.sum_m + n * mu_alpha**2 - 2.0 * cross + quad
        b = 0.5 * (ssr + cache.sum_s + quad / g) * (n + pk) / (n - 1.0)
        if not np.isfinite(b) or b <= 0:
            raise NumericalError(f"frozen-latent refit produced invalid b={b}")
        xi = b / a

    return VariationalState(
        mu_alpha=mu_alpha,
        omega_alpha=xi / n,
        mu_beta=mu_beta,
        Omega_beta=delta * xi * Ginv,
        a=a,
        b=b,
        m=cache.m_bar,
        s=cache.s_bar,
        sigma2_fixed=fixed,
        z_mu=cache.z_mu0,
        z_xi=cache.z_xi0,
        latent_logq_sum=cache.logq_z_sum,
        latent_entropy_sum=cache.entropy_z_sum,
        latent_loglik_sum=cache.loglik_z,
    )


class EvidenceCache:
    """Memo table keyed by (mask bits, method, criterion).

    Inadmissible models are memoized too, as a None entry. An optional
    capacity turns the table into a crude LRU.
    """

    def __init__(self, max_entries: int | None = None):
        self._table: dict[tuple, EvidenceRecord | None] = {}
        self.max_entries = max_entries
        self.hits = 0
        self.misses = 0

    def get(self, key):
        if key in self._table:
            self.hits += 1
            return True, self._table[key]
        self.misses += 1
        return False, None

    def put(self, key, record):
        if self.max_entries is not None and len(self._table) >= self.max_entries:
            self._table.pop(next(iter(self._table)))
        self._table[key] = record

    def __len__(self):
        return len(self._table)


def evaluate_model(
    dataset: Dataset,
    model: ModelIndex,
    config: FitConfig | None = None,
    method: str = "vb",
    criterion: str = "vbc",
    prior: ModelPriorSpec | None = None,
    cache: NullCache | None = None,
    memo: EvidenceCache | None = None,
    warm: VariationalState | None = None,
    crossproducts: CrossProducts | None = None,
    return_state: bool = False,
) -> EvidenceRecord:
    """Fit ``model`` with the requested method, evaluate the requested
    criterion, and attach the model prior.

    Raises SingularModelError for inadmissible models (callers doing model
    search treat that as zero prior mass). Revisited models are served from
    the memo with iters reported as 0. With ``return_state`` the fitted
    state is returned alongside the record (None on a memo hit), which
    model-search loops use for warm starts.
    """
    if method not in METHODS:
        raise ParameterError(f"method must be one of {METHODS}, got {method!r}")
    if criterion not in CRITERIA:
        raise ParameterError(f"criterion must be one of {CRITERIA}, got {criterion!r}")
    config = config or FitConfig()
    prior = prior or ModelPriorSpec.from_mean_size(dataset.p, dataset.p / 2)

    key = (model.bits, method, criterion)
    if memo is not None:
        hit, rec = memo.get(key)
        if hit:
            if rec is None:
                raise SingularModelError(f"model {model.to_string()} is inadmissible")
            rec = replace(rec, iters=0, wall_time_ns=0)
            return (rec, None) if return_state else rec

    t0 = time.perf_counter_ns()
    if model.size + 1 > dataset.n:
        if memo is not None:
            memo.put(key, None)
        raise SingularModelError(
            f"model {model.to_string()} has more parameters than observations"
        )
    if crossproducts is None:
        crossproducts = cross_products(dataset)
    try:
        chol = submodel_chol(crossproducts, model, config.ridge) if model.size else None
    except SingularModelError:
        if memo is not None:
            memo.put(key, None)
        raise

    if method == "avb":
        if cache is None:
            cache = build_null_cache(dataset, config, crossproducts)
        state = run_avb(dataset, model, cache, config, crossproducts, chol)
        iters, converged = 1, True
    else:
        result = run_cavi(dataset, model, config, warm, crossproducts, chol)
        state, iters, converged = result.state, result.iters, result.converged

    if criterion == "vbc":
        value = log_vbc(state, dataset, model, config, crossproducts, chol)
    else:
        value = master_elbo(state, dataset, model, config, crossproducts, chol)

    record = EvidenceRecord(
        model=model,
        log_evidence=value,
        log_prior=log_model_prior(model, prior),
        criterion=criterion,
        method=method,
        iters=iters,
        converged=converged,
        mu_alpha=state.mu_alpha,
        mu_beta=np.asarray(state.mu_beta, dtype=np.float64).copy(),
        wall_time_ns=time.perf_counter_ns() - t0,
    )
    if memo is not None:
        memo.put(key, record)
    return (record, state) if return_state else record
