"""Synthetic data generation and the accuracy/consistency metrics used by
the acceptance experiments.

Covariate rows are i.i.d. Gaussian with an AR-1 correlation structure;
the latent regression z = alpha + X beta + eps is pushed through the
family link. Each replicate draws from independent, reproducible
child streams of the design seed.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import toeplitz

from .cavi import VariationalState
from .data import Dataset, prepare_dataset
from .errors import DataError, ParameterError
from .models import ModelIndex

BETA_PRESETS = {
    "sparse": lambda p: tuple([0.5, -0.5, 0.25, -0.25] + [0.0] * (p - 4)),
    "dense": lambda p: tuple([0.5, -0.5, 0.25, -0.25] + [0.15] * (p - 4)),
}


@dataclass(frozen=True)
class SimDesign:
    family: str
    n: int
    p: int
    rho: float = 0.25
    beta_true: tuple = ()
    alpha_true: float = 0.0
    sigma2_true: float = 1.0
    y_L: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise ParameterError(f"rho must be in [0, 1), got {self.rho}")
        if self.p < 4 and not self.beta_true:
            raise ParameterError("presets need p >= 4; pass beta_true explicitly")
        if self.beta_true and len(self.beta_true) != self.p:
            raise ParameterError("beta_true length must equal p")
        if self.sigma2_true <= 0:
            raise ParameterError("sigma2_true must be positive")

    def beta(self) -> np.ndarray:
        if self.beta_true:
            return np.asarray(self.beta_true, dtype=np.float64)
        return np.asarray(BETA_PRESETS["sparse"](self.p))

    def truth_mask(self) -> ModelIndex:
        return ModelIndex.from_indices(np.where(self.beta() != 0.0)[0], self.p)

    def replicate(self, r: int) -> "SimDesign":
        """Design for replicate r, seeded from an independent child stream
        of the base seed so replicates are reproducible in isolation."""
        child = np.random.SeedSequence(self.seed, spawn_key=(r,)).generate_state(1)[0]
        return replace(self, seed=int(child))


@dataclass(frozen=True)
class SimTruth:
    design: SimDesign
    alpha: float
    beta: np.ndarray
    sigma2: float
    mask: ModelIndex


@dataclass
class MetricsReport:
    n: int
    rmse_alpha: float
    rmse_beta: float
    rmse_sigma2: float | None
    var_alpha: float
    var_beta: float
    var_sigma2: float | None
    brier: float | None = None
    true_model_top: bool | None = None
    wall_time_ns: int = 0


def _draw(design: SimDesign, rng_x, rng_eps, rng_link) -> tuple[np.ndarray, np.ndarray]:
    beta = design.beta()
    Sigma = toeplitz(design.rho ** np.arange(design.p))
    L = np.linalg.cholesky(Sigma)
    X = rng_x.standard_normal((design.n, design.p)) @ L.T
    sigma = 1.0 if design.family == "probit" else np.sqrt(design.sigma2_true)
    z = design.alpha_true + X @ beta + sigma * rng_eps.standard_normal(design.n)
    if design.family == "probit":
        y = (z > 0).astype(np.float64)
    elif design.family == "tobit":
        y = np.maximum(design.y_L, z)
    elif design.family == "star":
        y = np.floor(np.exp(z))
    elif design.family == "pln":
        y = rng_link.poisson(np.exp(z)).astype(np.float64)
    else:
        raise ParameterError(f"unknown family {design.family!r}")
    return X, y


def simulate(design: SimDesign) -> tuple[Dataset, SimTruth]:
    """Generate one dataset (columns centered) plus the recorded truth.

    A draw violating a posterior-existence precondition is retried once
    with an incremented seed, then the data error propagates.
    """
    ss = np.random.SeedSequence(design.seed)
    streams = [np.random.default_rng(c) for c in ss.spawn(3)]
    X, y = _draw(design, *streams)
    try:
        dataset = prepare_dataset(X, y, design.family, design.y_L if design.family == "tobit" else None)
    except DataError:
        retry = replace(design, seed=design.seed + 1)
        ss = np.random.SeedSequence(retry.seed)
        streams = [np.random.default_rng(c) for c in ss.spawn(3)]
        X, y = _draw(retry, *streams)
        dataset = prepare_dataset(X, y, design.family, design.y_L if design.family == "tobit" else None)
    truth = SimTruth(
        design=design,
        alpha=design.alpha_true,
        beta=design.beta(),
        sigma2=1.0 if design.family == "probit" else design.sigma2_true,
        mask=design.truth_mask(),
    )
    return dataset, truth


def brier(pips: np.ndarray, truth_mask: ModelIndex) -> float:
    """Mean squared error of inclusion probabilities against the true
    inclusion indicators."""
    pips = np.asarray(pips, dtype=np.float64)
    if pips.shape[0] != truth_mask.p_total:
        raise ParameterError("pips length must match the number of candidates")
    ind = np.zeros(truth_mask.p_total)
    ind[np.asarray(truth_mask.indices, dtype=np.intp)] = 1.0
    return float(np.mean((pips - ind) ** 2))


def fit_metrics(state: VariationalState, model: ModelIndex, truth: SimTruth, n: int) -> MetricsReport:
    """Parameter RMSEs against the truth plus mean posterior variances for
    one fitted model (excluded coefficients count as zero estimates)."""
    p = truth.beta.shape[0]
    beta_hat = np.zeros(p)
    idx = np.asarray(model.indices, dtype=np.intp)
    beta_hat[idx] = state.mu_beta
    rmse_beta = float(np.sqrt(np.mean((beta_hat - truth.beta) ** 2)))
    rmse_alpha = abs(state.mu_alpha - truth.alpha)
    var_beta = float(np.mean(np.diag(state.Omega_beta))) if model.size else 0.0
    if state.sigma2_fixed:
        rmse_sigma2 = var_sigma2 = None
    else:
        rmse_sigma2 = abs(state.sigma2_hat - truth.sigma2)
        a, b = state.a, state.b
        var_sigma2 = b * b / ((a - 1.0) ** 2 * (a - 2.0)) if a > 2.0 else float("inf")
    return MetricsReport(
        n=n,
        rmse_alpha=rmse_alpha,
        rmse_beta=rmse_beta,
        rmse_sigma2=rmse_sigma2,
        var_alpha=state.omega_alpha,
        var_beta=var_beta,
        var_sigma2=var_sigma2,
    )


def consistency_metrics(fits, truths) -> list[MetricsReport]:
    """Per-sample-size metrics for fits on growing datasets of one design.

    ``fits`` is a sequence of (state, model, n) triples aligned with
    ``truths`` (one truth per fit, or a single shared truth).
    """
    if isinstance(truths, SimTruth):
        truths = [truths] * len(fits)
    return [fit_metrics(st, mdl, tr, n) for (st, mdl, n), tr in zip(fits, truths)]
