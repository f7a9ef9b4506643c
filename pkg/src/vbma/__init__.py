"""Bayesian variable selection and model averaging for latent Gaussian
regression models (probit, tobit, rounded counts, Poisson log-normal)
using mean-field variational inference, a plug-in evidence approximation,
a frozen-latent fast refit scheme, and stochastic model-space search."""

from ._kernels import BACKEND_NAME
from .cavi import FitConfig, FitResult, VariationalState, master_elbo, run_cavi, update_theta
from .data import CrossProducts, Dataset, cross_products, load_csv, prepare_dataset, submodel_chol
from .errors import DataError, NumericalError, ParameterError, SingularModelError, VbmaError
from .evidence import (
    EvidenceCache,
    EvidenceRecord,
    NullCache,
    build_null_cache,
    evaluate_model,
    log_vbc,
    run_avb,
)
from .explore import EnumerationTable, ExplorationTrace, Summary, enumerate_models, explore, summarize
from .links import (
    PlnSiteParams,
    TruncNormMoments,
    expected_loglik,
    trunc_norm_moments,
    update_z_pln,
    update_z_probit,
    update_z_star,
    update_z_tobit,
)
from .models import ModelIndex, ModelPriorSpec, Proposal, is_admissible, log_model_prior, propose
from .simulate import BETA_PRESETS, MetricsReport, SimDesign, SimTruth, brier, consistency_metrics, fit_metrics, simulate

__version__ = "0.1.0"

__all__ = [
    "BACKEND_NAME",
    "BETA_PRESETS",
    "CrossProducts",
    "DataError",
    "Dataset",
    "EnumerationTable",
    "EvidenceCache",
    "EvidenceRecord",
    "ExplorationTrace",
    "FitConfig",
    "FitResult",
    "MetricsReport",
    "ModelIndex",
    "ModelPriorSpec",
    "NullCache",
    "NumericalError",
    "ParameterError",
    "PlnSiteParams",
    "Proposal",
    "SimDesign",
    "SimTruth",
    "SingularModelError",
    "Summary",
    "TruncNormMoments",
    "VariationalState",
    "VbmaError",
    "brier",
    "build_null_cache",
    "consistency_metrics",
    "cross_products",
    "enumerate_models",
    "evaluate_model",
    "expected_loglik",
    "explore",
    "fit_metrics",
    "is_admissible",
    "load_csv",
    "log_model_prior",
    "log_vbc",
    "master_elbo",
    "prepare_dataset",
    "propose",
    "run_avb",
    "run_cavi",
    "simulate",
    "submodel_chol",
    "summarize",
    "trunc_norm_moments",
    "update_theta",
    "update_z_pln",
    "update_z_probit",
    "update_z_star",
    "update_z_tobit",
]
