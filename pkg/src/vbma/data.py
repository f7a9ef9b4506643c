"""Dataset preparation and per-model linear algebra.

Columns of the design matrix are centered once at load time; the full
cross-product matrix G = X'X is computed once and every candidate model
works on a row/column selection of it. The per-model factorization is a
plain Cholesky of the selected block, recomputed per model (an
update/downdate scheme is a known optimization point, not implemented).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, cholesky, lapack

from .errors import DataError, ParameterError, SingularModelError
from .models import RANK_RTOL, ModelIndex

FAMILIES = ("probit", "tobit", "star", "pln")

# Retry jitter applied to a failed per-model Cholesky, relative to the
# mean diagonal of the selected block.
CHOL_JITTER = 1e-8


@dataclass(frozen=True)
class Dataset:
    """Centered design matrix plus the family-tagged outcome vector."""

    X: np.ndarray
    y: np.ndarray
    family: str
    y_L: float | None = None
    column_means: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class CrossProducts:
    """Shared sufficient statistics: G = X'X (columns centered, so X'1 = 0)."""

    G: np.ndarray
    Xt_m: np.ndarray | None = None


def _validate_outcomes(y: np.ndarray, family: str, y_L: float | None) -> None:
    if family == "probit":
        if not np.isin(y, (0.0, 1.0)).all():
            raise DataError("probit outcomes must be 0/1")
        if np.all(y == y[0]):
            raise DataError("probit posterior does not exist: all outcomes equal")
    elif family == "tobit":
        if y_L is None:
            raise ParameterError("tobit requires a censoring bound y_L")
        if np.any(y < y_L):
            raise DataError("tobit outcomes must satisfy y >= y_L")
        if int(np.sum(y > y_L)) < 2:
            raise DataError(
                "tobit posterior does not exist: fewer than two uncensored observations"
            )
    elif family in ("star", "pln"):
        if np.any(y < 0) or np.any(y != np.floor(y)):
            raise DataError(f"{family} outcomes must be non-negative integers")
        if family == "star" and int(np.sum(y > 0)) < 2:
            raise DataError("star posterior does not exist: fewer than two positive counts")
    else:
        raise ParameterError(f"unknown family {family!r}; expected one of {FAMILIES}")


def prepare_dataset(
    raw_X: np.ndarray,
    y: np.ndarray,
    family: str,
    y_L: float | None = None,
) -> Dataset:
    """Center columns, record the subtracted means, and validate the
    family-specific outcome constraints (including posterior-existence
    preconditions)."""
    X = np.ascontiguousarray(raw_X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if X.ndim != 2:
        raise ParameterError("X must be a 2-D array")
    n, p = X.shape
    if n < 2:
        raise ParameterError("need at least 2 observations")
    if y.shape != (n,):
        raise ParameterError(f"y has shape {y.shape}, expected ({n},)")
    if not np.isfinite(X).all() or not np.isfinite(y).all():
        raise DataError("X and y must be finite with no missing values")

    means = X.mean(axis=0)
    Xc = X - means
    col_scale = np.abs(X).max(axis=0)
    if np.any(np.abs(Xc).max(axis=0) <= 1e-12 * np.maximum(col_scale, 1.0)):
        bad = np.where(np.abs(Xc).max(axis=0) <= 1e-12 * np.maximum(col_scale, 1.0))[0]
        raise DataError(f"constant column(s) {bad.tolist()}: cannot be centered meaningfully")

    _validate_outcomes(y, family, y_L)
    return Dataset(X=Xc, y=y, family=family, y_L=y_L, column_means=means)


def cross_products(dataset: Dataset) -> CrossProducts:
    """Dense G = X'X, computed once and reused by every model."""
    X = dataset.X
    G = X.T @ X
    return CrossProducts(G=0.5 * (G + G.T))


@dataclass
class SubmodelChol:
    """Cholesky factorization handle over G_k = X_k' X_k (+ ridge I)."""

    model: ModelIndex
    chol: np.ndarray | None = None  # upper factor; None for the null model
    _logdet: float = 0.0
    idx: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.intp))

    def solve(self, v: np.ndarray) -> np.ndarray:
        if self.chol is None:
            raise ParameterError("null model has no coefficient block to solve")
        return cho_solve((self.chol, False), v)

    @property
    def logdet(self) -> float:
        """log|G_k|; 0 by the empty-product convention for the null model."""
        return self._logdet


def selected_rank(G: np.ndarray) -> int:
    """Numerical rank of an SPD block by pivoted Cholesky: a column is
    dependent when its pivot drops below RANK_RTOL times the largest."""
    if G.shape[0] == 0:
        return 0
    tol = RANK_RTOL * max(float(np.max(np.diag(G))), 0.0)
    _, _, rank, _ = lapack.dpstrf(G, tol=tol, lower=1)
    return int(rank)


def submodel_chol(
    crossproducts: CrossProducts, model: ModelIndex, ridge: float = 0.0
) -> SubmodelChol:
    """Factor the selected block of G.

    Rank-deficient selections (relative pivot tolerance) raise the
    singularity error directly; a factorization that fails despite passing
    the rank check is retried once with a small relative jitter.
    """
    pk = model.size
    if pk == 0:
        return SubmodelChol(model=model)
    idx = np.asarray(model.indices, dtype=np.intp)
    Gk = crossproducts.G[np.ix_(idx, idx)]
    if selected_rank(Gk) < pk:
        raise SingularModelError(
            f"selected columns {model.to_string()} are numerically rank-deficient"
        )
    if ridge > 0.0:
        Gk = Gk + ridge * np.eye(pk)
    try:
        U = cholesky(Gk, lower=False)
    except np.linalg.LinAlgError:
        jitter = CHOL_JITTER * np.trace(Gk) / pk
        try:
            U = cholesky(Gk + jitter * np.eye(pk), lower=False)
        except np.linalg.LinAlgError as exc:
            raise SingularModelError(
                f"selected columns {model.to_string()} are numerically singular"
            ) from exc
    logdet = 2.0 * float(np.sum(np.log(np.diag(U))))
    return SubmodelChol(model=model, chol=U, _logdet=logdet, idx=idx)


def load_csv(path: str, outcome: str) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Read a UTF-8 CSV with a header row; ``outcome`` names the response
    column and every remaining numeric column is a candidate covariate.

    Returns (raw_X, y, covariate_names).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise DataError(f"{path}: empty file")
        rows = list(reader)
    if outcome not in header:
        raise ParameterError(f"outcome column {outcome!r} not found in {header}")
    y_col = header.index(outcome)
    x_cols = [j for j in range(len(header)) if j != y_col]
    try:
        data = np.array(rows, dtype=np.float64)
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric cell ({exc})") from exc
    if data.shape[1] != len(header):
        raise DataError(f"{path}: ragged rows")
    return data[:, x_cols], data[:, y_col], [header[j] for j in x_cols]
