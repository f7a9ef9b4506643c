"""Model space: inclusion bitmasks, the beta-binomial model prior, and
add-delete-swap proposals with exact forward/reverse probabilities.

A model is a subset of the p candidate covariates; the intercept is
implicit and never part of the mask. Masks are stored as a single 64-bit
integer word (hence p <= 64; larger spaces would need a multi-word mask,
which is the one documented extension point of this module).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from .errors import ParameterError

MAX_P = 64

# Relative pivot threshold below which a selected column is declared
# linearly dependent on the previous ones.
RANK_RTOL = 1e-10


@dataclass(frozen=True)
class ModelIndex:
    """One candidate model, identified by its covariate-inclusion bitmask.

    Bit j of ``bits`` is set iff covariate j is included; ``p_total`` is the
    number of candidate covariates.
    """

    bits: int
    p_total: int

    def __post_init__(self):
        if not 1 <= self.p_total <= MAX_P:
            raise ParameterError(f"p_total must be in [1, {MAX_P}], got {self.p_total}")
        if not 0 <= self.bits < (1 << self.p_total):
            raise ParameterError("mask has bits outside [0, p_total)")

    @property
    def size(self) -> int:
        """Number of included covariates (p_k)."""
        return self.bits.bit_count()

    @property
    def indices(self) -> tuple[int, ...]:
        """Included covariate indices, ascending."""
        return tuple(j for j in range(self.p_total) if self.bits >> j & 1)

    def includes(self, j: int) -> bool:
        return bool(self.bits >> j & 1)

    def add(self, j: int) -> "ModelIndex":
        return ModelIndex(self.bits | (1 << j), self.p_total)

    def drop(self, j: int) -> "ModelIndex":
        return ModelIndex(self.bits & ~(1 << j), self.p_total)

    def to_string(self) -> str:
        """Canonical '0'/'1' string, leftmost character = covariate 0."""
        return "".join("1" if self.bits >> j & 1 else "0" for j in range(self.p_total))

    @classmethod
    def from_string(cls, s: str) -> "ModelIndex":
        if set(s) - {"0", "1"}:
            raise ParameterError(f"mask string must contain only 0/1, got {s!r}")
        bits = 0
        for j, c in enumerate(s):
            if c == "1":
                bits |= 1 << j
        return cls(bits, len(s))

    @classmethod
    def from_indices(cls, indices, p_total: int) -> "ModelIndex":
        bits = 0
        for j in indices:
            if bits >> j & 1:
                raise ParameterError(f"duplicate covariate index {j}")
            bits |= 1 << int(j)
        return cls(bits, p_total)

    @classmethod
    def null(cls, p_total: int) -> "ModelIndex":
        return cls(0, p_total)

    @classmethod
    def full(cls, p_total: int) -> "ModelIndex":
        return cls((1 << p_total) - 1, p_total)


@dataclass(frozen=True)
class ModelPriorSpec:
    """Beta-binomial model prior: Beta(u, v) on the common inclusion
    probability of each covariate."""

    u: float = 1.0
    v: float = 1.0

    def __post_init__(self):
        if not (self.u > 0 and self.v > 0):
            raise ParameterError(f"u and v must be positive, got u={self.u}, v={self.v}")

    @classmethod
    def from_mean_size(cls, p_total: int, p0: float) -> "ModelPriorSpec":
        """Prior with u=1 calibrated so the prior expected model size is p0."""
        if not 0 < p0 <= p_total:
            raise ParameterError(f"p0 must be in (0, {p_total}], got {p0}")
        if p0 == p_total:
            raise ParameterError("p0 = p gives v = 0; choose p0 < p")
        return cls(u=1.0, v=(p_total - p0) / p0)


@dataclass(frozen=True)
class Proposal:
    """One add/delete/swap move with its forward and reverse log
    probabilities under the two-stage uniform proposal scheme."""

    target: ModelIndex
    log_fwd: float
    log_rev: float
    move_kind: str


def log_model_prior(model: ModelIndex, spec: ModelPriorSpec) -> float:
    """Log beta-binomial prior probability of ``model``.

    Computed through log-gamma for stability; admissibility is handled
    separately by callers (inadmissible models get -inf added outside).
    """
    u, v = spec.u, spec.v
    p, pk = model.p_total, model.size
    return (
        math.lgamma(u + v)
        - math.lgamma(u)
        - math.lgamma(v)
        + math.lgamma(u + pk)
        + math.lgamma(v + p - pk)
        - math.lgamma(u + v + p)
    )


def _feasible_kinds(model: ModelIndex) -> list[str]:
    p, pk = model.p_total, model.size
    kinds = []
    if pk < p:
        kinds.append("add")
    if pk > 0:
        kinds.append("delete")
    if 0 < pk < p:
        kinds.append("swap")
    return kinds


def _log_move_prob(source: ModelIndex, kind: str) -> float:
    """Log probability of proposing a *specific* target from ``source``
    via ``kind``: uniform over feasible kinds, then uniform over eligible
    variable choices within the kind."""
    p, pk = source.p_total, source.size
    n_kinds = len(_feasible_kinds(source))
    if kind == "add":
        n_choices = p - pk
    elif kind == "delete":
        n_choices = pk
    else:  # swap: one included out, one excluded in
        n_choices = pk * (p - pk)
    return -math.log(n_kinds) - math.log(n_choices)


def propose(source: ModelIndex, rng: np.random.Generator) -> Proposal:
    """Draw one add-delete-swap proposal from ``source``.

    log_fwd is the probability of this exact draw; log_rev is the
    probability of the inverse move from the target, so the pair plugs
    directly into the Metropolis-Hastings ratio.
    """
    kinds = _feasible_kinds(source)
    kind = kinds[rng.integers(len(kinds))]
    included = source.indices
    excluded = tuple(j for j in range(source.p_total) if not source.includes(j))

    if kind == "add":
        j = excluded[rng.integers(len(excluded))]
        target = source.add(j)
        rev_kind = "delete"
    elif kind == "delete":
        j = included[rng.integers(len(included))]
        target = source.drop(j)
        rev_kind = "add"
    else:
        j_out = included[rng.integers(len(included))]
        j_in = excluded[rng.integers(len(excluded))]
        target = source.drop(j_out).add(j_in)
        rev_kind = "swap"

    return Proposal(
        target=target,
        log_fwd=_log_move_prob(source, kind),
        log_rev=_log_move_prob(target, rev_kind),
        move_kind=kind,
    )


def is_admissible(model: ModelIndex, dataset) -> bool:
    """True iff [1 | X_k] has full column rank on ``dataset``.

    Columns are centered, so the intercept is orthogonal to X_k and the
    check reduces to the rank of X_k itself, established through a pivoted
    Cholesky of G_k with a relative pivot threshold. Models with more
    parameters than observations are always inadmissible.
    """
    pk = model.size
    if pk + 1 > dataset.n:
        return False
    if pk == 0:
        return True
    idx = np.asarray(model.indices)
    Xk = dataset.X[:, idx]
    Gk = Xk.T @ Xk
    _, _, rank, _ = lapack.dpstrf(Gk, tol=RANK_RTOL * max(np.max(np.diag(Gk)), 0.0), lower=1)
    return int(rank) == pk
