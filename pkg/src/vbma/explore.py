"""Model-space enumeration and Metropolis-Hastings exploration, plus the
posterior summaries (inclusion probabilities, model-averaged coefficients,
median-probability model, size posterior) shared by both.

The chain records the current model at every iteration, accepted or not,
so visit frequencies are unbiased posterior estimates. Revisited models
are served from the shared evidence memo.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .cavi import FitConfig
from .data import Dataset, cross_products
from .errors import ParameterError, SingularModelError
from .evidence import EvidenceCache, EvidenceRecord, NullCache, build_null_cache, evaluate_model
from .models import ModelIndex, ModelPriorSpec, propose

ENUM_CAP = 20


@dataclass
class EnumerationTable:
    """Evidence records for every admissible mask with normalized
    posterior model probabilities."""

    records: list[EvidenceRecord]
    probabilities: np.ndarray
    p_total: int
    n_inadmissible: int = 0


@dataclass
class ChainStep:
    model: ModelIndex
    log_evidence: float
    accepted: bool


@dataclass
class ExplorationTrace:
    """Visited-model sequence (burn-in included) with accumulators over the
    kept portion."""

    steps: list[ChainStep]
    burn_in: int
    p_total: int
    seed: int
    pip_counts: np.ndarray = field(default_factory=lambda: np.zeros(0))
    beta_sums: np.ndarray = field(default_factory=lambda: np.zeros(0))
    size_sum: float = 0.0
    size_sqsum: float = 0.0
    n_kept: int = 0
    n_accepted: int = 0
    config: dict = field(default_factory=dict)


@dataclass
class Summary:
    """Posterior summary shared by enumeration and exploration."""

    pips: np.ndarray
    beta_avg: np.ndarray
    median_probability_model: ModelIndex
    best_model: ModelIndex
    size_mean: float
    size_sd: float
    n_models: int


def normalize_posteriors(records) -> np.ndarray:
    """Posterior model probabilities proportional to exp(log_evidence +
    log_prior), normalized through log-sum-exp."""
    log_post = np.array([r.log_posterior_unnorm for r in records])
    return np.exp(log_post - logsumexp(log_post))


def mh_log_alpha(current: EvidenceRecord, proposed: EvidenceRecord, proposal) -> float:
    """Log Metropolis-Hastings acceptance ratio for a proposed move,
    including the forward/reverse proposal correction."""
    return (
        proposed.log_posterior_unnorm + proposal.log_rev
        - current.log_posterior_unnorm - proposal.log_fwd
    )


def enumerate_models(
    dataset: Dataset,
    config: FitConfig | None = None,
    method: str = "vb",
    criterion: str = "vbc",
    prior: ModelPriorSpec | None = None,
    enum_cap: int = ENUM_CAP,
    cache: NullCache | None = None,
    memo: EvidenceCache | None = None,
    warm_start: bool = True,
) -> EnumerationTable:
    """Evaluate every admissible mask and normalize posterior model
    probabilities by log-sum-exp. Inadmissible masks carry zero mass."""
    p = dataset.p
    if p > enum_cap:
        raise ParameterError(
            f"p={p} exceeds the enumeration cap {enum_cap}; use explore() instead"
        )
    config = config or FitConfig()
    prior = prior or ModelPriorSpec.from_mean_size(p, p / 2)
    xp = cross_products(dataset)
    if method == "avb" and cache is None:
        cache = build_null_cache(dataset, config, xp)

    records: list[EvidenceRecord] = []
    n_bad = 0
    warm = None
    for bits in range(1 << p):
        model = ModelIndex(bits, p)
        try:
            rec, state = evaluate_model(
                dataset, model, config, method, criterion, prior,
                cache=cache, memo=memo, warm=warm if warm_start else None,
                crossproducts=xp, return_state=True,
            )
        except SingularModelError:
            n_bad += 1
            continue
        if state is not None and method == "vb":
            warm = state
        records.append(rec)

    return EnumerationTable(
        records=records,
        probabilities=normalize_posteriors(records),
        p_total=p,
        n_inadmissible=n_bad,
    )


def _explore_chain(
    dataset: Dataset,
    config: FitConfig,
    method: str,
    criterion: str,
    prior: ModelPriorSpec,
    n_keep: int,
    burn_in: int,
    seed: int,
    chain_id: int,
    init: ModelIndex,
    cache: NullCache | None,
    memo: EvidenceCache,
    xp,
) -> ExplorationTrace:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chain_id,)))
    p = dataset.p

    def evaluate(model, warm):
        return evaluate_model(
            dataset, model, config, method, criterion, prior,
            cache=cache, memo=memo, warm=warm, crossproducts=xp, return_state=True,
        )

    cur_rec, cur_state = evaluate(init, None)
    warm = cur_state
    steps: list[ChainStep] = []
    pip_counts = np.zeros(p)
    beta_sums = np.zeros(p)
    size_sum = size_sqsum = 0.0
    n_accepted = 0

    total = burn_in + n_keep
    for t in range(total):
        prop = propose(cur_rec.model, rng)
        accepted = False
        try:
            prop_rec, prop_state = evaluate(prop.target, warm)
        except SingularModelError:
            prop_rec = None
        if prop_rec is not None:
            if prop_state is not None and method == "vb":
                warm = prop_state
            log_alpha = mh_log_alpha(cur_rec, prop_rec, prop)
            if log_alpha >= 0.0 or np.log(rng.uniform()) < log_alpha:
                cur_rec = prop_rec
                accepted = True
                n_accepted += 1
        steps.append(ChainStep(cur_rec.model, cur_rec.log_evidence, accepted))
        if t >= burn_in:
            idx = np.asarray(cur_rec.model.indices, dtype=np.intp)
            pip_counts[idx] += 1.0
            beta_sums[idx] += cur_rec.mu_beta
            size_sum += cur_rec.model.size
            size_sqsum += cur_rec.model.size ** 2

    return ExplorationTrace(
        steps=steps,
        burn_in=burn_in,
        p_total=p,
        seed=seed,
        pip_counts=pip_counts,
        beta_sums=beta_sums,
        size_sum=size_sum,
        size_sqsum=size_sqsum,
        n_kept=n_keep,
        n_accepted=n_accepted,
        config={
            "method": method, "criterion": criterion, "n_keep": n_keep,
            "burn_in": burn_in, "chain_id": chain_id,
        },
    )


def explore(
    dataset: Dataset,
    config: FitConfig | None = None,
    method: str = "vb",
    criterion: str = "vbc",
    prior: ModelPriorSpec | None = None,
    n_keep: int = 10000,
    burn_in: int = 2000,
    seed: int = 0,
    chains: int = 1,
    init: ModelIndex | None = None,
    threads: int = 1,
    memo: EvidenceCache | None = None,
) -> list[ExplorationTrace]:
    """Metropolis-Hastings over masks with the approximate evidence as the
    target; returns one trace per chain (chains share the evidence memo)."""
    config = config or FitConfig()
    prior = prior or ModelPriorSpec.from_mean_size(dataset.p, dataset.p / 2)
    init = init or ModelIndex.null(dataset.p)
    memo = memo if memo is not None else EvidenceCache()
    xp = cross_products(dataset)
    cache = build_null_cache(dataset, config, xp) if method == "avb" else None

    args = [
        (dataset, config, method, criterion, prior, n_keep, burn_in, seed, c, init, cache, memo, xp)
        for c in range(chains)
    ]
    if threads > 1 and chains > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            traces = list(pool.map(lambda a: _explore_chain(*a), args))
    else:
        traces = [_explore_chain(*a) for a in args]
    return traces


def _median_probability_model(pips: np.ndarray) -> ModelIndex:
    # ties at exactly 0.5 resolve to exclusion
    return ModelIndex.from_indices(np.where(pips > 0.5)[0], pips.shape[0])


def summarize(source, dataset: Dataset | None = None) -> Summary:
    """Posterior summaries from an EnumerationTable, a single
    ExplorationTrace, or a list of traces (pooled after per-chain burn-in)."""
    if isinstance(source, EnumerationTable):
        p = source.p_total
        pips = np.zeros(p)
        beta_avg = np.zeros(p)
        sizes = np.array([r.model.size for r in source.records], dtype=np.float64)
        for rec, prob in zip(source.records, source.probabilities):
            idx = np.asarray(rec.model.indices, dtype=np.intp)
            pips[idx] += prob
            beta_avg[idx] += prob * rec.mu_beta
        size_mean = float(source.probabilities @ sizes)
        size_var = float(source.probabilities @ (sizes - size_mean) ** 2)
        best = max(source.records, key=lambda r: r.log_evidence).model
        n_models = len(source.records)
    else:
        traces = [source] if isinstance(source, ExplorationTrace) else list(source)
        if not traces:
            raise ParameterError("no traces to summarize")
        p = traces[0].p_total
        n_kept = sum(t.n_kept for t in traces)
        pips = sum(t.pip_counts for t in traces) / n_kept
        beta_avg = sum(t.beta_sums for t in traces) / n_kept
        size_mean = sum(t.size_sum for t in traces) / n_kept
        size_var = max(sum(t.size_sqsum for t in traces) / n_kept - size_mean**2, 0.0)
        kept = [s for t in traces for s in t.steps[t.burn_in:]]
        best = max(kept, key=lambda s: s.log_evidence).model
        n_models = len({s.model.bits for s in kept})

    return Summary(
        pips=np.clip(pips, 0.0, 1.0),
        beta_avg=beta_avg,
        median_probability_model=_median_probability_model(pips),
        best_model=best,
        size_mean=size_mean,
        size_sd=float(np.sqrt(size_var)),
        n_models=n_models,
    )
