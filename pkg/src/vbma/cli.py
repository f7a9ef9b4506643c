"""Command-line surface: simulate, fit, enumerate, explore, report.

Defaults mirror the library conventions: g equal to the sample size,
prior mean model size p/2, 10000 kept models after a burn-in of 2000,
tolerance 1e-6 with at most 10000 sweeps. A plain-text KEY=VALUE config
file can supply any long-option default; explicit flags win.

Exit codes: 0 ok, 2 usage/parameter, 3 data or precondition, 4 numerical.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cavi import FitConfig, master_elbo, run_cavi
from .data import cross_products, load_csv, prepare_dataset
from .errors import DataError, NumericalError, ParameterError, SingularModelError, VbmaError
from .evidence import EvidenceCache, build_null_cache, log_vbc
from .explore import enumerate_models, explore, summarize
from .io import (
    PhaseTimer,
    dataset_fingerprint,
    emit_report,
    read_evidence_csv,
    read_trace_csv,
    write_dataset_csv,
    write_evidence_csv,
    write_fit_report,
    write_manifest,
    write_trace_csv,
)
from .models import ModelIndex, ModelPriorSpec
from .simulate import BETA_PRESETS, SimDesign, simulate


def _add_data_opts(p):
    p.add_argument("--data", required=True, help="input CSV (header row, '.' decimals)")
    p.add_argument("--outcome", required=True, help="name of the outcome column")
    p.add_argument("--family", required=True, choices=["probit", "tobit", "star", "pln"])
    p.add_argument("--y-l", type=float, default=0.0, help="tobit censoring bound")


def _add_fit_opts(p):
    p.add_argument("--method", choices=["vb", "avb"], default="vb")
    p.add_argument("--criterion", choices=["vbc", "elbo"], default="vbc")
    p.add_argument("--g", type=float, default=None, help="g-prior scale (default: n)")
    p.add_argument("--prior-mean-size", type=float, default=None,
                   help="prior expected model size (default: p/2)")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=10000)


def build_parser() -> argparse.ArgumentParser:
    root = argparse.ArgumentParser(
        prog="vbma",
        description=__doc__,
        epilog="Any subcommand also accepts --config FILE (KEY=VALUE lines "
               "supplying option defaults; explicit flags win).",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    root.add_argument("--version", action="version", version=f"vbma {__version__}")
    sub = root.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic dataset")
    p.add_argument("--family", required=True, choices=["probit", "tobit", "star", "pln"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--rho", type=float, default=0.25)
    p.add_argument("--preset", choices=sorted(BETA_PRESETS), default="sparse")
    p.add_argument("--beta", default=None, help="comma-separated true coefficients")
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--y-l", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("fit", help="fit one model and write diagnostics")
    _add_data_opts(p)
    _add_fit_opts(p)
    p.add_argument("--model", default=None, help="mask string, e.g. 10100 (default: full)")
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("enumerate", help="evaluate every model (small p)")
    _add_data_opts(p)
    _add_fit_opts(p)
    p.add_argument("--enum-cap", type=int, default=20)
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("explore", help="Metropolis-Hastings model search")
    _add_data_opts(p)
    _add_fit_opts(p)
    p.add_argument("--keep", type=int, default=10000)
    p.add_argument("--burnin", type=int, default=2000)
    p.add_argument("--chains", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None,
                   help="chain fan-out threads (default: logical cores)")
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("report", help="re-emit report tables from saved outputs")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--evidence", default=None, help="evidence.csv from enumerate")
    src.add_argument("--trace", default=None, help="trace.csv from explore")
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--format", choices=["csv", "table"], default="csv")
    p.add_argument("--out-dir", required=True)
    return root


def _apply_config_file(argv):
    """Consume --config FILE from argv and splice the file's KEY=VALUE pairs
    in right after the subcommand, so explicit flags (parsed later) win."""
    if "--config" not in argv:
        return argv
    argv = list(argv)
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise ParameterError("--config requires a file path")
    path = Path(argv[i + 1])
    del argv[i:i + 2]
    if not path.exists():
        raise ParameterError(f"config file {path} not found")
    injected = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParameterError(f"config line {line!r} is not KEY=VALUE")
        key, value = line.split("=", 1)
        injected += [f"--{key.strip().replace('_', '-')}", value.strip()]
    if not argv:
        return injected
    return [argv[0]] + injected + argv[1:]


def _load_dataset(args):
    raw_X, y, names = load_csv(args.data, args.outcome)
    y_L = args.y_l if args.family == "tobit" else None
    return prepare_dataset(raw_X, y, args.family, y_L), names


def _fit_config(args) -> FitConfig:
    return FitConfig(g=args.g, tol=args.tol, max_iter=args.max_iter)


def _prior(args, p: int) -> ModelPriorSpec:
    p0 = args.prior_mean_size if args.prior_mean_size is not None else p / 2
    return ModelPriorSpec.from_mean_size(p, p0)


def _config_echo(args) -> dict:
    return {k: v for k, v in vars(args).items() if k not in ("command", "config")}


def cmd_simulate(args) -> int:
    timer = PhaseTimer()
    beta = tuple(float(v) for v in args.beta.split(",")) if args.beta else \
        BETA_PRESETS[args.preset](args.p)
    design = SimDesign(
        family=args.family, n=args.n, p=args.p, rho=args.rho, beta_true=beta,
        alpha_true=args.alpha, sigma2_true=args.sigma2, y_L=args.y_l, seed=args.seed,
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with timer.phase("simulate"):
        dataset, truth = simulate(design)
    with timer.phase("write"):
        raw_X = dataset.X + dataset.column_means
        write_dataset_csv(out / "data.csv", raw_X, dataset.y)
        (out / "truth.json").write_text(json.dumps({
            "family": design.family, "n": design.n, "p": design.p, "rho": design.rho,
            "alpha": truth.alpha, "beta": list(truth.beta), "sigma2": truth.sigma2,
            "y_L": design.y_L, "seed": design.seed, "mask": truth.mask.to_string(),
        }, indent=2) + "\n", encoding="utf-8")
        fp = dataset_fingerprint(dataset)
    write_manifest(out, "simulate", _config_echo(args), timer, fp, seeds=[args.seed])
    return 0


def cmd_fit(args) -> int:
    timer = PhaseTimer()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with timer.phase("prepare"):
        dataset, _ = _load_dataset(args)
        xp = cross_products(dataset)
        config = _fit_config(args)
        model = ModelIndex.from_string(args.model) if args.model else ModelIndex.full(dataset.p)
        if model.p_total != dataset.p:
            raise ParameterError(f"mask length {model.p_total} != p={dataset.p}")
    with timer.phase("fit"):
        if args.method == "avb":
            cache = build_null_cache(dataset, config, xp)
            from .evidence import run_avb

            state = run_avb(dataset, model, cache, config, xp)
            iters, converged = 1, True
        else:
            result = run_cavi(dataset, model, config, crossproducts=xp)
            state, iters, converged = result.state, result.iters, result.converged
        extras = {
            "method": args.method,
            "iters": iters,
            "converged": int(converged),
            "elbo": master_elbo(state, dataset, model, config, xp),
            "log_vbc": log_vbc(state, dataset, model, config, xp),
        }
    with timer.phase("write"):
        write_fit_report(out / "fit.csv", state, model, extras)
        fp = dataset_fingerprint(dataset)
    write_manifest(out, "fit", _config_echo(args), timer, fp)
    return 0


def cmd_enumerate(args) -> int:
    timer = PhaseTimer()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with timer.phase("prepare"):
        dataset, names = _load_dataset(args)
        config = _fit_config(args)
        prior = _prior(args, dataset.p)
    with timer.phase("null_cache"):
        cache = build_null_cache(dataset, config) if args.method == "avb" else None
    with timer.phase("evaluate"):
        table = enumerate_models(dataset, config, args.method, args.criterion,
                                 prior, args.enum_cap, cache=cache)
    with timer.phase("summarize"):
        summary = summarize(table)
    with timer.phase("write"):
        write_evidence_csv(out / "evidence.csv", table.records)
        emit_report(out, summary, table, names=names, top_k=args.top_k)
        fp = dataset_fingerprint(dataset)
    write_manifest(out, "enumerate", _config_echo(args), timer, fp)
    return 0


def cmd_explore(args) -> int:
    timer = PhaseTimer()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    threads = args.threads if args.threads is not None else (os.cpu_count() or 1)
    with timer.phase("prepare"):
        dataset, names = _load_dataset(args)
        config = _fit_config(args)
        prior = _prior(args, dataset.p)
        memo = EvidenceCache()
    with timer.phase("explore"):
        traces = explore(dataset, config, args.method, args.criterion, prior,
                         n_keep=args.keep, burn_in=args.burnin, seed=args.seed,
                         chains=args.chains, threads=threads, memo=memo)
    with timer.phase("summarize"):
        summary = summarize(traces)
    with timer.phase("write"):
        write_trace_csv(out / "trace.csv", traces)
        emit_report(out, summary, traces, names=names, top_k=args.top_k)
        fp = dataset_fingerprint(dataset)
    write_manifest(out, "explore", _config_echo(args), timer, fp,
                   seeds=[args.seed + c for c in range(args.chains)])
    return 0


def cmd_report(args) -> int:
    from .explore import Summary

    timer = PhaseTimer()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    top_k = args.top_k
    if args.evidence:
        rows = read_evidence_csv(args.evidence)
        p = len(rows[0]["mask"])
        log_post = np.array([r["log_evidence"] + r["log_prior"] for r in rows])
        probs = np.exp(log_post - np.logaddexp.reduce(log_post))
        pips = np.zeros(p)
        sizes = np.array([r["mask"].count("1") for r in rows], dtype=np.float64)
        for row, prob in zip(rows, probs):
            for j, c in enumerate(row["mask"]):
                if c == "1":
                    pips[j] += prob
        pips = np.clip(pips, 0.0, 1.0)
        size_mean = float(probs @ sizes)
        size_sd = float(np.sqrt(max(probs @ (sizes - size_mean) ** 2, 0.0)))
        best = rows[int(np.argmax([r["log_evidence"] for r in rows]))]["mask"]
        order = np.argsort([-r["log_evidence"] for r in rows])
        top_rows = [[rank, rows[i]["mask"], rows[i]["mask"].count("1"),
                     rows[i]["log_evidence"], rows[i]["log_prior"], probs[i]]
                    for rank, i in enumerate(order[:top_k], start=1)]
        n_models = len(rows)
    else:
        rows = read_trace_csv(args.trace)
        p = len(rows[0]["mask"])
        kept = rows  # every recorded step; burn-in handling is upstream
        pips = np.zeros(p)
        counts: dict[str, int] = {}
        sizes = []
        for r in kept:
            counts[r["mask"]] = counts.get(r["mask"], 0) + 1
            sizes.append(r["mask"].count("1"))
            for j, c in enumerate(r["mask"]):
                if c == "1":
                    pips[j] += 1.0
        pips /= len(kept)
        sizes = np.array(sizes, dtype=np.float64)
        size_mean, size_sd = float(sizes.mean()), float(sizes.std())
        best = max(kept, key=lambda r: float(r["log_evidence"]))["mask"]
        ranked = sorted(counts.items(), key=lambda kv: -kv[1])[:top_k]
        top_rows = [[rank, mask, mask.count("1"), "", c / len(kept), c]
                    for rank, (mask, c) in enumerate(ranked, start=1)]
        n_models = len(counts)

    summary = Summary(
        pips=pips,
        beta_avg=np.zeros(p),
        median_probability_model=ModelIndex.from_indices(np.where(pips > 0.5)[0], p),
        best_model=ModelIndex.from_string(best),
        size_mean=size_mean,
        size_sd=size_sd,
        n_models=n_models,
    )
    with timer.phase("write"):
        ext = "csv" if args.format == "csv" else "txt"
        from .io import _write_table

        _write_table(out / f"pips.{ext}", ["covariate", "pip", "in_median_model"],
                     [[f"x{j + 1}", f"{pips[j]:.17g}",
                       int(summary.median_probability_model.includes(j))] for j in range(p)],
                     args.format)
        header = (["rank", "mask", "p_k", "log_evidence", "log_prior", "posterior_prob"]
                  if args.evidence else
                  ["rank", "mask", "p_k", "log_evidence", "visit_freq", "visits"])
        _write_table(out / f"top_models.{ext}", header,
                     [[str(c) for c in row] for row in top_rows], args.format)
        _write_table(out / f"model_size.{ext}", ["size_mean", "size_sd", "n_models"],
                     [[f"{size_mean:.17g}", f"{size_sd:.17g}", n_models]], args.format)
        write_manifest(out, "report", _config_echo(args), timer)
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "enumerate": cmd_enumerate,
    "explore": cmd_explore,
    "report": cmd_report,
}


def run_cli(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config_file(argv)
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except ParameterError as exc:
        print(f"vbma: parameter error: {exc}", file=sys.stderr)
        return 2
    except (DataError, SingularModelError) as exc:
        print(f"vbma: data error: {exc}", file=sys.stderr)
        return 3
    except (NumericalError, FloatingPointError) as exc:
        print(f"vbma: numerical error: {exc}", file=sys.stderr)
        return 4
    except VbmaError as exc:
        print(f"vbma: error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
