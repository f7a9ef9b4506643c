"""Structured file outputs: evidence tables, traces, reports, manifests.

All floating-point values in machine-readable files are printed with 17
significant digits so a re-parse reproduces them exactly.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset
from .errors import ParameterError
from .explore import EnumerationTable, ExplorationTrace, Summary
from .models import ModelIndex

VERSION = "0.1.0"


def fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


@dataclass
class PhaseTimer:
    """Wall-clock bookkeeping per named phase; the manifest invariant is
    that phases account for essentially all of the run."""

    start_ns: int = field(default_factory=time.perf_counter_ns)
    start_unix: float = field(default_factory=time.time)
    phases: dict = field(default_factory=dict)

    @contextmanager
    def phase(self, name: str):
        t0 = time.perf_counter_ns()
        try:
            yield
        finally:
            self.phases[name] = self.phases.get(name, 0) + time.perf_counter_ns() - t0

    def total_ns(self) -> int:
        return time.perf_counter_ns() - self.start_ns


def dataset_fingerprint(dataset: Dataset) -> dict:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(dataset.X).tobytes())
    h.update(np.ascontiguousarray(dataset.y).tobytes())
    return {"n": dataset.n, "p": dataset.p, "sha256": h.hexdigest()}


def write_manifest(out_dir, command: str, config: dict, timer: PhaseTimer,
                   fingerprint: dict | None = None, seeds=None) -> Path:
    path = Path(out_dir) / "manifest.json"
    doc = {
        "command": command,
        "version": VERSION,
        "config": {k: (fmt(v) if isinstance(v, float) else v) for k, v in config.items()},
        "seeds": seeds,
        "start_unix": timer.start_unix,
        "end_unix": time.time(),
        "total_wall_ns": timer.total_ns(),
        "phase_wall_ns": dict(timer.phases),
        "dataset": fingerprint,
    }
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return path


EVIDENCE_COLUMNS = ["mask", "p_k", "log_evidence", "log_prior", "method",
                    "criterion", "iters", "wall_time_ns"]


def write_evidence_csv(path, records) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(EVIDENCE_COLUMNS)
        for r in records:
            w.writerow([
                r.model.to_string(), r.model.size, fmt(r.log_evidence), fmt(r.log_prior),
                r.method, r.criterion, r.iters, r.wall_time_ns,
            ])
    return path


def read_evidence_csv(path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ParameterError(f"{path}: no evidence rows")
    for r in rows:
        r["log_evidence"] = float(r["log_evidence"])
        r["log_prior"] = float(r["log_prior"])
    return rows


TRACE_COLUMNS = ["chain", "step", "mask", "log_evidence", "accepted"]


def write_trace_csv(path, traces: list[ExplorationTrace]) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for c, tr in enumerate(traces):
            for t, step in enumerate(tr.steps):
                w.writerow([c, t, step.model.to_string(), fmt(step.log_evidence),
                            int(step.accepted)])
    return path


def read_trace_csv(path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ParameterError(f"{path}: no trace rows")
    return rows


def _write_table(path, header, rows, fmt_kind: str) -> Path:
    path = Path(path)
    if fmt_kind == "csv":
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
    else:
        cells = [header] + [[str(c) for c in row] for row in rows]
        widths = [max(len(r[j]) for r in cells) for j in range(len(header))]
        with path.open("w", encoding="utf-8") as fh:
            for r in cells:
                fh.write("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() + "\n")
    return path


def emit_report(
    out_dir,
    summary: Summary,
    source=None,
    names: list[str] | None = None,
    top_k: int = 10,
    fmt_kind: str = "csv",
) -> list[Path]:
    """Write the per-covariate PIP/averaged-coefficient table, the top-K
    models, and the model-size posterior."""
    if fmt_kind not in ("csv", "table"):
        raise ParameterError(f"format must be csv or table, got {fmt_kind!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ext = "csv" if fmt_kind == "csv" else "txt"
    p = summary.pips.shape[0]
    names = names or [f"x{j + 1}" for j in range(p)]
    paths = []

    rows = [
        [names[j], fmt(summary.pips[j]), fmt(summary.beta_avg[j]),
         int(summary.median_probability_model.includes(j))]
        for j in range(p)
    ]
    paths.append(_write_table(out / f"pips.{ext}",
                              ["covariate", "pip", "beta_avg", "in_median_model"],
                              rows, fmt_kind))

    top_rows = []
    if isinstance(source, EnumerationTable):
        order = np.argsort([-r.log_evidence for r in source.records])
        for rank, i in enumerate(order[: max(top_k, 0)], start=1):
            r = source.records[i]
            top_rows.append([rank, r.model.to_string(), r.model.size, fmt(r.log_evidence),
                             fmt(r.log_prior), fmt(source.probabilities[i])])
        header = ["rank", "mask", "p_k", "log_evidence", "log_prior", "posterior_prob"]
    else:
        traces = [source] if isinstance(source, ExplorationTrace) else list(source or [])
        counts: dict[str, tuple[int, float]] = {}
        n_kept = 0
        for tr in traces:
            for step in tr.steps[tr.burn_in:]:
                key = step.model.to_string()
                c, _ = counts.get(key, (0, 0.0))
                counts[key] = (c + 1, step.log_evidence)
                n_kept += 1
        ranked = sorted(counts.items(), key=lambda kv: -kv[1][0])[: max(top_k, 0)]
        for rank, (mask, (c, ev)) in enumerate(ranked, start=1):
            top_rows.append([rank, mask, mask.count("1"), fmt(ev), fmt(c / max(n_kept, 1)), c])
        header = ["rank", "mask", "p_k", "log_evidence", "visit_freq", "visits"]
    paths.append(_write_table(out / f"top_models.{ext}", header, top_rows, fmt_kind))

    paths.append(_write_table(
        out / f"model_size.{ext}",
        ["size_mean", "size_sd", "n_models"],
        [[fmt(summary.size_mean), fmt(summary.size_sd), summary.n_models]],
        fmt_kind,
    ))
    return paths


def write_fit_report(path, state, model: ModelIndex, extras: dict) -> Path:
    """Flat key-value diagnostics file for one fitted model."""
    path = Path(path)
    lines = [("mask", model.to_string()), ("p_k", model.size),
             ("mu_alpha", fmt(state.mu_alpha)), ("omega_alpha", fmt(state.omega_alpha)),
             ("a", fmt(state.a)), ("b", fmt(state.b)),
             ("sigma2_fixed", int(state.sigma2_fixed))]
    for j, (cov, val) in enumerate(zip(model.indices, state.mu_beta)):
        lines.append((f"mu_beta_{cov}", fmt(val)))
        lines.append((f"omega_beta_{cov}", fmt(state.Omega_beta[j, j])))
    lines += [(k, fmt(v) if isinstance(v, float) else v) for k, v in extras.items()]
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["key", "value"])
        w.writerows(lines)
    return path


def write_dataset_csv(path, X: np.ndarray, y: np.ndarray, outcome: str = "y") -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([outcome] + [f"x{j + 1}" for j in range(X.shape[1])])
        for i in range(X.shape[0]):
            w.writerow([fmt(y[i])] + [fmt(v) for v in X[i]])
    return path
