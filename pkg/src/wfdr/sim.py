"""Declarative simulation studies and the replication engine.

Every replication of every sweep point draws its batch from an independent
PCG64 stream keyed by ``SeedSequence([master_seed, sweep_index, rep])``
(child 0 generates the batch, child 1 drives the oracle's randomization),
and all configured procedures are applied to that same batch.  Results are
collected by (sweep_index, rep) so the summary does not depend on how
replications were scheduled across worker processes.
"""
from __future__ import annotations

import copy
import csv
import json
import math
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import __version__
from .exceptions import ConfigurationError, WFDRError
from .lfdr import LfdrOptions, estimate_lfdr, oracle_lfdr, pvalues
from .metrics import AggregateMetrics, aggregate, replication_metrics, top_k_true_positives
from .model import MixtureModel, GroupSpec, GaussianComponent, WeightScheme, generate_batch
from .procedures import PROCEDURES, apply_procedure

__all__ = [
    "Sweep",
    "ExperimentConfig",
    "SummaryRow",
    "ReplicationSummary",
    "ReplicationError",
    "replication_seeds",
    "run_replication",
    "run_experiment",
    "builtin_configs",
    "get_builtin",
    "load_config",
    "write_outputs",
]

CSV_COLUMNS = ("sweep_param", "sweep_value", "procedure", "wfdr_bh", "wfdr_ratio", "etp",
               "etp_unweighted", "se_wfdr", "se_etp", "reps")
EXTRA_COLUMNS = ("se_wfdr_bh", "se_etp_unweighted", "mean_rejects")


class ReplicationError(WFDRError, RuntimeError):
    """A replication failed; carries the sweep value and replication index."""

    def __init__(self, message, sweep_value=None, rep=None):
        super().__init__(message)
        self.sweep_value = sweep_value
        self.rep = rep


@dataclass(frozen=True)
class Sweep:
    """One swept parameter, addressed by a dotted path into the config's
    dict form.  ``*`` matches every list element, e.g.
    ``model.groups.*.non_null.mean``."""

    param: str
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        if not self.values:
            raise ConfigurationError("a sweep needs at least one value")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    model: MixtureModel
    weights: WeightScheme = field(default_factory=WeightScheme)
    alpha: float = 0.1
    procedures: tuple = ("dd",)
    reps: int = 200
    master_seed: int = 0
    lfdr_source: str = "estimated"
    lfdr_options: LfdrOptions = field(default_factory=LfdrOptions)
    pvalue_tail: str = "two-sided"
    top_k: tuple = ()
    sweep: Sweep | None = None

    def __post_init__(self):
        object.__setattr__(self, "procedures", tuple(self.procedures))
        object.__setattr__(self, "top_k", tuple(int(k) for k in self.top_k))
        if int(self.reps) != self.reps or self.reps < 1:
            raise ConfigurationError(f"reps must be a positive integer, got {self.reps!r}")
        for p in self.procedures:
            if p not in PROCEDURES:
                raise ConfigurationError(f"unknown procedure {p!r}; expected one of {PROCEDURES}")
        if not self.procedures:
            raise ConfigurationError("no procedures configured")
        if self.lfdr_source not in ("oracle", "estimated"):
            raise ConfigurationError(f"lfdr_source must be 'oracle' or 'estimated', got {self.lfdr_source!r}")
        needs_truth_model = self.lfdr_source == "oracle" or {"oracle", "pfer-oracle"} & set(self.procedures)
        if needs_truth_model and self.weights.kind == "covariate-power":
            raise ConfigurationError(
                "oracle Lfdr is unavailable under covariate-power weights "
                "(per-hypothesis non-null probabilities are not part of the model)")
        if self.pvalue_tail not in ("upper", "lower", "two-sided"):
            raise ConfigurationError(f"bad pvalue_tail {self.pvalue_tail!r}")

    @property
    def sweep_values(self):
        return self.sweep.values if self.sweep else (None,)

    def to_dict(self):
        return {
            "name": self.name,
            "model": self.model.to_dict(),
            "weights": self.weights.to_dict(),
            "alpha": self.alpha,
            "procedures": list(self.procedures),
            "reps": self.reps,
            "master_seed": self.master_seed,
            "lfdr_source": self.lfdr_source,
            "lfdr_options": self.lfdr_options.to_dict(),
            "pvalue_tail": self.pvalue_tail,
            "top_k": list(self.top_k),
            "sweep": None if self.sweep is None else {"param": self.sweep.param, "values": list(self.sweep.values)},
        }

    @classmethod
    def from_dict(cls, d: Mapping):
        try:
            sweep = d.get("sweep")
            return cls(
                name=str(d["name"]),
                model=MixtureModel.from_dict(d["model"]),
                weights=WeightScheme.from_dict(d.get("weights", {})),
                alpha=float(d.get("alpha", 0.1)),
                procedures=tuple(d.get("procedures", ("dd",))),
                reps=int(d.get("reps", 200)),
                master_seed=int(d.get("master_seed", 0)),
                lfdr_source=d.get("lfdr_source", "estimated"),
                lfdr_options=LfdrOptions.from_dict(d.get("lfdr_options", {})),
                pvalue_tail=d.get("pvalue_tail", "two-sided"),
                top_k=tuple(d.get("top_k", ())),
                sweep=None if not sweep else Sweep(sweep["param"], tuple(sweep["values"])),
            )
        except KeyError as exc:
            raise ConfigurationError(f"config is missing field {exc}") from exc
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigurationError):
                raise
            raise ConfigurationError(f"bad config: {exc}") from exc

    def replace(self, **changes):
        d = self.to_dict()
        d.update(changes)
        return ExperimentConfig.from_dict(d)

    def at(self, value):
        """The concrete (unswept) config for one sweep value."""
        if self.sweep is None:
            return self
        d = self.to_dict()
        _set_path(d, self.sweep.param.split("."), value)
        d["sweep"] = None
        return ExperimentConfig.from_dict(d)


def _set_path(node, parts, value):
    head, rest = parts[0], parts[1:]
    if isinstance(node, list):
        keys = range(len(node)) if head == "*" else [int(head)]
    elif isinstance(node, dict):
        if head not in node and rest:
            raise ConfigurationError(f"sweep path component {head!r} not found")
        keys = [head]
    else:
        raise ConfigurationError(f"cannot descend into {node!r} at {head!r}")
    for key in keys:
        try:
            if rest:
                _set_path(node[key], rest, value)
            else:
                node[key] = value
        except (IndexError, KeyError):
            raise ConfigurationError(f"sweep path component {head!r} not found") from None


@dataclass(frozen=True)
class SummaryRow:
    sweep_value: object
    procedure: str
    metrics: AggregateMetrics
    top_k: Mapping = field(default_factory=dict)
    top_k_se: Mapping = field(default_factory=dict)


@dataclass(frozen=True)
class ReplicationSummary:
    config: ExperimentConfig
    rows: tuple
    wall_time: float = 0.0

    def get(self, procedure, sweep_value=None) -> AggregateMetrics:
        return self.row(procedure, sweep_value).metrics

    def row(self, procedure, sweep_value=None) -> SummaryRow:
        for r in self.rows:
            if r.procedure == procedure and (sweep_value is None or _same(r.sweep_value, sweep_value)):
                return r
        raise KeyError((procedure, sweep_value))

    def series(self, procedure):
        return [r for r in self.rows if r.procedure == procedure]

    def to_records(self):
        sweep_param = self.config.sweep.param if self.config.sweep else ""
        recs = []
        for r in self.rows:
            m = r.metrics
            rec = {
                "sweep_param": sweep_param,
                "sweep_value": "" if r.sweep_value is None else r.sweep_value,
                "procedure": r.procedure,
                "wfdr_bh": m.wfdr_bh,
                "wfdr_ratio": m.wfdr_ratio,
                "etp": m.etp,
                "etp_unweighted": m.etp_unweighted,
                "se_wfdr": m.se_wfdr_ratio,
                "se_etp": m.se_etp,
                "reps": m.reps,
                "se_wfdr_bh": m.se_wfdr_bh,
                "se_etp_unweighted": m.se_etp_unweighted,
                "mean_rejects": m.mean_rejects,
            }
            for k in self.config.top_k:
                rec[f"top{k}_tp"] = r.top_k.get(k, float("nan"))
                rec[f"top{k}_tp_se"] = r.top_k_se.get(k, float("nan"))
            recs.append(rec)
        return recs

    def to_csv(self, path):
        cols = list(CSV_COLUMNS) + list(EXTRA_COLUMNS)
        cols += [c for k in self.config.top_k for c in (f"top{k}_tp", f"top{k}_tp_se")]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=cols)
            w.writeheader()
            for rec in self.to_records():
                w.writerow(rec)


def _same(a, b):
    if isinstance(a, float) or isinstance(b, float):
        try:
            return math.isclose(float(a), float(b), rel_tol=1e-12, abs_tol=1e-12)
        except (TypeError, ValueError):
            return False
    return a == b


def replication_seeds(master_seed, sweep_index, rep):
    """(batch seed, randomization seed) for one replication."""
    ss = np.random.SeedSequence([int(master_seed), int(sweep_index), int(rep)])
    batch_ss, rand_ss = ss.spawn(2)
    return batch_ss, rand_ss


def run_replication(config: ExperimentConfig, sweep_index: int, rep: int):
    """Run every configured procedure on one simulated batch.

    ``config`` must be the concrete (unswept) config for this sweep point.
    Returns ``{procedure: (ReplicationMetrics, {k: top-k true positives})}``.
    """
    batch_seed, rand_seed = replication_seeds(config.master_seed, sweep_index, rep)
    batch = generate_batch(config.model, config.weights, batch_seed)
    procs = config.procedures
    oracle = None
    if config.lfdr_source == "oracle" or "oracle" in procs:
        oracle = oracle_lfdr(config.model, batch)
    if config.lfdr_source == "oracle":
        lfdr = oracle
    elif set(procs) & {"dd", "dd-proportional", "az", "wpo"}:
        lfdr = estimate_lfdr(batch, config.lfdr_options)
    else:
        lfdr = None
    pv = None
    if set(procs) & {"bh95", "bh97"}:
        pv = np.empty(batch.m)
        for gid in batch.group_ids:
            idx = batch.group == gid
            pv[idx] = pvalues(batch.x[idx], config.pvalue_tail, config.lfdr_options.null_for(gid))
    out = {}
    for name in procs:
        d = apply_procedure(name, batch, config.alpha, lfdr, pvals=pv, oracle=oracle,
                            model=config.model, seed=rand_seed)
        tops = {k: top_k_true_positives(d, batch, k) for k in config.top_k if k <= batch.m}
        out[name] = (replication_metrics(d, batch), tops)
    return out


def _run_chunk(config_dict, jobs):
    results = []
    cache = {}
    base = ExperimentConfig.from_dict(config_dict)
    for sweep_index, rep in jobs:
        if sweep_index not in cache:
            cache[sweep_index] = base.at(base.sweep_values[sweep_index])
        cfg = cache[sweep_index]
        try:
            results.append(((sweep_index, rep), run_replication(cfg, sweep_index, rep)))
        except WFDRError as exc:
            raise ReplicationError(
                f"replication {rep} at {base.sweep.param if base.sweep else 'setting'}="
                f"{base.sweep_values[sweep_index]!r} failed: {exc}",
                sweep_value=base.sweep_values[sweep_index], rep=rep) from exc
    return results


def default_threads():
    env = os.environ.get("WFDR_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigurationError(f"WFDR_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def run_experiment(config: ExperimentConfig, threads: int | None = None) -> ReplicationSummary:
    """Run all replications of all sweep points and aggregate per
    (sweep value, procedure).  Deterministic given the config; ``threads=1``
    runs serially in-process."""
    threads = default_threads() if threads is None else max(1, int(threads))
    jobs = [(s, r) for s in range(len(config.sweep_values)) for r in range(config.reps)]
    start = time.perf_counter()
    if threads == 1 or len(jobs) < 2:
        results = _run_chunk(config.to_dict(), jobs)
    else:
        n_chunks = min(len(jobs), threads * 4)
        chunks = [jobs[i::n_chunks] for i in range(n_chunks)]
        results = []
        cfg = config.to_dict()
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for part in pool.map(_run_chunk, [cfg] * len(chunks), chunks):
                results.extend(part)
    by_key = dict(results)

    rows = []
    for s, value in enumerate(config.sweep_values):
        for name in config.procedures:
            per_rep = [by_key[(s, r)][name] for r in range(config.reps)]
            tops, tops_se = {}, {}
            for k in config.top_k:
                vals = np.array([t[k] for _, t in per_rep if k in t], dtype=float)
                if vals.size:
                    tops[k] = math.fsum(vals) / vals.size
                    tops_se[k] = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
            rows.append(SummaryRow(value, name, aggregate([m for m, _ in per_rep]), tops, tops_se))
    return ReplicationSummary(config, tuple(rows), time.perf_counter() - start)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigurationError("config must be a JSON object")
    return ExperimentConfig.from_dict(data)


def write_outputs(summary: ReplicationSummary, out_dir, threads=None):
    """Write ``<name>.csv`` and ``<name>.manifest.json`` into ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    name = summary.config.name
    csv_path = os.path.join(out_dir, f"{name}.csv")
    summary.to_csv(csv_path)
    manifest = {
        "config": summary.config.to_dict(),
        "master_seed": summary.config.master_seed,
        "wall_time_seconds": round(summary.wall_time, 3),
        "version": f"wfdr {__version__}",
        "python": platform.python_version(),
        "numpy": np.__version__,
        "threads": threads,
        "rng": "numpy PCG64 via SeedSequence([master_seed, sweep_index, rep])",
        "rows": len(summary.rows),
    }
    man_path = os.path.join(out_dir, f"{name}.manifest.json")
    with open(man_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
    return csv_path, man_path


def _two_groups(mu, p=(0.2, 0.2), mu2=None):
    mu2 = mu if mu2 is None else mu2
    return MixtureModel((
        GroupSpec(3000, p[0], non_null=GaussianComponent(mu, 1.0)),
        GroupSpec(1500, p[1], non_null=GaussianComponent(mu2, 1.0)),
    ))


MU_PATH = "model.groups.*.non_null.mean"


def builtin_configs(reps=200, master_seed=20170101):
    """The simulation studies plus the ranking demonstration setting."""
    ln3, ln6 = math.log(3.0), math.log(6.0)
    std4 = ("bh95", "az", "wpo", "dd")
    lognormal_b3 = WeightScheme("log-normal", {"target": "b", "location": ln3, "scale": 1.0, "a": 1.0})
    single = MixtureModel.single(3000, 0.2, 1.9)
    common = dict(reps=reps, master_seed=master_seed, alpha=0.1)
    configs = [
        ExperimentConfig(
            name="study1", model=_two_groups(1.9),
            weights=WeightScheme("per-group-ratio", {"ratios": [3.0, 0.1], "a": 1.0}),
            procedures=std4,
            sweep=Sweep("weights.params.ratios.1", (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8)), **common),
        ExperimentConfig(
            name="study2", model=_two_groups(1.9),
            weights=WeightScheme("per-group-ratio", {"ratios": [3.0, 0.33], "a": 1.0}),
            procedures=std4,
            sweep=Sweep(MU_PATH, (1.75, 1.8, 1.85, 1.9, 1.95, 2.0, 2.1, 2.2, 2.3, 2.4, 2.5)), **common),
        ExperimentConfig(
            name="study3-mu", model=single, weights=lognormal_b3, procedures=("az", "wpo", "dd"),
            sweep=Sweep(MU_PATH, (1.75, 2.0, 2.25, 2.5, 2.75, 3.0)), **common),
        ExperimentConfig(
            name="study3-p", model=single, weights=lognormal_b3, procedures=("az", "wpo", "dd"),
            sweep=Sweep("model.groups.*.p", (0.05, 0.1, 0.15, 0.2, 0.25, 0.3)), **common),
        ExperimentConfig(
            name="study3-alpha", model=single, weights=lognormal_b3, procedures=("az", "wpo", "dd"),
            sweep=Sweep("alpha", (0.05, 0.1, 0.15, 0.2)), **common),
        ExperimentConfig(
            name="study4", model=_two_groups(-3.0, p=(0.2, 0.1), mu2=2.0),
            weights=WeightScheme("log-normal", {"target": "b", "location": ln6, "scale": 1.0, "a": [1.0, 3.0]}),
            procedures=("az", "wpo", "dd"),
            lfdr_options=LfdrOptions(tail=("lower", "upper")),
            sweep=Sweep("model.groups.0.non_null.mean", (-3.75, -3.5, -3.25, -3.0, -2.75, -2.5, -2.25, -2.0)),
            **common),
        ExperimentConfig(
            name="e3-definitions", model=MixtureModel.single(500, 0.2, 1.9),
            weights=WeightScheme("log-normal", {"target": "a", "location": ln3, "scale": 1.0, "b": 1.0}),
            procedures=("bh97", "dd"),
            sweep=Sweep("model.groups.0.size", (500, 1000, 2000, 3000, 4000, 5000)), **common),
    ]
    for label, exponent in (("informative", 0.5), ("moderate", 0.125), ("anti", -0.125)):
        configs.append(ExperimentConfig(
            name=f"e5-{label}", model=MixtureModel.single(3000, 0.2, 2.0),
            weights=WeightScheme("covariate-power", {"exponent": exponent, "location": -1.5, "scale": 1.0}),
            procedures=("bh97", "az", "dd"), top_k=(100, 200, 300),
            sweep=Sweep(MU_PATH, (1.5, 2.0, 2.5, 3.0)), **common))
    configs.append(ExperimentConfig(
        name="appendixA-demo", model=MixtureModel.single(1000, 0.2, 2.0),
        weights=lognormal_b3, procedures=("wpo", "dd"), lfdr_source="oracle", **common))
    return configs


def get_builtin(name, **kwargs) -> ExperimentConfig:
    for cfg in builtin_configs(**kwargs):
        if cfg.name == name:
            return cfg
    names = ", ".join(c.name for c in builtin_configs())
    raise ConfigurationError(f"unknown builtin config {name!r}; available: {names}")
