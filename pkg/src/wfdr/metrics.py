"""Realized and Monte Carlo averaged error and power metrics.

Two weighted FDR definitions are always reported side by side:

* ``wfdr_bh``: mean over replications of the realized weighted false
  discovery proportion (expectation of a ratio);
* ``wfdr_ratio``: mean false mass over mean rejection mass (ratio of
  expectations).  This is the definition the oracle controls exactly.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .exceptions import ConfigurationError

__all__ = [
    "ReplicationMetrics",
    "AggregateMetrics",
    "replication_metrics",
    "aggregate",
    "top_k_true_positives",
]


@dataclass(frozen=True)
class ReplicationMetrics:
    weighted_fdp: float
    weighted_false_mass: float
    weighted_reject_mass: float
    weighted_true_pos: float
    rejects: int
    true_positives: int


@dataclass(frozen=True)
class AggregateMetrics:
    wfdr_bh: float
    wfdr_ratio: float
    etp: float
    etp_unweighted: float
    reps: int
    se_wfdr_bh: float
    se_wfdr_ratio: float
    se_etp: float
    se_etp_unweighted: float
    mean_rejects: float

    def to_dict(self):
        return asdict(self)


def replication_metrics(decisions, batch) -> ReplicationMetrics:
    """Realized metrics of one decision vector against the ground truth."""
    if not batch.has_truth():
        raise ConfigurationError("metrics need the ground truth theta")
    delta = np.asarray(getattr(decisions, "reject", decisions), dtype=float)
    if delta.shape != (batch.m,):
        raise ValueError(f"{delta.size} decisions for a batch of {batch.m}")
    theta = batch.theta.astype(float)
    reject_mass = math.fsum(batch.a * delta)
    false_mass = math.fsum(batch.a * (1.0 - theta) * delta)
    fdp = false_mass / reject_mass if reject_mass > 0 else 0.0
    return ReplicationMetrics(
        weighted_fdp=fdp,
        weighted_false_mass=false_mass,
        weighted_reject_mass=reject_mass,
        weighted_true_pos=math.fsum(batch.b * theta * delta),
        rejects=int(delta.sum()),
        true_positives=int((theta * delta).sum()),
    )


def _mean(xs):
    return math.fsum(xs) / len(xs)


def _se(xs):
    n = len(xs)
    if n < 2:
        return 0.0
    mu = _mean(xs)
    var = math.fsum((x - mu) ** 2 for x in xs) / (n - 1)
    return math.sqrt(var / n)


def aggregate(reps) -> AggregateMetrics:
    """Average replication metrics.

    Standard errors are sample sd / sqrt(reps); for ``wfdr_ratio`` (a ratio
    of means) the delta method is used.
    """
    reps = list(reps)
    n = len(reps)
    if n < 1:
        raise ValueError("need at least one replication")
    fdp = [r.weighted_fdp for r in reps]
    false = [r.weighted_false_mass for r in reps]
    rej = [r.weighted_reject_mass for r in reps]
    etp = [r.weighted_true_pos for r in reps]
    tp = [float(r.true_positives) for r in reps]
    mean_false, mean_rej = _mean(false), _mean(rej)
    ratio = mean_false / mean_rej if mean_rej > 0 else 0.0
    se_ratio = 0.0
    if n > 1 and mean_rej > 0:
        # linearization: residual X - ratio * Y
        resid = [f - ratio * r for f, r in zip(false, rej)]
        se_ratio = _se(resid) / mean_rej
    return AggregateMetrics(
        wfdr_bh=_mean(fdp),
        wfdr_ratio=ratio,
        etp=_mean(etp),
        etp_unweighted=_mean(tp),
        reps=n,
        se_wfdr_bh=_se(fdp),
        se_wfdr_ratio=se_ratio,
        se_etp=_se(etp),
        se_etp_unweighted=_se(tp),
        mean_rejects=_mean([float(r.rejects) for r in reps]),
    )


def top_k_true_positives(ranking, batch, k) -> int:
    """Number of non-nulls among the first ``k`` hypotheses of ``ranking``.

    ``ranking`` is an index order, or anything with an ``order`` attribute
    (a DecisionSet or RankedHypotheses).
    """
    if not batch.has_truth():
        raise ConfigurationError("top-k true positives need the ground truth theta")
    order = np.asarray(getattr(ranking, "order", ranking))
    if not 1 <= k <= batch.m:
        raise ValueError(f"k must lie in [1, {batch.m}], got {k}")
    return int(batch.theta[order[:k]].sum())
