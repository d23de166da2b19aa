"""Rejection procedures for weighted FDR control and their comparators.

Every procedure here ranks the hypotheses and rejects a prefix of the
ranking.  They differ in the ranking statistic and the stopping rule:

==================  ==================  =======================================
selector            ranking             stop at largest k with
==================  ==================  =======================================
``dd``              R (ascending)       sum_{i<=k} a(Lfdr - alpha) <= 0
``dd-proportional`` Lfdr                a-weighted mean Lfdr <= alpha
``az``              Lfdr                unweighted mean Lfdr <= alpha
``wpo``             weighted post. odds sum_{i<=k} a(Lfdr - alpha) <= 0
``bh97``/``bh95``   p-value             p_(k) <= alpha * sum_{i<=k} a / sum a
``oracle``          R (ascending)       capacity, randomizing the next one
``pfer-oracle``     weighted post. odds sum_{i<=k} a Lfdr <= alpha (budget)
==================  ==================  =======================================
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError
from .lfdr import LfdrVector, oracle_lfdr
from .model import HypothesisBatch, MixtureModel, make_rng
from .ranking import rank_all, stable_order, wpo_stat

__all__ = [
    "PROCEDURES",
    "RandomizedPoint",
    "ThresholdTrace",
    "DecisionSet",
    "oracle_procedure",
    "procedure1",
    "procedure2",
    "adaptive_z",
    "wpo_stepwise",
    "bh_step_up",
    "pfer_oracle",
    "apply_procedure",
]

PROCEDURES = ("dd", "dd-proportional", "az", "wpo", "bh97", "bh95", "oracle", "pfer-oracle")


@dataclass(frozen=True)
class RandomizedPoint:
    index: int
    accept_probability: float
    realized: int


@dataclass(frozen=True, eq=False)
class ThresholdTrace:
    k: int
    t_star: float | None
    cumulative_capacity: np.ndarray


@dataclass(frozen=True, eq=False)
class DecisionSet:
    """Binary decisions plus how they were reached.

    ``order`` is the ranking the procedure stepped along; the rejected set
    is ``order[:num_rejected]`` (the randomized point, when realized, is
    ``order[k]``).
    """

    reject: np.ndarray
    num_rejected: int
    order: np.ndarray
    trace: ThresholdTrace
    randomized: RandomizedPoint | None = None
    procedure: str = ""

    @property
    def rejected_indices(self):
        return np.flatnonzero(self.reject)


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise ConfigurationError(f"alpha must lie in (0, 1), got {alpha!r}")


def _values(lfdr, m):
    v = np.asarray(lfdr, dtype=float)
    if v.shape != (m,):
        raise ValueError(f"{v.size} Lfdr values for a batch of {m}")
    return v


def _last_true(mask) -> int:
    """1 + index of the last True entry, 0 if none."""
    hits = np.flatnonzero(mask)
    return int(hits[-1]) + 1 if hits.size else 0


def _prefix_decisions(order, k, capacity, name, t_star=None, randomized=None):
    m = order.shape[0]
    reject = np.zeros(m, dtype=np.int8)
    reject[order[:k]] = 1
    if randomized is not None and randomized.realized:
        reject[randomized.index] = 1
    for arr in (reject, order, capacity):
        arr.setflags(write=False)
    return DecisionSet(
        reject=reject,
        num_rejected=int(reject.sum()),
        order=order,
        trace=ThresholdTrace(k=k, t_star=t_star, cumulative_capacity=capacity),
        randomized=randomized,
        procedure=name,
    )


def _capacity_stepwise(order, excess, name):
    capacity = np.cumsum(excess[order])
    k = _last_true(capacity <= 0.0)
    return _prefix_decisions(order, k, capacity, name)


def oracle_procedure(lfdr, batch: HypothesisBatch, alpha, seed=None) -> DecisionSet:
    """Randomized oracle rule.

    Ranks by ascending R, rejects the first k = max{j: C(j) <= 0} where
    C(j) is the cumulative excess error, and rejects the (k+1)-th with
    probability ``p* = -C(k) / (C(k+1) - C(k))`` so the expected capacity
    is exactly exhausted.
    """
    _check_alpha(alpha)
    if isinstance(lfdr, LfdrVector) and lfdr.source != "oracle":
        raise ConfigurationError("the oracle procedure requires oracle Lfdr values")
    values = _values(lfdr, batch.m)
    ranked = rank_all(values, batch, alpha)
    order = np.array(ranked.order)
    capacity = np.cumsum(ranked.n[order])
    k = _last_true(capacity <= 0.0)
    if k == batch.m:
        return _prefix_decisions(order, k, capacity, "oracle")

    j = int(order[k])
    c_k = capacity[k - 1] if k > 0 else 0.0
    step = capacity[k] - c_k
    p_star = float(min(1.0, max(0.0, -c_k / step)))
    excess = values[j] - alpha
    t_star = float(batch.b[j] * (1.0 - values[j]) / (batch.a[j] * excess))
    u = make_rng(seed).random()
    point = RandomizedPoint(index=j, accept_probability=p_star, realized=int(u < p_star))
    return _prefix_decisions(order, k, capacity, "oracle", t_star=t_star, randomized=point)


def procedure1(lfdr, batch: HypothesisBatch, alpha) -> DecisionSet:
    """Data-driven wFDR procedure for general weights: rank by ascending R,
    reject the longest prefix with non-positive cumulative excess error."""
    _check_alpha(alpha)
    ranked = rank_all(_values(lfdr, batch.m), batch, alpha)
    return _capacity_stepwise(np.array(ranked.order), ranked.n, "dd")


def procedure2(lfdr, batch: HypothesisBatch, alpha) -> DecisionSet:
    """Lfdr-ranked procedure for proportional weights: reject the longest
    prefix whose a-weighted mean Lfdr is at most alpha."""
    _check_alpha(alpha)
    values = _values(lfdr, batch.m)
    # weighted mean <= alpha  <=>  sum a (Lfdr - alpha) <= 0, since a > 0
    return _capacity_stepwise(stable_order(values), batch.a * (values - alpha), "dd-proportional")


def adaptive_z(lfdr, alpha) -> DecisionSet:
    """Unweighted adaptive z-value procedure (running mean of sorted Lfdr)."""
    _check_alpha(alpha)
    values = np.asarray(lfdr, dtype=float).ravel()
    return _capacity_stepwise(stable_order(values), values - alpha, "az")


def wpo_stepwise(lfdr, batch: HypothesisBatch, alpha) -> DecisionSet:
    """Step along the weighted-posterior-odds ranking with the same
    cumulative excess-error stopping rule as :func:`procedure1`."""
    _check_alpha(alpha)
    values = _values(lfdr, batch.m)
    order = stable_order(wpo_stat(values, batch.a, batch.b))
    return _capacity_stepwise(order, batch.a * (values - alpha), "wpo")


def bh_step_up(pvals, a, alpha) -> DecisionSet:
    """Weighted step-up: reject the k smallest p-values for the largest k with
    ``p_(k) <= alpha * sum_{i<=k} a_(i) / sum_i a_i``.

    With unit weights this is the Benjamini-Hochberg (1995) procedure.
    """
    _check_alpha(alpha)
    p = np.asarray(pvals, dtype=float).ravel()
    a = np.broadcast_to(np.asarray(a, dtype=float), p.shape)
    if np.any((p < 0) | (p > 1)) or np.any(np.isnan(p)):
        raise ValueError("p-values must lie in [0, 1]")
    if np.any(a <= 0):
        raise ValueError("weights must be > 0")
    order = stable_order(p)
    thresholds = alpha * np.cumsum(a[order]) / a.sum()
    k = _last_true(p[order] <= thresholds)
    name = "bh95" if np.all(a == a.flat[0]) else "bh97"
    return _prefix_decisions(order, k, p[order] - thresholds, name)


def pfer_oracle(model: MixtureModel, batch: HypothesisBatch, alpha) -> DecisionSet:
    """Oracle PFER rule: threshold the weighted posterior odds at the largest
    level whose expected weighted false-positive count
    ``sum a_i Lfdr_i delta_i`` stays within the budget ``alpha``."""
    if alpha < 0:
        raise ConfigurationError("PFER budget must be >= 0")
    values = oracle_lfdr(model, batch).values
    order = stable_order(wpo_stat(values, batch.a, batch.b))
    spent = np.cumsum((batch.a * values)[order])
    k = _last_true(spent <= alpha)
    return _prefix_decisions(order, k, spent, "pfer-oracle")


def apply_procedure(name, batch: HypothesisBatch, alpha, lfdr=None, *, pvals=None,
                    oracle=None, model=None, seed=None) -> DecisionSet:
    """Dispatch on a procedure selector (see :data:`PROCEDURES`).

    ``lfdr`` feeds the data-driven procedures, ``oracle`` (oracle Lfdr) the
    randomized oracle, ``pvals`` the BH step-ups and ``model`` the PFER
    oracle.
    """
    if name not in PROCEDURES:
        raise ConfigurationError(f"unknown procedure {name!r}; expected one of {PROCEDURES}")
    if name in ("bh95", "bh97"):
        if pvals is None:
            raise ConfigurationError(f"{name} needs p-values")
        a = 1.0 if name == "bh95" else batch.a
        d = bh_step_up(pvals, a, alpha)
        return DecisionSet(d.reject, d.num_rejected, d.order, d.trace, None, name)
    if name == "pfer-oracle":
        if model is None:
            raise ConfigurationError("pfer-oracle needs the mixture model")
        return pfer_oracle(model, batch, alpha)
    if name == "oracle":
        if oracle is None:
            raise ConfigurationError("oracle procedure needs oracle Lfdr values")
        return oracle_procedure(oracle, batch, alpha, seed=seed)
    if lfdr is None:
        raise ConfigurationError(f"{name} needs Lfdr values")
    if name == "dd":
        return procedure1(lfdr, batch, alpha)
    if name == "dd-proportional":
        return procedure2(lfdr, batch, alpha)
    if name == "az":
        return adaptive_z(lfdr, alpha)
    return wpo_stepwise(lfdr, batch, alpha)
