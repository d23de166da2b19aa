"""Ranking statistics for weighted multiple testing.

The value-to-cost ratio ``b(1-Lfdr) / (a(Lfdr-alpha))`` is the natural
greedy (knapsack) ranking, but it is undefined at ``Lfdr == alpha`` and
unbounded.  The bounded R statistic induces the same order among the
capacity-consuming hypotheses (Lfdr > alpha) and always ranks the
capacity-creating ones (Lfdr <= alpha) first.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError

__all__ = [
    "RankedHypotheses",
    "vcr",
    "r_stat",
    "wpo_stat",
    "wlr_stat",
    "lr_stat",
    "stable_order",
    "rank_all",
]


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise ConfigurationError(f"alpha must lie in (0, 1), got {alpha!r}")


def _scalar_or_array(out):
    return float(out) if np.ndim(out) == 0 else out


def vcr(lfdr, a, b, alpha):
    """Value-to-cost ratio ``b(1-lfdr) / (a(lfdr-alpha))``.

    Raises ``ValueError`` where ``lfdr == alpha``; use :func:`r_stat` there.
    """
    lfdr, a, b = (np.asarray(v, dtype=float) for v in (lfdr, a, b))
    excess = lfdr - alpha
    if np.any(excess == 0):
        raise ValueError("VCR is undefined at lfdr == alpha")
    return _scalar_or_array(b * (1.0 - lfdr) / (a * excess))


def r_stat(lfdr, a, b, alpha):
    """Bounded ranking statistic in [-1, 1]:
    ``a(lfdr-alpha) / (b(1-lfdr) + a|lfdr-alpha|)``."""
    _check_alpha(alpha)
    lfdr, a, b = (np.asarray(v, dtype=float) for v in (lfdr, a, b))
    excess = a * (lfdr - alpha)
    out = excess / (b * (1.0 - lfdr) + np.abs(excess))
    return _scalar_or_array(np.clip(out, -1.0, 1.0))


def wpo_stat(lfdr, a, b):
    """Weighted posterior odds ``(a/b) lfdr/(1-lfdr)``; +inf where lfdr == 1."""
    lfdr, a, b = (np.asarray(v, dtype=float) for v in (lfdr, a, b))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(lfdr >= 1.0, np.inf, (a / b) * lfdr / (1.0 - lfdr))
    return _scalar_or_array(out)


def wlr_stat(f0x, f1x, a, b):
    """Weighted likelihood ratio ``a f0 / (b f1)``."""
    f0x, f1x, a, b = (np.asarray(v, dtype=float) for v in (f0x, f1x, a, b))
    if np.any(f1x <= 0):
        raise ValueError("non-null density must be > 0")
    return _scalar_or_array(a * f0x / (b * f1x))


def lr_stat(f0x, f1x):
    """Likelihood ratio ``f0 / f1``."""
    return wlr_stat(f0x, f1x, 1.0, 1.0)


def stable_order(stat):
    """Indices sorting ``stat`` ascending, ties by ascending index."""
    return np.argsort(np.asarray(stat, dtype=float), kind="stable")


@dataclass(frozen=True, eq=False)
class RankedHypotheses:
    """Hypotheses ordered by ascending R.

    ``r`` and ``n`` (excess error ``a(lfdr-alpha)``) are in original index
    order; ``order[j]`` is the index of the j-th ranked hypothesis.
    """

    order: np.ndarray
    r: np.ndarray
    n: np.ndarray
    alpha: float

    @property
    def capacity(self):
        """Cumulative excess error along the ranking, C(1), ..., C(m)."""
        return np.cumsum(self.n[self.order])


def rank_all(lfdr, batch, alpha) -> RankedHypotheses:
    """Compute R and excess error for every hypothesis and sort by R."""
    _check_alpha(alpha)
    values = np.asarray(lfdr, dtype=float)
    if values.shape != (batch.m,):
        raise ValueError(f"{values.size} Lfdr values for a batch of {batch.m}")
    r = np.asarray(r_stat(values, batch.a, batch.b, alpha), dtype=float).reshape(batch.m)
    n = batch.a * (values - alpha)
    order = stable_order(r)
    for arr in (order, r, n):
        arr.setflags(write=False)
    return RankedHypotheses(order=order, r=r, n=n, alpha=float(alpha))
