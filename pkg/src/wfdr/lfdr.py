"""Local false discovery rates: oracle values from a known mixture and
plug-in estimates (tail-based null proportion + Gaussian KDE), group by group.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy import signal, special

from .exceptions import ConfigurationError, EstimationError
from .model import GaussianComponent, HypothesisBatch, MixtureModel

__all__ = [
    "LfdrVector",
    "DensityEstimate",
    "LfdrOptions",
    "oracle_lfdr",
    "pvalues",
    "estimate_proportion",
    "silverman_bandwidth",
    "kde_fit",
    "estimate_lfdr",
]

TAILS = ("upper", "lower", "two-sided")


@dataclass(frozen=True, eq=False)
class LfdrVector:
    """Per-hypothesis local fdr, clamped to [0, 1]."""

    values: np.ndarray
    source: str = "estimated"

    def __post_init__(self):
        if self.source not in ("oracle", "estimated"):
            raise ConfigurationError(f"unknown Lfdr source {self.source!r}")
        v = np.array(self.values, dtype=float, ndmin=1)
        if np.any(np.isnan(v)):
            raise ValueError("Lfdr values contain NaN")
        v = np.clip(v, 0.0, 1.0)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


def oracle_lfdr(model: MixtureModel, batch: HypothesisBatch) -> LfdrVector:
    """Lfdr_i = (1-p) f0(x_i) / f(x_i) with each hypothesis' group parameters."""
    out = np.empty(batch.m)
    for gid in batch.group_ids:
        g = model.group(gid)
        idx = batch.group == gid
        x = batch.x[idx]
        null_part = (1.0 - g.p) * g.null.pdf(x)
        total = null_part + g.p * g.non_null.pdf(x)
        with np.errstate(invalid="ignore", divide="ignore"):
            val = null_part / total
        # both densities underflow far in the tails; decide by log-density ratio
        bad = ~np.isfinite(val)
        if np.any(bad):
            val[bad] = _lfdr_from_logs(g, x[bad])
        out[idx] = val
    return LfdrVector(out, "oracle")


def _lfdr_from_logs(g, x):
    def logpdf(c, x):
        z = (x - c.mean) / c.sd
        return -0.5 * z * z - math.log(c.sd)

    with np.errstate(divide="ignore"):
        l0 = np.log1p(-g.p) + logpdf(g.null, x)
        l1 = np.log(g.p) + logpdf(g.non_null, x)
    return special.expit(l0 - l1)


def pvalues(z, tail="upper", null: GaussianComponent | None = None):
    """p-values of z-values against a normal null.

    ``upper``: P(Z >= z); ``lower``: P(Z <= z); ``two-sided``: 2 P(Z >= |z|).
    """
    null = null if null is not None else GaussianComponent()
    s = (np.asarray(z, dtype=float) - null.mean) / null.sd
    if tail == "upper":
        return special.ndtr(-s)
    if tail == "lower":
        return special.ndtr(s)
    if tail == "two-sided":
        return 2.0 * special.ndtr(-np.abs(s))
    raise ConfigurationError(f"unknown tail {tail!r}; expected one of {TAILS}")


def estimate_proportion(z, lam=0.5, tail="upper", null: GaussianComponent | None = None) -> float:
    """Tail-based estimate of the non-null proportion.

    Converts z to p-values and returns
    ``max(0, min(1, 1 - #{p_i > lam} / ((1 - lam) m)))``.
    """
    z = np.asarray(z, dtype=float).ravel()
    if z.size == 0:
        raise ValueError("cannot estimate a proportion from an empty sample")
    if not 0.0 < lam < 1.0:
        raise ConfigurationError(f"lambda must lie in (0, 1), got {lam!r}")
    p = pvalues(z, tail, null)
    pi0 = np.count_nonzero(p > lam) / ((1.0 - lam) * z.size)
    return float(min(1.0, max(0.0, 1.0 - pi0)))


def silverman_bandwidth(z) -> float:
    """0.9 * min(sd, IQR/1.34) * m^(-1/5)."""
    z = np.asarray(z, dtype=float)
    sd = np.std(z, ddof=1)
    q75, q25 = np.percentile(z, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34)
    if spread <= 0:
        # heavy ties in the middle: fall back to sd alone
        spread = sd
    return 0.9 * spread * z.size ** -0.2


@dataclass(frozen=True, eq=False)
class DensityEstimate:
    """Gaussian kernel density estimate ``(1/(m h)) sum_j phi((x - z_j)/h)``."""

    data: np.ndarray
    bandwidth: float
    _grid: tuple = field(default=None, repr=False)

    @property
    def sample_size(self) -> int:
        return self.data.shape[0]

    def __call__(self, x, chunk=2048):
        """Exact kernel sum at ``x``."""
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        out = np.empty(flat.shape)
        h = self.bandwidth
        norm = 1.0 / (self.sample_size * h * math.sqrt(2.0 * math.pi))
        for start in range(0, flat.size, chunk):
            u = (flat[start:start + chunk, None] - self.data[None, :]) / h
            # u*u may overflow for tiny h; exp(-inf) = 0 is the right limit
            with np.errstate(over="ignore"):
                out[start:start + chunk] = np.exp(-0.5 * u * u).sum(axis=1) * norm
        return out.reshape(x.shape) if x.ndim else float(out[0])

    def evaluate_binned(self, x, gridsize=4096):
        """Fast approximation: linear binning on a regular grid, FFT
        convolution with the kernel, linear interpolation back to ``x``.

        Points outside the grid (which extends 6 bandwidths beyond the data)
        fall back to the exact sum.
        """
        x = np.asarray(x, dtype=float)
        grid, dens = self._grid if self._grid is not None else self._binned_grid(gridsize)
        if self._grid is None:
            object.__setattr__(self, "_grid", (grid, dens))
        out = np.interp(x, grid, dens)
        outside = (x < grid[0]) | (x > grid[-1])
        if np.any(outside):
            out = np.asarray(out, dtype=float)
            out[outside] = self(x[outside])
        return out

    def _binned_grid(self, gridsize):
        h = self.bandwidth
        lo = self.data[0] - 6.0 * h
        hi = self.data[-1] + 6.0 * h
        grid = np.linspace(lo, hi, gridsize)
        delta = grid[1] - grid[0]
        pos = (self.data - lo) / delta
        left = np.clip(np.floor(pos).astype(np.int64), 0, gridsize - 2)
        frac = pos - left
        counts = np.bincount(left, weights=1.0 - frac, minlength=gridsize)
        counts += np.bincount(left + 1, weights=frac, minlength=gridsize)
        # kernel support truncated at 8h (relative mass lost < 1e-14)
        half = min(gridsize - 1, int(math.ceil(8.0 * h / delta)))
        offs = np.arange(-half, half + 1) * delta / h
        kernel = np.exp(-0.5 * offs * offs) / (math.sqrt(2.0 * math.pi) * h * self.sample_size)
        dens = signal.fftconvolve(counts, kernel, mode="same")
        return grid, np.maximum(dens, 0.0)


def kde_fit(z, bandwidth=None) -> DensityEstimate:
    """Gaussian KDE with Silverman's rule-of-thumb bandwidth unless given."""
    z = np.sort(np.asarray(z, dtype=float).ravel())
    if z.size < 2:
        raise ValueError("kernel density estimation needs at least 2 observations")
    if z[0] == z[-1]:
        raise ValueError("all observations are identical; bandwidth would be zero")
    h = silverman_bandwidth(z) if bandwidth is None else float(bandwidth)
    if not h > 0:
        raise ValueError(f"bandwidth must be > 0, got {h!r}")
    z.setflags(write=False)
    return DensityEstimate(z, h)


def _lookup(value, gid, default):
    if value is None:
        return default
    if isinstance(value, Mapping):
        return value.get(gid, value.get(str(gid), default))
    if isinstance(value, (list, tuple)):
        return value[int(gid)] if int(gid) < len(value) else default
    return value


@dataclass(frozen=True)
class LfdrOptions:
    """Options for :func:`estimate_lfdr`.

    ``null`` and ``tail`` may be a single value or a per-group list/dict.
    ``exact=False`` evaluates the KDE on a binned FFT grid.
    """

    lam: float = 0.5
    bandwidth: float | None = None
    min_group_size: int = 50
    null: object = None
    tail: object = "upper"
    exact: bool = False

    def null_for(self, gid) -> GaussianComponent:
        n = _lookup(self.null, gid, None)
        if n is None:
            return GaussianComponent()
        if isinstance(n, GaussianComponent):
            return n
        return GaussianComponent(**n)

    def tail_for(self, gid) -> str:
        return _lookup(self.tail, gid, "upper")

    def to_dict(self):
        def enc(v):
            if isinstance(v, GaussianComponent):
                return {"mean": v.mean, "sd": v.sd}
            if isinstance(v, (list, tuple)):
                return [enc(i) for i in v]
            if isinstance(v, Mapping):
                return {str(k): enc(i) for k, i in v.items()}
            return v

        return {"lam": self.lam, "bandwidth": self.bandwidth, "min_group_size": self.min_group_size,
                "null": enc(self.null), "tail": enc(self.tail), "exact": self.exact}

    @classmethod
    def from_dict(cls, d: Mapping):
        d = dict(d)
        tail = d.get("tail", "upper")
        if isinstance(tail, list):
            tail = tuple(tail)
        null = d.get("null")
        if isinstance(null, list):
            null = tuple(null)
        return cls(lam=float(d.get("lam", 0.5)), bandwidth=d.get("bandwidth"),
                   min_group_size=int(d.get("min_group_size", 50)), null=null, tail=tail,
                   exact=bool(d.get("exact", False)))


def estimate_lfdr(batch: HypothesisBatch, options: LfdrOptions | None = None, **overrides) -> LfdrVector:
    """Plug-in Lfdr estimate, each group fitted separately:
    ``clamp((1 - p_hat) f0(x) / f_hat(x), 0, 1)``.

    Raises
    ------
    EstimationError
        If a group has fewer than ``min_group_size`` hypotheses.
    """
    opts = options if options is not None else LfdrOptions()
    if overrides:
        opts = LfdrOptions(**{**opts.__dict__, **overrides})
    out = np.empty(batch.m)
    for gid in batch.group_ids:
        idx = batch.group == gid
        z = batch.x[idx]
        if z.size < opts.min_group_size:
            raise EstimationError(
                f"group {gid} has {z.size} hypotheses, below the estimation floor of {opts.min_group_size}",
                group=int(gid))
        null = opts.null_for(gid)
        p_hat = estimate_proportion(z, opts.lam, opts.tail_for(gid), null)
        try:
            f_hat = kde_fit(z, opts.bandwidth)
        except ValueError as exc:
            raise EstimationError(f"group {gid}: {exc}", group=int(gid)) from exc
        mix = f_hat(z) if opts.exact else f_hat.evaluate_binned(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = (1.0 - p_hat) * null.pdf(z) / mix
        val[~np.isfinite(val)] = 1.0
        out[idx] = val
    return LfdrVector(np.clip(out, 0.0, 1.0), "estimated")
