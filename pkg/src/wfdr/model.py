"""Mixture models, hypothesis batches with decision weights, and seeded
synthetic data.

Random numbers come from numpy's ``PCG64`` bit generator seeded through a
``SeedSequence``.  A seed may be an int or a tuple of ints such as
``(master_seed, sweep_index, replication)``; every distinct tuple gives an
independent, reproducible stream.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .exceptions import BatchFormatError, ConfigurationError

__all__ = [
    "GaussianComponent",
    "GroupSpec",
    "MixtureModel",
    "HypothesisBatch",
    "WeightScheme",
    "make_rng",
    "density",
    "mixture_density",
    "generate_batch",
    "covariate_weights",
    "read_batch_csv",
    "write_batch_csv",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def make_rng(seed) -> np.random.Generator:
    """Return a PCG64 generator for an int, a tuple of ints, a SeedSequence
    or an existing Generator (returned unchanged)."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    if isinstance(seed, (tuple, list)):
        seed = [int(s) for s in seed]
    elif seed is not None:
        seed = int(seed)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


@dataclass(frozen=True)
class GaussianComponent:
    mean: float = 0.0
    sd: float = 1.0

    def __post_init__(self):
        if not (self.sd > 0 and math.isfinite(self.sd)):
            raise ConfigurationError(f"component sd must be > 0, got {self.sd!r}")
        if not math.isfinite(self.mean):
            raise ConfigurationError(f"component mean must be finite, got {self.mean!r}")

    def pdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mean) / self.sd
        return np.exp(-0.5 * z * z) / (self.sd * _SQRT_2PI)


@dataclass(frozen=True)
class GroupSpec:
    """One group of the multi-group model: ``size`` hypotheses, each non-null
    with probability ``p``."""

    size: int
    p: float
    null: GaussianComponent = field(default_factory=GaussianComponent)
    non_null: GaussianComponent = field(default_factory=lambda: GaussianComponent(2.0, 1.0))

    def __post_init__(self):
        if int(self.size) != self.size or self.size < 1:
            raise ConfigurationError(f"group size must be a positive integer, got {self.size!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ConfigurationError(f"non-null proportion must lie in [0, 1], got {self.p!r}")

    def to_dict(self):
        return {
            "size": int(self.size),
            "p": float(self.p),
            "null": {"mean": self.null.mean, "sd": self.null.sd},
            "non_null": {"mean": self.non_null.mean, "sd": self.non_null.sd},
        }

    @classmethod
    def from_dict(cls, d: Mapping):
        try:
            return cls(
                size=int(d["size"]),
                p=float(d["p"]),
                null=GaussianComponent(**d.get("null", {})),
                non_null=GaussianComponent(**d.get("non_null", {"mean": 2.0, "sd": 1.0})),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"bad group specification {dict(d)!r}: {exc}") from exc


@dataclass(frozen=True)
class MixtureModel:
    """Two-component Gaussian mixture, possibly split into groups.

    Group ids are the positions in ``groups`` (0, 1, ...).  A single-group
    model is the K=1 case.
    """

    groups: tuple

    def __post_init__(self):
        groups = tuple(self.groups)
        if not groups:
            raise ConfigurationError("a mixture model needs at least one group")
        for g in groups:
            if not isinstance(g, GroupSpec):
                raise ConfigurationError(f"expected GroupSpec, got {type(g).__name__}")
        object.__setattr__(self, "groups", groups)

    @classmethod
    def single(cls, m, p, mu, sigma=1.0, null=None):
        null = null if null is not None else GaussianComponent()
        return cls((GroupSpec(m, p, null, GaussianComponent(mu, sigma)),))

    @property
    def m(self) -> int:
        return sum(g.size for g in self.groups)

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    def group(self, group_id) -> GroupSpec:
        try:
            gid = int(group_id)
        except (TypeError, ValueError):
            raise ConfigurationError(f"unknown group id {group_id!r}") from None
        if gid != group_id or not 0 <= gid < len(self.groups):
            raise ConfigurationError(
                f"unknown group id {group_id!r}; model has groups 0..{len(self.groups) - 1}")
        return self.groups[gid]

    def to_dict(self):
        return {"groups": [g.to_dict() for g in self.groups]}

    @classmethod
    def from_dict(cls, d: Mapping):
        if "groups" not in d:
            raise ConfigurationError("model needs a 'groups' list")
        return cls(tuple(GroupSpec.from_dict(g) for g in d["groups"]))


def _frozen(arr):
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class HypothesisBatch:
    """Observed z-values with external decision weights.

    ``a`` weighs false positives (error severity), ``b`` weighs true
    positives (power gain).  ``theta`` is the ground truth when known.
    """

    x: np.ndarray
    a: np.ndarray = None
    b: np.ndarray = None
    group: np.ndarray = None
    theta: np.ndarray = None

    def __post_init__(self):
        x = np.array(self.x, dtype=float, ndmin=1)
        m = x.shape[0]
        if x.ndim != 1 or m < 1:
            raise BatchFormatError("x must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(x)):
            raise BatchFormatError("x contains non-finite values")

        def column(values, name, dtype, default):
            if values is None:
                return np.full(m, default, dtype=dtype)
            arr = np.array(values, dtype=dtype, ndmin=1)
            if arr.shape != (m,):
                raise BatchFormatError(f"column {name!r} has length {arr.size}, expected {m}")
            return arr

        a = column(self.a, "a", float, 1.0)
        b = column(self.b, "b", float, 1.0)
        for name, w in (("a", a), ("b", b)):
            if not np.all(np.isfinite(w) & (w > 0)):
                raise BatchFormatError(f"weights {name!r} must be finite and > 0")
        group = column(self.group, "group", np.int64, 0)
        if np.any(group < 0):
            raise BatchFormatError("group ids must be non-negative integers")
        theta = None
        if self.theta is not None:
            theta = column(self.theta, "theta", np.int8, 0)
            if not np.all((theta == 0) | (theta == 1)):
                raise BatchFormatError("theta must contain only 0/1")
            theta = _frozen(theta)
        for name, arr in (("x", x), ("a", a), ("b", b), ("group", group)):
            object.__setattr__(self, name, _frozen(arr))
        object.__setattr__(self, "theta", theta)

    @property
    def m(self) -> int:
        return self.x.shape[0]

    def __len__(self):
        return self.m

    @property
    def group_ids(self):
        return np.unique(self.group)

    def has_truth(self) -> bool:
        return self.theta is not None

    def __eq__(self, other):
        if not isinstance(other, HypothesisBatch):
            return NotImplemented
        same = all(np.array_equal(getattr(self, k), getattr(other, k))
                   for k in ("x", "a", "b", "group"))
        if (self.theta is None) != (other.theta is None):
            return False
        return same and (self.theta is None or np.array_equal(self.theta, other.theta))

    __hash__ = None


@dataclass(frozen=True)
class WeightScheme:
    """How decision weights are generated for a synthetic batch.

    kinds and their ``params``:

    ``constant``
        ``a``, ``b`` (scalars, default 1).
    ``per-group-ratio``
        ``ratios``: one ratio c = a/b per group; ``a``: scalar or per-group
        list (default 1).  Then ``b = a / c``.
    ``log-normal``
        ``target``: ``"a"`` or ``"b"``, the weight drawn from
        LogNormal(``location``, ``scale``); the other weight is the scalar
        or per-group list given under its own name (default 1).
    ``covariate-power``
        external covariate s ~ LogNormal(``location``=-1.5, ``scale``=1);
        P(non-null) = s/(1+s) overrides the group proportion;
        ``b = (1+s)**exponent``; ``a`` scalar (default 1).
    """

    kind: str = "constant"
    params: Mapping = field(default_factory=dict)

    KINDS = ("constant", "per-group-ratio", "log-normal", "covariate-power")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ConfigurationError(f"unknown weight scheme {self.kind!r}; expected one of {self.KINDS}")
        params = dict(self.params)
        if self.kind == "per-group-ratio":
            ratios = params.get("ratios")
            if not ratios or any(float(c) <= 0 for c in ratios):
                raise ConfigurationError("per-group-ratio needs positive 'ratios'")
        if self.kind == "log-normal":
            if params.get("target", "b") not in ("a", "b"):
                raise ConfigurationError("log-normal target must be 'a' or 'b'")
            if float(params.get("scale", 1.0)) < 0:
                raise ConfigurationError("log-normal scale must be >= 0")
        for key in ("a", "b"):
            vals = params.get(key)
            if vals is not None and np.any(np.asarray(vals, dtype=float) <= 0):
                raise ConfigurationError(f"weights {key!r} must be > 0")
        object.__setattr__(self, "params", params)

    def to_dict(self):
        return {"kind": self.kind, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d: Mapping):
        return cls(d.get("kind", "constant"), dict(d.get("params", {})))


def density(component: GaussianComponent, x):
    """Normal density of ``component`` at ``x`` (scalar or array)."""
    out = component.pdf(x)
    return float(out) if np.ndim(out) == 0 else out


def mixture_density(model: MixtureModel, group_id, x):
    """Marginal density ``(1-p) f0(x) + p f1(x)`` of one group."""
    g = model.group(group_id)
    out = (1.0 - g.p) * g.null.pdf(x) + g.p * g.non_null.pdf(x)
    return float(out) if np.ndim(out) == 0 else out


def _per_group(value, n_groups, name):
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        return np.full(n_groups, arr[0])
    if arr.size != n_groups:
        raise ConfigurationError(f"{name!r} has {arr.size} entries for {n_groups} groups")
    return arr


def covariate_weights(m, exponent, seed, location=-1.5, scale=1.0):
    """Draw external covariates and the weights/probabilities derived from them.

    Returns ``(s, p, b)`` with ``s ~ LogNormal(location, scale)`` (parameters
    of the underlying normal), ``p = s/(s+1)`` and ``b = (1+s)**exponent``.
    """
    if m < 1:
        raise ConfigurationError("m must be >= 1")
    rng = make_rng(seed)
    s = rng.lognormal(location, scale, size=m)
    return s, s / (s + 1.0), (1.0 + s) ** exponent


def generate_batch(model: MixtureModel, weights: WeightScheme | None = None, seed=None) -> HypothesisBatch:
    """Simulate one batch: per group, theta ~ Bernoulli(p), then x from the
    selected component; weights from ``weights``.

    Draw order (fixed, part of the reproducibility contract): for each group
    in order, theta then x; then the weights.  The covariate-power scheme
    draws covariates first because they set the non-null probabilities.
    """
    weights = weights if weights is not None else WeightScheme()
    rng = make_rng(seed)
    params = weights.params
    sizes = [g.size for g in model.groups]
    m = sum(sizes)
    group = np.repeat(np.arange(len(sizes)), sizes)

    if weights.kind == "covariate-power":
        s = rng.lognormal(float(params.get("location", -1.5)), float(params.get("scale", 1.0)), size=m)
        p_i = s / (s + 1.0)
    else:
        p_i = np.repeat([g.p for g in model.groups], sizes)

    theta = (rng.random(m) < p_i).astype(np.int8)
    x = np.empty(m)
    start = 0
    for g, size in zip(model.groups, sizes):
        sl = slice(start, start + size)
        noise = rng.standard_normal(size)
        x[sl] = np.where(theta[sl] == 1,
                         g.non_null.mean + g.non_null.sd * noise,
                         g.null.mean + g.null.sd * noise)
        start += size

    K = len(sizes)
    if weights.kind == "constant":
        a = np.full(m, float(params.get("a", 1.0)))
        b = np.full(m, float(params.get("b", 1.0)))
    elif weights.kind == "per-group-ratio":
        ratios = _per_group(params["ratios"], K, "ratios")
        a_g = _per_group(params.get("a", 1.0), K, "a")
        a = a_g[group]
        b = (a_g / ratios)[group]
    elif weights.kind == "log-normal":
        target = params.get("target", "b")
        other = "a" if target == "b" else "b"
        drawn = rng.lognormal(float(params.get("location", 0.0)), float(params.get("scale", 1.0)), size=m)
        fixed = _per_group(params.get(other, 1.0), K, other)[group]
        a, b = (drawn, fixed) if target == "a" else (fixed, drawn)
    else:  # covariate-power
        a = np.full(m, float(params.get("a", 1.0)))
        b = (1.0 + s) ** float(params.get("exponent", 0.0))

    return HypothesisBatch(x=x, a=a, b=b, group=group, theta=theta)


_CSV_COLUMNS = ("x", "a", "b", "group", "theta")


def read_batch_csv(path) -> HypothesisBatch:
    """Read a batch CSV with header; ``x`` required, ``a``, ``b``, ``group``,
    ``theta`` optional."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise BatchFormatError(f"{path}: empty file")
            header = [h.strip() for h in reader.fieldnames]
            if "x" not in header:
                raise BatchFormatError(f"{path}: missing required column 'x'")
            reader.fieldnames = header
            cols = {c: [] for c in _CSV_COLUMNS if c in header}
            for lineno, row in enumerate(reader, start=2):
                for c in cols:
                    raw = (row.get(c) or "").strip()
                    if raw == "":
                        raise BatchFormatError(f"{path}:{lineno}: empty value in column {c!r}")
                    try:
                        cols[c].append(float(raw) if c in ("x", "a", "b") else int(float(raw)))
                    except ValueError:
                        raise BatchFormatError(f"{path}:{lineno}: bad value {raw!r} in column {c!r}") from None
    except OSError as exc:
        raise BatchFormatError(f"cannot read {path}: {exc}") from exc
    if not cols["x"]:
        raise BatchFormatError(f"{path}: no data rows")
    return HypothesisBatch(**cols)


def write_batch_csv(batch: HypothesisBatch, path) -> None:
    cols = ["x", "a", "b", "group"] + (["theta"] if batch.has_truth() else [])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for i in range(batch.m):
            w.writerow([repr(float(batch.x[i])), repr(float(batch.a[i])), repr(float(batch.b[i])),
                        int(batch.group[i])] + ([int(batch.theta[i])] if batch.has_truth() else []))
