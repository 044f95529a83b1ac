"""Data models: grouped samples, sufficient statistics and scenario configuration."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Sequence

import numpy as np

from .config import DEFAULT_MAX_ITER, DEFAULT_TOL
from .errors import InvalidInput


class Scenario(str, Enum):
    """Variance regime of the normal model."""

    KNOWN_RATIO = "known-ratio"
    UNKNOWN_VARIANCES = "unknown"
    ORDERED_VARIANCES = "ordered"


class Solver(str, Enum):
    """Stopping rule of the alternating fitters."""

    AIM = "aim"  # likelihood difference
    TWO_STEP = "two-step"  # parameter difference


class Order(str, Enum):
    INCREASING = "inc"
    DECREASING = "dec"


def _frozen(values: Any, dtype: type = float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class GroupedSample:
    """Raw responses y_ij organized by strictly increasing level label."""

    levels: tuple[float, ...]
    observations: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if not self.levels:
            raise InvalidInput("sample has no levels")
        if len(self.levels) != len(self.observations):
            raise InvalidInput(
                f"{len(self.levels)} level labels but {len(self.observations)} observation groups"
            )
        levels = tuple(float(x) for x in self.levels)
        for a, b in zip(levels, levels[1:]):
            if not a < b:
                raise InvalidInput(f"levels must be strictly increasing, got {a} before {b}")
        groups = tuple(_frozen(obs) for obs in self.observations)
        for label, obs in zip(levels, groups):
            if obs.size == 0:
                raise InvalidInput(f"level {label:g} has no observations")
            if not np.all(np.isfinite(obs)):
                raise InvalidInput(f"level {label:g} has non-finite observations")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "observations", groups)

    @classmethod
    def from_pairs(cls, levels: Sequence[float], values: Sequence[float]) -> GroupedSample:
        """Group long-format (level, value) pairs; levels are sorted ascending."""
        lv = np.asarray(levels, dtype=float)
        yv = np.asarray(values, dtype=float)
        if lv.shape != yv.shape:
            raise InvalidInput("levels and values must have equal length")
        uniq = np.unique(lv)
        return cls(
            levels=tuple(uniq.tolist()),
            observations=tuple(yv[lv == u] for u in uniq),
        )

    @property
    def k(self) -> int:
        return len(self.levels)

    @property
    def n(self) -> np.ndarray:
        return np.array([obs.size for obs in self.observations], dtype=np.int64)

    def flat(self) -> np.ndarray:
        """All observations concatenated level by level."""
        return np.concatenate(self.observations)

    def negated(self) -> GroupedSample:
        return GroupedSample(self.levels, tuple(-obs for obs in self.observations))

    def reversed(self) -> GroupedSample:
        """Levels in reverse order; labels are negated to stay strictly increasing."""
        return GroupedSample(
            tuple(-x for x in reversed(self.levels)),
            tuple(reversed(self.observations)),
        )


@dataclass(frozen=True)
class SufficientStats:
    """Per-level (n_i, ȳ_i, σ̄²_i) with σ̄²_i using divisor n_i."""

    n: np.ndarray
    mean: np.ndarray
    var: np.ndarray
    levels: tuple[float, ...] = field(default=())

    def __post_init__(self) -> None:
        n = _frozen(self.n, dtype=np.int64)
        mean = _frozen(self.mean)
        var = _frozen(self.var)
        if n.size == 0:
            raise InvalidInput("no levels")
        if not (n.size == mean.size == var.size):
            raise InvalidInput(f"length mismatch: n={n.size}, mean={mean.size}, var={var.size}")
        if np.any(n < 1):
            raise InvalidInput(f"every level needs n_i >= 1, got n={n.tolist()}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(var))):
            raise InvalidInput("means and variances must be finite")
        if np.any(var < 0):
            raise InvalidInput(f"variances must be non-negative, got {var.tolist()}")
        if np.any((n == 1) & (var != 0)):
            raise InvalidInput("a level with n_i = 1 must have zero variance")
        levels = tuple(float(x) for x in self.levels) or tuple(float(i) for i in range(n.size))
        if len(levels) != n.size:
            raise InvalidInput(f"{len(levels)} level labels for {n.size} levels")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "var", var)
        object.__setattr__(self, "levels", levels)

    @property
    def k(self) -> int:
        return int(self.n.size)

    @property
    def N(self) -> int:
        return int(self.n.sum())

    @property
    def var_unbiased(self) -> np.ndarray:
        """s²_i with divisor n_i − 1; NaN where n_i = 1."""
        out = np.full(self.k, np.nan)
        ok = self.n >= 2
        out[ok] = self.var[ok] * self.n[ok] / (self.n[ok] - 1)
        return out

    def rss(self, mu: float | np.ndarray) -> np.ndarray:
        """Σ_j (y_ij − μ_i)² / n_i = σ̄²_i + (ȳ_i − μ_i)², per level."""
        return self.var + (self.mean - mu) ** 2

    def negated(self) -> SufficientStats:
        return SufficientStats(self.n, -self.mean, self.var, self.levels)

    def reversed(self) -> SufficientStats:
        return SufficientStats(self.n[::-1], self.mean[::-1], self.var[::-1], self.levels[::-1])

    def to_dict(self) -> dict[str, Any]:
        """Serialize for the report; s² of singleton levels is null."""
        return {
            "levels": list(self.levels),
            "n": self.n.tolist(),
            "mean": self.mean.tolist(),
            "var": self.var.tolist(),
            "var_unbiased": [None if np.isnan(s) else float(s) for s in self.var_unbiased],
            "N": self.N,
        }


def summarize(sample: GroupedSample) -> SufficientStats:
    """Reduce raw data to exact per-level moments (two-pass)."""
    if sample.k == 0:
        raise InvalidInput("sample has no levels")
    means = np.array([obs.mean() for obs in sample.observations])
    var = np.array([np.mean((obs - m) ** 2) for obs, m in zip(sample.observations, means)])
    return SufficientStats(n=sample.n, mean=means, var=var, levels=sample.levels)


def summarize_flat(values: np.ndarray, n: np.ndarray, levels: tuple[float, ...] = ()) -> SufficientStats:
    """Moments of a level-ordered flat vector split into consecutive groups of sizes ``n``."""
    starts = np.concatenate(([0], np.cumsum(n)[:-1]))
    means = np.add.reduceat(values, starts) / n
    dev = values - np.repeat(means, n)
    var = np.add.reduceat(dev * dev, starts) / n
    # singleton levels carry exact zeros
    var = np.where(n == 1, 0.0, var)
    return SufficientStats(n=n, mean=means, var=var, levels=levels)


def pooled_total_variance(stats: SufficientStats) -> float:
    """Variance of the pooled data (divisor N), by the law of total variance."""
    if stats.N < 2:
        raise InvalidInput(f"pooled variance needs N >= 2, got N={stats.N}")
    w = stats.n / stats.N
    grand = float(np.sum(w * stats.mean))
    within = float(np.sum(w * stats.var))
    between = float(np.sum(w * (stats.mean - grand) ** 2))
    return within + between


@dataclass(frozen=True)
class ScenarioConfig:
    """Scenario, order directions and solver settings for one analysis."""

    scenario: Scenario
    ratios: tuple[float, ...] | None = None
    sigma2: float | None = None
    mean_order: Order = Order.INCREASING
    variance_order: Order = Order.DECREASING
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    solver: Solver = Solver.AIM

    def __post_init__(self) -> None:
        object.__setattr__(self, "scenario", Scenario(self.scenario))
        object.__setattr__(self, "mean_order", Order(self.mean_order))
        object.__setattr__(self, "variance_order", Order(self.variance_order))
        object.__setattr__(self, "solver", Solver(self.solver))
        if not self.tol > 0:
            raise InvalidInput(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise InvalidInput(f"max_iter must be >= 1, got {self.max_iter}")
        if self.scenario is not Scenario.KNOWN_RATIO:
            if self.ratios is not None or self.sigma2 is not None:
                raise InvalidInput("ratios and sigma2 apply only to the known-ratio scenario")
            return
        if self.ratios is not None:
            ratios = tuple(float(c) for c in self.ratios)
            if not all(np.isfinite(c) and c > 0 for c in ratios):
                raise InvalidInput(f"variance ratios must be positive, got {list(ratios)}")
            object.__setattr__(self, "ratios", ratios)
        if self.sigma2 is not None and not (np.isfinite(self.sigma2) and self.sigma2 > 0):
            raise InvalidInput(f"sigma2 must be positive, got {self.sigma2}")

    def ratios_for(self, k: int) -> np.ndarray:
        """c_i as an array of length k (all ones when not given)."""
        if self.ratios is None:
            return np.ones(k)
        if len(self.ratios) != k:
            raise InvalidInput(f"expected {k} variance ratios, got {len(self.ratios)}")
        return np.asarray(self.ratios, dtype=float)

    def to_dict(self) -> dict[str, Any]:
        return {
            "scenario": self.scenario.value,
            "ratios": list(self.ratios) if self.ratios is not None else None,
            "sigma2": self.sigma2,
            "mean_order": self.mean_order.value,
            "variance_order": self.variance_order.value,
            "tol": self.tol,
            "max_iter": self.max_iter,
            "solver": self.solver.value,
        }
