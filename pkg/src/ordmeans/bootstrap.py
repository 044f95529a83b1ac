"""Parametric and non-parametric bootstrap of the null distribution of a test statistic.

Replicate ``r`` always draws from ``default_rng(SeedSequence(seed, spawn_key=(r,)))``,
so results depend on (inputs, seed, replicates) only, never on the worker count
or on how replicate ranges are split between workers.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np
from joblib import Parallel, delayed

from .config import (
    BOOTSTRAP_WORKERS,
    DEFAULT_REPLICATES,
    DEFAULT_SEED,
    MAX_FAILURE_RATE,
    REPLICATE_CHUNKS_PER_WORKER,
)
from .errors import DegenerateVariance, InvalidInput, OrdMeansError
from .estimation import NullFit
from .lrt import StatisticKind, compute_statistic
from .models import GroupedSample, ScenarioConfig, SufficientStats, summarize_flat
from .storage import write_values

logger = logging.getLogger(__name__)


class BootstrapMode(str, Enum):
    PARAMETRIC = "parametric"
    NONPARAMETRIC = "nonparametric"


class Generation(str, Enum):
    """How parametric replicates are produced."""

    RAW_SAMPLES = "raw"  # n_i normal draws per level, then summarized
    SUFFICIENT_ONLY = "sufficient"  # ȳ* and σ̄²* drawn from their exact laws


@dataclass(frozen=True)
class BootstrapPlan:
    mode: BootstrapMode
    kind: StatisticKind
    config: ScenarioConfig
    replicates: int = DEFAULT_REPLICATES
    seed: int = DEFAULT_SEED
    generation: Generation = Generation.SUFFICIENT_ONLY
    workers: int = BOOTSTRAP_WORKERS
    keep_values: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", BootstrapMode(self.mode))
        object.__setattr__(self, "kind", StatisticKind(self.kind))
        object.__setattr__(self, "generation", Generation(self.generation))
        if self.replicates < 1:
            raise InvalidInput(f"replicates must be >= 1, got {self.replicates}")
        if self.seed < 0:
            raise InvalidInput(f"seed must be non-negative, got {self.seed}")
        if self.workers < 1:
            raise InvalidInput(f"workers must be >= 1, got {self.workers}")


@dataclass(frozen=True)
class BootstrapResult:
    """Bootstrap p-value #(T* > T)/valid plus the (#+1)/(valid+1) variant."""

    mode: BootstrapMode
    generation: Generation | None
    observed: float
    replicates: int
    valid: int
    exceedances: int
    failures: int
    seed: int
    values: tuple[float | None, ...] = field(default=(), repr=False)

    @property
    def p_value(self) -> float | None:
        if self.valid == 0:
            return None
        return self.exceedances / self.valid

    @property
    def p_value_plus_one(self) -> float:
        return (self.exceedances + 1) / (self.valid + 1)

    @property
    def failure_rate(self) -> float:
        return self.failures / self.replicates

    @property
    def failure_warning(self) -> bool:
        return self.failure_rate > MAX_FAILURE_RATE

    def to_dict(self) -> dict[str, Any]:
        return {
            "mode": self.mode.value,
            "generation": self.generation.value if self.generation is not None else None,
            "observed": self.observed,
            "p_value": self.p_value,
            "p_value_plus_one": self.p_value_plus_one,
            "replicates": self.replicates,
            "valid": self.valid,
            "exceedances": self.exceedances,
            "failures": self.failures,
            "failure_warning": self.failure_warning,
            "seed": self.seed,
        }

    def dump_values(self, path: str | Path) -> int:
        """Write retained replicate values, one per line; failed replicates as ``nan``."""
        if not self.values:
            raise InvalidInput("replicate values were not retained (keep_values=False)")
        return write_values(path, self.values)


def replicate_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for replicate ``index``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def standardized_residuals(sample: GroupedSample) -> np.ndarray:
    """Pooled z_ij = (y_ij − ȳ_i)/s_i, s_i with divisor n_i − 1, in level order."""
    out = []
    for label, obs in zip(sample.levels, sample.observations):
        if obs.size < 2:
            raise InvalidInput(f"level {label:g} needs at least 2 observations for residuals, got {obs.size}")
        s = float(np.std(obs, ddof=1))
        if not s > 0:
            raise DegenerateVariance(f"level {label:g} has zero sample variance")
        out.append((obs - obs.mean()) / s)
    return np.concatenate(out)


# ---------- replicate generation --------------------------------------------


def _draw_sufficient(rng: np.random.Generator, n: np.ndarray, mu0: float, sigma2: np.ndarray) -> SufficientStats:
    mean = mu0 + np.sqrt(sigma2 / n) * rng.standard_normal(n.size)
    # n σ̄²* / σ² ~ χ²(n − 1) = 2·Gamma((n − 1)/2); shape 0 yields 0 for singletons
    var = sigma2 * 2.0 * rng.standard_gamma((n - 1) / 2.0) / n
    return SufficientStats(n=n, mean=mean, var=var)


def _draw_raw(rng: np.random.Generator, n: np.ndarray, mu0: float, sigma2: np.ndarray) -> SufficientStats:
    scale = np.repeat(np.sqrt(sigma2), n)
    y = mu0 + scale * rng.standard_normal(int(n.sum()))
    return summarize_flat(y, n)


def _draw_resampled(
    rng: np.random.Generator, n: np.ndarray, mu0: float, sigma2: np.ndarray, residuals: np.ndarray
) -> SufficientStats:
    idx = rng.integers(0, residuals.size, size=int(n.sum()))
    y = mu0 + residuals[idx] * np.repeat(np.sqrt(sigma2), n)
    return summarize_flat(y, n)


def _replicate_value(stats: SufficientStats, kind: StatisticKind, cfg: ScenarioConfig) -> float | None:
    try:
        stat = compute_statistic(stats, kind, cfg)
    except (OrdMeansError, ArithmeticError):
        return None
    if not stat.converged or not np.isfinite(stat.value):
        return None
    return stat.value


def _run_chunk(
    indices: np.ndarray,
    seed: int,
    n: np.ndarray,
    null_fit: NullFit,
    kind: StatisticKind,
    cfg: ScenarioConfig,
    generation: Generation | None,
    residuals: np.ndarray | None,
) -> list[float | None]:
    values: list[float | None] = []
    for r in indices:
        rng = replicate_rng(seed, int(r))
        if residuals is not None:
            stats = _draw_resampled(rng, n, null_fit.mu0, null_fit.sigma2, residuals)
        elif generation is Generation.RAW_SAMPLES:
            stats = _draw_raw(rng, n, null_fit.mu0, null_fit.sigma2)
        else:
            stats = _draw_sufficient(rng, n, null_fit.mu0, null_fit.sigma2)
        values.append(_replicate_value(stats, kind, cfg))
    return values


def _run(
    plan: BootstrapPlan,
    n: np.ndarray,
    null_fit: NullFit,
    observed: float,
    residuals: np.ndarray | None,
) -> BootstrapResult:
    if null_fit.scenario is not plan.config.scenario:
        raise InvalidInput(
            f"null fit is for scenario {null_fit.scenario.value}, plan uses {plan.config.scenario.value}"
        )
    if np.any(null_fit.sigma2 <= 0):
        raise DegenerateVariance("null fit has a non-positive variance; cannot generate replicates")
    generation = None if residuals is not None else plan.generation
    n_chunks = min(plan.replicates, plan.workers * REPLICATE_CHUNKS_PER_WORKER)
    chunks = np.array_split(np.arange(plan.replicates), n_chunks)
    logger.info(
        "Running %d %s bootstrap replicates on %d worker(s)",
        plan.replicates,
        plan.mode.value,
        plan.workers,
        extra={"statistic": plan.kind.value, "seed": plan.seed},
    )
    parts = Parallel(n_jobs=plan.workers)(
        delayed(_run_chunk)(idx, plan.seed, n, null_fit, plan.kind, plan.config, generation, residuals)
        for idx in chunks
    )
    values = [v for part in parts for v in part]
    ok = [v for v in values if v is not None]
    result = BootstrapResult(
        mode=plan.mode,
        generation=generation,
        observed=float(observed),
        replicates=plan.replicates,
        valid=len(ok),
        exceedances=sum(1 for v in ok if v > observed),
        failures=len(values) - len(ok),
        seed=plan.seed,
        values=tuple(values) if plan.keep_values else (),
    )
    if result.failure_warning:
        logger.warning(
            "%d of %d bootstrap replicates failed to fit (%.2f%%)",
            result.failures,
            result.replicates,
            100.0 * result.failure_rate,
        )
    logger.info(
        "Bootstrap finished: p=%s",
        result.p_value,
        extra={"valid": result.valid, "failures": result.failures, "exceedances": result.exceedances},
    )
    return result


def parametric_bootstrap(null_fit: NullFit, n: np.ndarray, plan: BootstrapPlan, observed: float) -> BootstrapResult:
    """Replicates Y*_ij ~ N(μ̂_H0, σ̂²_iH0) with level sizes ``n``; refit and compare with ``observed``."""
    if plan.mode is not BootstrapMode.PARAMETRIC:
        raise InvalidInput(f"plan mode is {plan.mode.value}, expected parametric")
    n = np.asarray(n, dtype=np.int64)
    if n.size != null_fit.sigma2.size:
        raise InvalidInput(f"{n.size} level sizes for a null fit with {null_fit.sigma2.size} levels")
    return _run(plan, n, null_fit, observed, residuals=None)


def nonparametric_bootstrap(
    sample: GroupedSample, null_fit: NullFit, plan: BootstrapPlan, observed: float
) -> BootstrapResult:
    """Resample pooled standardized residuals, rescale by σ̃_iH0 and shift by μ̂_H0."""
    if plan.mode is not BootstrapMode.NONPARAMETRIC:
        raise InvalidInput(f"plan mode is {plan.mode.value}, expected nonparametric")
    if sample.k != null_fit.sigma2.size:
        raise InvalidInput(f"sample has {sample.k} levels, null fit has {null_fit.sigma2.size}")
    residuals = standardized_residuals(sample)
    return _run(plan, sample.n, null_fit, observed, residuals=residuals)
