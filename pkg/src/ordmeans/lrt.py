"""Likelihood-ratio statistics for homogeneity against monotone means."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any

import numpy as np

from .errors import DegenerateVariance, InvalidInput
from .estimation import (
    NullFit,
    RestrictedFit,
    fit_case1,
    fit_case2,
    fit_case3,
    h0_fit_case2,
    h0_fit_case3,
    h0_mean_case1,
)
from .models import Scenario, ScenarioConfig, SufficientStats


class StatisticKind(str, Enum):
    CHI_BAR_SQ = "chibar"
    E_BAR_SQ = "ebar"
    NEG2_LOG_LAMBDA_TILDE = "lrt-unknown"
    NEG2_LOG_LAMBDA_I = "lrt-ordered"

    @property
    def scale(self) -> str:
        """Label of the scale the value is reported on."""
        if self is StatisticKind.CHI_BAR_SQ:
            return "chi-bar-square"
        if self is StatisticKind.E_BAR_SQ:
            return "E-bar-square (1 - Lambda^(2/N))"
        return "-2 log Lambda"

    @property
    def scenario(self) -> Scenario:
        if self in (StatisticKind.CHI_BAR_SQ, StatisticKind.E_BAR_SQ):
            return Scenario.KNOWN_RATIO
        if self is StatisticKind.NEG2_LOG_LAMBDA_TILDE:
            return Scenario.UNKNOWN_VARIANCES
        return Scenario.ORDERED_VARIANCES


@dataclass(frozen=True)
class TestStatistic:
    kind: StatisticKind
    value: float
    null_fit: NullFit
    alt_fit: RestrictedFit

    @property
    def converged(self) -> bool:
        return self.null_fit.converged and self.alt_fit.converged

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "scale": self.kind.scale, "value": self.value}


def _clamp_gap(value: float) -> float:
    # rounding can push a zero gap a few ulps below zero
    return max(0.0, value)


def chi_bar_sq(stats: SufficientStats, sigma2: float, ratios: np.ndarray | None = None) -> TestStatistic:
    """χ̄² = Σ_i c_i⁻¹ n_i(μ̂ᴵ_i − μ̂_H0)²/σ² for known variances σ²_i = c_iσ² (c_i = 1 by default)."""
    if not (np.isfinite(sigma2) and sigma2 > 0):
        raise InvalidInput(f"chi-bar-square needs a positive known variance, got {sigma2}")
    cfg = ScenarioConfig(
        Scenario.KNOWN_RATIO,
        ratios=None if ratios is None else tuple(np.asarray(ratios, dtype=float)),
        sigma2=sigma2,
    )
    c = cfg.ratios_for(stats.k)
    null = h0_mean_case1(stats, cfg)
    alt = fit_case1(stats, cfg)
    value = float(np.sum(stats.n / c * (alt.mu - null.mu0) ** 2)) / sigma2
    return TestStatistic(StatisticKind.CHI_BAR_SQ, _clamp_gap(value), null, alt)


def e_bar_sq(stats: SufficientStats, ratios: np.ndarray | None = None) -> TestStatistic:
    """Ē² = Σ c_i⁻¹ χ̄²_i / Σ_i c_i⁻¹ n_i(σ̄²_i + (ȳ_i − μ̂_H0)²), σ² unknown."""
    cfg = ScenarioConfig(
        Scenario.KNOWN_RATIO,
        ratios=None if ratios is None else tuple(np.asarray(ratios, dtype=float)),
    )
    c = cfg.ratios_for(stats.k)
    null = h0_mean_case1(stats, cfg)
    alt = fit_case1(stats, cfg)
    numerator = float(np.sum(stats.n / c * (alt.mu - null.mu0) ** 2))
    denominator = float(np.sum(stats.n / c * stats.rss(null.mu0)))
    value = min(1.0, _clamp_gap(numerator / denominator))
    return TestStatistic(StatisticKind.E_BAR_SQ, value, null, alt)


def _require_positive(fit_sigma2: np.ndarray, label: str) -> None:
    if np.any(fit_sigma2 <= 0):
        raise DegenerateVariance(f"non-positive {label} variance estimate")


def lrt_unknown(stats: SufficientStats, cfg: ScenarioConfig) -> TestStatistic:
    """−2 log Λ̃ = Σ_i n_i log(σ̂²_iH0 / σ̂²_iH1)."""
    if cfg.scenario is not Scenario.UNKNOWN_VARIANCES:
        raise InvalidInput(f"-2 log Lambda-tilde needs the unknown scenario, got {cfg.scenario.value}")
    null = h0_fit_case2(stats, cfg)
    alt = fit_case2(stats, cfg)
    _require_positive(null.sigma2, "H0")
    _require_positive(alt.sigma2, "H1")
    value = float(np.sum(stats.n * np.log(null.sigma2 / alt.sigma2)))
    return TestStatistic(StatisticKind.NEG2_LOG_LAMBDA_TILDE, _clamp_gap(value), null, alt)


def lrt_ordered(stats: SufficientStats, cfg: ScenarioConfig) -> TestStatistic:
    """−2 log Λᴵ = 2[ℓ(μ̂ᴵ, σ̂²ᴵ_H1) − ℓ(μ̂_H0, σ̂²ᴵ_H0)], exponent terms included."""
    if cfg.scenario is not Scenario.ORDERED_VARIANCES:
        raise InvalidInput(f"-2 log Lambda-I needs the ordered scenario, got {cfg.scenario.value}")
    null = h0_fit_case3(stats, cfg)
    alt = fit_case3(stats, cfg)
    _require_positive(null.sigma2, "H0")
    _require_positive(alt.sigma2, "H1")
    value = 2.0 * (alt.log_lik - null.log_lik)
    return TestStatistic(StatisticKind.NEG2_LOG_LAMBDA_I, _clamp_gap(value), null, alt)


def default_kind(cfg: ScenarioConfig) -> StatisticKind:
    """Scenario-to-statistic pairing: known σ² → χ̄², unknown σ² → Ē², otherwise the LRT."""
    if cfg.scenario is Scenario.KNOWN_RATIO:
        return StatisticKind.CHI_BAR_SQ if cfg.sigma2 is not None else StatisticKind.E_BAR_SQ
    if cfg.scenario is Scenario.UNKNOWN_VARIANCES:
        return StatisticKind.NEG2_LOG_LAMBDA_TILDE
    return StatisticKind.NEG2_LOG_LAMBDA_I


def compute_statistic(stats: SufficientStats, kind: StatisticKind, cfg: ScenarioConfig) -> TestStatistic:
    """Evaluate ``kind`` on ``stats`` with the scenario settings of ``cfg``."""
    if kind.scenario is not cfg.scenario:
        raise InvalidInput(f"statistic {kind.value} does not apply to scenario {cfg.scenario.value}")
    ratios = None if cfg.ratios is None else cfg.ratios_for(stats.k)
    if kind is StatisticKind.CHI_BAR_SQ:
        if cfg.sigma2 is None:
            raise InvalidInput("chi-bar-square needs a known sigma2")
        return chi_bar_sq(stats, cfg.sigma2, ratios)
    if kind is StatisticKind.E_BAR_SQ:
        return e_bar_sq(stats, ratios)
    if kind is StatisticKind.NEG2_LOG_LAMBDA_TILDE:
        return lrt_unknown(stats, cfg)
    return lrt_ordered(stats, cfg)

