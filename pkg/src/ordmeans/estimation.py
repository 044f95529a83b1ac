"""Maximum-likelihood fits under monotone means (H1) and common mean (H0).

Every fitter consumes SufficientStats only: for any μ,
Σ_j (y_ij − μ)² = n_i(σ̄²_i + (ȳ_i − μ)²), so all objectives are functions of
(n, ȳ, σ̄²). Log-likelihoods drop the additive constant.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy import optimize

from .config import AIM_MEAN_MARGIN, PROFILE_GRID_POINTS, ROOT_XTOL
from .errors import DegenerateVariance, InvalidInput
from .isotonic import Block, WeightedVector, antitonic_regression, isotonic_regression
from .models import Scenario, ScenarioConfig, Solver, SufficientStats

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RestrictedFit:
    """H1 estimate: isotonic means plus per-level variances."""

    mu: np.ndarray
    sigma2: np.ndarray
    scenario: Scenario
    iterations: int
    converged: bool
    log_lik: float
    uniqueness_certificate: bool | None = None
    trace: tuple[float, ...] = ()
    blocks: tuple[Block, ...] = ()
    final_mu_delta: float = 0.0
    final_sigma2_delta: float = 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "scenario": self.scenario.value,
            "mu": self.mu.tolist(),
            "sigma2": self.sigma2.tolist(),
            "iterations": self.iterations,
            "converged": self.converged,
            "log_lik": self.log_lik,
            "uniqueness_certificate": self.uniqueness_certificate,
            "blocks": [[b.start, b.end] for b in self.blocks],
            "final_mu_delta": self.final_mu_delta,
            "final_sigma2_delta": self.final_sigma2_delta,
        }


@dataclass(frozen=True)
class NullFit:
    """H0 estimate: common mean plus per-level variances."""

    mu0: float
    sigma2: np.ndarray
    scenario: Scenario
    iterations: int
    converged: bool
    log_lik: float
    trace: tuple[float, ...] = field(default=())
    method: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "scenario": self.scenario.value,
            "mu0": self.mu0,
            "sigma2": self.sigma2.tolist(),
            "iterations": self.iterations,
            "converged": self.converged,
            "log_lik": self.log_lik,
            "method": self.method,
        }


@dataclass(frozen=True)
class AimState:
    """Compact boxes of the alternating iterative method.

    Means live in D_a = {μ isotonic, −a ≤ μ_1, μ_k ≤ a}; precisions in
    [nu_lower, nu_upper]. The upper precision bound is 1/min_i min_θ s²_i(θ)
    over θ ∈ [min ȳ, max ȳ]; the lower one uses the largest s²_i(θ) on that
    bracket so that every iterate lies inside the box.
    """

    a: float
    nu_lower: float
    nu_upper: float


def aim_state(stats: SufficientStats) -> AimState:
    lo, hi = float(stats.mean.min()), float(stats.mean.max())
    a = max(abs(lo), abs(hi)) + AIM_MEAN_MARGIN
    # s²_i(θ) = σ̄²_i + (ȳ_i − θ)² is minimized at θ = clamp(ȳ_i) = ȳ_i
    s2_min = stats.rss(np.clip(stats.mean, lo, hi))
    s2_max = stats.var + np.maximum((stats.mean - lo) ** 2, (stats.mean - hi) ** 2)
    return AimState(a=a, nu_lower=1.0 / float(s2_max.max()), nu_upper=1.0 / float(s2_min.min()))


def log_likelihood(stats: SufficientStats, mu: float | np.ndarray, sigma2: np.ndarray) -> float:
    """Normal log-likelihood Σ_i {−n_i/2 ln σ²_i − n_i(σ̄²_i + (ȳ_i − μ_i)²)/(2σ²_i)}."""
    sigma2 = np.asarray(sigma2, dtype=float)
    return float(np.sum(-0.5 * stats.n * (np.log(sigma2) + stats.rss(mu) / sigma2)))


def profile_log_likelihood(stats: SufficientStats, mu: float | np.ndarray) -> float:
    """Log-likelihood with σ²_i profiled out: −Σ_i n_i/2 ln(σ̄²_i + (ȳ_i − μ_i)²)."""
    return float(np.sum(-0.5 * stats.n * np.log(stats.rss(mu))))


def _require(cfg: ScenarioConfig, scenario: Scenario) -> None:
    if cfg.scenario is not scenario:
        raise InvalidInput(f"expected scenario {scenario.value}, got {cfg.scenario.value}")


def _require_positive_variances(stats: SufficientStats) -> None:
    zero = np.flatnonzero(stats.var <= 0)
    if zero.size:
        labels = ", ".join(f"{stats.levels[i]:g}" for i in zero)
        raise DegenerateVariance(f"zero within-level variance at level(s) {labels}")


def _require_replicated(stats: SufficientStats) -> None:
    single = np.flatnonzero(stats.n < 2)
    if single.size:
        labels = ", ".join(f"{stats.levels[i]:g}" for i in single)
        raise InvalidInput(f"level(s) {labels} need n_i >= 2 for the start value")


def _all_equal(x: np.ndarray) -> bool:
    return bool(np.all(x == x[0]))


# ---------- Uniqueness conditions -------------------------------------------


def check_condition1(stats: SufficientStats) -> bool:
    """σ̄²_i > max{(ȳ_i − min ȳ)², (ȳ_i − max ȳ)²} for all i: unique unknown-variance MLE."""
    lo, hi = stats.mean.min(), stats.mean.max()
    bound = np.maximum((stats.mean - lo) ** 2, (stats.mean - hi) ** 2)
    return bool(np.all(stats.var > bound))


def check_condition2(stats: SufficientStats) -> bool:
    """min σ̄²_i > 2(max ȳ − min ȳ): unique ordered-variance MLE."""
    return bool(stats.var.min() > 2.0 * (stats.mean.max() - stats.mean.min()))


def concavity_interval(stats: SufficientStats) -> tuple[float, float]:
    """Interval [max(ȳ_i − σ̄_i), min(ȳ_i + σ̄_i)] where the H0 profile is strictly concave."""
    sd = np.sqrt(stats.var)
    return float(np.max(stats.mean - sd)), float(np.min(stats.mean + sd))


def check_profile_uniqueness(stats: SufficientStats) -> bool:
    """[min ȳ, max ȳ] lies inside the concavity interval, so the H0 maximizer is unique."""
    left, right = concavity_interval(stats)
    return bool(left <= stats.mean.min() and stats.mean.max() <= right)


# ---------- H1 fits ---------------------------------------------------------


def fit_case1(stats: SufficientStats, cfg: ScenarioConfig) -> RestrictedFit:
    """Known variance ratios σ²_i = c_iσ²: isotonic regression with weights n_i/c_i."""
    _require(cfg, Scenario.KNOWN_RATIO)
    c = cfg.ratios_for(stats.k)
    if _all_equal(stats.mean):
        mu, blocks, iterations = stats.mean.copy(), (), 0
    else:
        sol = isotonic_regression(WeightedVector(stats.mean, stats.n / c))
        mu, blocks, iterations = sol.fitted, sol.blocks, 1
    if cfg.sigma2 is None:
        s2 = float(np.sum(stats.n * stats.rss(mu) / c)) / stats.N
    else:
        s2 = cfg.sigma2
    if not s2 > 0:
        raise DegenerateVariance("estimated common variance is zero")
    sigma2 = c * s2
    ll = log_likelihood(stats, mu, sigma2)
    return RestrictedFit(
        mu=mu,
        sigma2=sigma2,
        scenario=Scenario.KNOWN_RATIO,
        iterations=iterations,
        converged=True,
        log_lik=ll,
        uniqueness_certificate=True,
        trace=(ll,),
        blocks=blocks,
    )


def _alternate(
    stats: SufficientStats,
    cfg: ScenarioConfig,
    variance_step: Callable[[np.ndarray], np.ndarray],
    certificate: bool,
    stop_on_variances: bool,
    start: np.ndarray | None = None,
) -> RestrictedFit:
    """Alternate the isotonic mean step and ``variance_step`` until the configured stop rule.

    The first mean step is weighted by ``start`` (default: the sample variances σ̄²).
    """
    if _all_equal(stats.mean):
        mu = stats.mean.copy()
        sigma2 = variance_step(mu)
        ll = log_likelihood(stats, mu, sigma2)
        return RestrictedFit(mu, sigma2, cfg.scenario, 0, True, ll, certificate, (ll,))

    box = aim_state(stats)
    mu_prev, sigma2_prev = stats.mean, stats.var if start is None else np.asarray(start, dtype=float)
    ll_prev = log_likelihood(stats, mu_prev, sigma2_prev)
    best: tuple[float, np.ndarray, np.ndarray, tuple[Block, ...]] | None = None
    trace: list[float] = []
    converged = False
    d_mu = d_s2 = np.inf
    iteration = 0
    for iteration in range(1, cfg.max_iter + 1):
        nu = np.clip(1.0 / sigma2_prev, box.nu_lower, box.nu_upper)
        sol = isotonic_regression(WeightedVector(stats.mean, stats.n * nu))
        mu = np.clip(sol.fitted, -box.a, box.a)
        sigma2 = variance_step(mu)
        ll = log_likelihood(stats, mu, sigma2)
        trace.append(ll)
        if best is None or ll >= best[0]:
            best = (ll, mu, sigma2, sol.blocks)
        d_mu = float(np.max(np.abs(mu - mu_prev)))
        d_s2 = float(np.max(np.abs(sigma2 - sigma2_prev)))
        logger.debug("iteration %d: loglik=%.10g dmu=%.3g dsigma2=%.3g", iteration, ll, d_mu, d_s2)
        if cfg.solver is Solver.AIM:
            done = abs(ll - ll_prev) <= cfg.tol
        else:
            done = d_mu <= cfg.tol and (not stop_on_variances or d_s2 <= cfg.tol)
        mu_prev, sigma2_prev, ll_prev = mu, sigma2, ll
        if done:
            converged = True
            break

    assert best is not None
    if not converged:
        logger.debug(
            "%s fit did not converge in %d iterations", cfg.scenario.value, cfg.max_iter,
            extra={"scenario": cfg.scenario.value, "iterations": iteration},
        )
    return RestrictedFit(
        mu=best[1],
        sigma2=best[2],
        scenario=cfg.scenario,
        iterations=iteration,
        converged=converged,
        log_lik=best[0],
        uniqueness_certificate=certificate,
        trace=tuple(trace),
        blocks=best[3],
        final_mu_delta=d_mu,
        final_sigma2_delta=d_s2,
    )


def isotonic_profile_scan(stats: SufficientStats) -> np.ndarray:
    """Non-decreasing means maximizing the unknown-variance profile over a grid on [min ȳ, max ȳ].

    The profile −Σ n_i/2 ln(σ̄²_i + (ȳ_i − μ_i)²) is a sum of per-level terms, so a
    forward pass keeps, for every grid value g, the best path whose last mean is g.
    """
    grid = np.linspace(stats.mean.min(), stats.mean.max(), PROFILE_GRID_POINTS)
    d = stats.mean[:, None] - grid[None, :]
    cost = 0.5 * stats.n[:, None] * np.log(stats.var[:, None] + d * d)
    positions = np.arange(grid.size)
    back = np.zeros((stats.k, grid.size), dtype=np.intp)
    total = cost[0].copy()
    for i in range(1, stats.k):
        running = np.minimum.accumulate(total)
        back[i] = np.maximum.accumulate(np.where(total == running, positions, 0))
        total = cost[i] + running
    j = int(np.argmin(total))
    path = np.empty(stats.k, dtype=np.intp)
    for i in range(stats.k - 1, -1, -1):
        path[i] = j
        j = int(back[i, j])
    return grid[path]


def fit_case2(stats: SufficientStats, cfg: ScenarioConfig) -> RestrictedFit:
    """Unknown, unrestricted variances: alternate PAVA and σ̂²_i = σ̄²_i + (ȳ_i − μ̂_i)².

    Without Condition 1 the alternation can stop at a local maximum, so it is
    restarted from the variances of :func:`isotonic_profile_scan` and the higher
    likelihood is kept.
    """
    _require(cfg, Scenario.UNKNOWN_VARIANCES)
    _require_positive_variances(stats)
    certificate = check_condition1(stats)
    fit = _alternate(stats, cfg, stats.rss, certificate, stop_on_variances=False)
    if certificate or _all_equal(stats.mean):
        return fit
    scanned = _alternate(
        stats, cfg, stats.rss, certificate, stop_on_variances=False,
        start=stats.rss(isotonic_profile_scan(stats)),
    )
    if scanned.log_lik > fit.log_lik:
        logger.debug("grid-scan start improves the restricted fit by %.3g", scanned.log_lik - fit.log_lik)
        return scanned
    return fit


def fit_case3(stats: SufficientStats, cfg: ScenarioConfig) -> RestrictedFit:
    """Non-increasing variances: alternate PAVA on the means and antitonic regression on s²(μ)."""
    _require(cfg, Scenario.ORDERED_VARIANCES)
    _require_positive_variances(stats)

    def variance_step(mu: np.ndarray) -> np.ndarray:
        return antitonic_regression(WeightedVector(stats.rss(mu), stats.n)).fitted

    return _alternate(stats, cfg, variance_step, check_condition2(stats), stop_on_variances=True)


def fit_alternative(stats: SufficientStats, cfg: ScenarioConfig) -> RestrictedFit:
    """Dispatch to the H1 fitter of ``cfg.scenario``."""
    if cfg.scenario is Scenario.KNOWN_RATIO:
        return fit_case1(stats, cfg)
    if cfg.scenario is Scenario.UNKNOWN_VARIANCES:
        return fit_case2(stats, cfg)
    return fit_case3(stats, cfg)


# ---------- H0 fits ---------------------------------------------------------


def h0_mean_case1(stats: SufficientStats, cfg: ScenarioConfig) -> NullFit:
    """Common mean Σ w_i ȳ_i / Σ w_i with w_i = n_i/c_i; σ² from the H0 residuals when unknown."""
    _require(cfg, Scenario.KNOWN_RATIO)
    c = cfg.ratios_for(stats.k)
    w = stats.n / c
    mu0 = float(np.sum(w * stats.mean) / np.sum(w))
    if cfg.sigma2 is None:
        s2 = float(np.sum(stats.n * stats.rss(mu0) / c)) / stats.N
    else:
        s2 = cfg.sigma2
    if not s2 > 0:
        raise DegenerateVariance("estimated common variance is zero")
    sigma2 = c * s2
    ll = log_likelihood(stats, mu0, sigma2)
    return NullFit(mu0, sigma2, Scenario.KNOWN_RATIO, 0, True, ll, (ll,), "closed-form")


def graybill_deal(stats: SufficientStats) -> float:
    """Precision-weighted common mean Σ(n_i ȳ_i/s²_i) / Σ(n_i/s²_i)."""
    _require_replicated(stats)
    w = stats.n / stats.var_unbiased
    return float(np.sum(w * stats.mean) / np.sum(w))


def profile_score(stats: SufficientStats, mu: float) -> float:
    """Derivative of the H0 profile log-likelihood: Σ n_i(ȳ_i − μ)/(σ̄²_i + (ȳ_i − μ)²)."""
    d = stats.mean - mu
    return float(np.sum(stats.n * d / (stats.var + d * d)))


def _profile_score_slope(stats: SufficientStats, mu: float) -> float:
    d = stats.mean - mu
    s = stats.var + d * d
    return float(np.sum(stats.n * (d * d - stats.var) / (s * s)))


def _grid_bisection(stats: SufficientStats, lo: float, hi: float) -> tuple[float, bool]:
    """Scan the profile on a grid, bisect the score around every local peak and keep the highest."""
    grid = np.linspace(lo, hi, PROFILE_GRID_POINTS)
    d = stats.mean[None, :] - grid[:, None]
    values = np.sum(-0.5 * stats.n * np.log(stats.var + d * d), axis=1)
    inner = (values[1:-1] >= values[:-2]) & (values[1:-1] >= values[2:])
    peaks = np.flatnonzero(inner) + 1
    candidates: list[tuple[float, bool]] = [(lo, True), (hi, True)]
    for j in peaks:
        a, b = float(grid[j - 1]), float(grid[j + 1])
        if profile_score(stats, a) > 0 > profile_score(stats, b):
            root, info = optimize.brentq(
                lambda m: profile_score(stats, m), a, b, xtol=ROOT_XTOL, full_output=True
            )
            candidates.append((float(root), bool(info.converged)))
        else:
            candidates.append((float(grid[j]), True))
    return max(candidates, key=lambda c: profile_log_likelihood(stats, c[0]))


def _profile_newton(
    stats: SufficientStats, mu: float, lo: float, hi: float, max_iter: int
) -> tuple[float, list[float], bool, int]:
    """Newton ascent on the profile score inside [lo, hi]; stops at the first non-improving or out-of-bracket step."""
    trace = [log_likelihood(stats, mu, stats.rss(mu))]
    iteration = 0
    for iteration in range(1, max_iter + 1):
        slope = _profile_score_slope(stats, mu)
        if slope >= 0:
            break
        step = profile_score(stats, mu) / slope
        candidate = mu - step
        if not lo <= candidate <= hi:
            break
        ll = log_likelihood(stats, candidate, stats.rss(candidate))
        small = abs(step) <= ROOT_XTOL * (1.0 + abs(mu))
        if ll >= trace[-1]:
            mu = candidate
            trace.append(ll)
        elif not small:
            break
        if small:
            return mu, trace, True, iteration
    return mu, trace, False, iteration


def h0_fit_case2(stats: SufficientStats, cfg: ScenarioConfig) -> NullFit:
    """Maximize the H0 profile likelihood over [min ȳ, max ȳ].

    Newton iteration on the profile score from the Graybill–Deal estimator, checked
    against a grid scan whose local peaks are refined by bisection. The profile can
    have several modes, so the higher of the two results wins.
    """
    _require(cfg, Scenario.UNKNOWN_VARIANCES)
    _require_replicated(stats)
    _require_positive_variances(stats)
    lo, hi = float(stats.mean.min()), float(stats.mean.max())
    if lo == hi:
        ll = log_likelihood(stats, lo, stats.var)
        return NullFit(lo, stats.var.copy(), cfg.scenario, 0, True, ll, (ll,), "tie")

    start = min(max(graybill_deal(stats), lo), hi)
    mu, trace, converged, iteration = _profile_newton(stats, start, lo, hi, cfg.max_iter)
    method = "newton"
    root, root_converged = _grid_bisection(stats, lo, hi)
    ll_root = log_likelihood(stats, root, stats.rss(root))
    if not converged or ll_root > trace[-1] + 1e-10 * (1.0 + abs(trace[-1])):
        if converged:
            logger.debug("grid peak at %.10g beats the Newton mode at %.10g", root, mu)
        else:
            logger.debug("Newton stalled at iteration %d; switching to grid bisection", iteration)
        method = "grid-bisection"
        converged = root_converged
        if ll_root >= trace[-1]:
            mu = root
            trace.append(ll_root)
    sigma2 = stats.rss(mu)
    return NullFit(
        mu0=float(mu),
        sigma2=sigma2,
        scenario=cfg.scenario,
        iterations=len(trace) - 1,
        converged=converged,
        log_lik=trace[-1],
        trace=tuple(trace),
        method=method,
    )


def misra_start(stats: SufficientStats) -> float:
    """Graybill–Deal variant for ordered variances: precisions 1/s²_i made isotonic with weights n_i."""
    _require_replicated(stats)
    tau = isotonic_regression(WeightedVector(1.0 / stats.var_unbiased, stats.n)).fitted
    w = stats.n * tau
    return float(np.sum(w * stats.mean) / np.sum(w))


def h0_fit_case3(stats: SufficientStats, cfg: ScenarioConfig) -> NullFit:
    """Common mean with non-increasing variances: alternate weighted mean and antitonic variances."""
    _require(cfg, Scenario.ORDERED_VARIANCES)
    _require_replicated(stats)
    _require_positive_variances(stats)

    def variance_step(mu: float) -> np.ndarray:
        return antitonic_regression(WeightedVector(stats.rss(mu), stats.n)).fitted

    if _all_equal(stats.mean):
        mu0 = float(stats.mean[0])
        sigma2 = variance_step(mu0)
        ll = log_likelihood(stats, mu0, sigma2)
        return NullFit(mu0, sigma2, cfg.scenario, 0, True, ll, (ll,), "tie")

    mu = misra_start(stats)
    sigma2 = variance_step(mu)
    ll_prev = log_likelihood(stats, mu, sigma2)
    trace = [ll_prev]
    converged = False
    iteration = 0
    for iteration in range(1, cfg.max_iter + 1):
        w = stats.n / sigma2
        mu_new = float(np.sum(w * stats.mean) / np.sum(w))
        sigma2_new = variance_step(mu_new)
        ll = log_likelihood(stats, mu_new, sigma2_new)
        trace.append(ll)
        if cfg.solver is Solver.AIM:
            done = abs(ll - ll_prev) <= cfg.tol
        else:
            done = abs(mu_new - mu) <= cfg.tol and float(np.max(np.abs(sigma2_new - sigma2))) <= cfg.tol
        mu, sigma2, ll_prev = mu_new, sigma2_new, ll
        if done:
            converged = True
            break
    if not converged:
        logger.debug(
            "ordered-variance H0 fit did not converge in %d iterations", cfg.max_iter,
            extra={"scenario": cfg.scenario.value, "iterations": iteration},
        )
    return NullFit(mu, sigma2, cfg.scenario, iteration, converged, ll_prev, tuple(trace), "alternating")


def fit_null(stats: SufficientStats, cfg: ScenarioConfig) -> NullFit:
    """Dispatch to the H0 fitter of ``cfg.scenario``."""
    if cfg.scenario is Scenario.KNOWN_RATIO:
        return h0_mean_case1(stats, cfg)
    if cfg.scenario is Scenario.UNKNOWN_VARIANCES:
        return h0_fit_case2(stats, cfg)
    return h0_fit_case3(stats, cfg)
