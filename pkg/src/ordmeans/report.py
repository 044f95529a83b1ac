"""Run one analysis end to end and build the JSON/text report."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .bootstrap import (
    BootstrapMode,
    BootstrapPlan,
    BootstrapResult,
    Generation,
    nonparametric_bootstrap,
    parametric_bootstrap,
)
from .config import BOOTSTRAP_WORKERS, DEFAULT_MAX_ITER, DEFAULT_REPLICATES, DEFAULT_SEED, DEFAULT_TOL
from .errors import InvalidInput, OrdMeansError
from .estimation import (
    NullFit,
    RestrictedFit,
    check_condition1,
    check_condition2,
    check_profile_uniqueness,
    concavity_interval,
    fit_alternative,
)
from .ingest import InputTable
from .isotonic import Block
from .lrt import StatisticKind, compute_statistic, default_kind
from .models import (
    GroupedSample,
    Order,
    Scenario,
    ScenarioConfig,
    Solver,
    SufficientStats,
    pooled_total_variance,
)
from .storage import dumps_report, save_json

logger = logging.getLogger(__name__)

TOOL_NAME = "ordmeans"

BOOTSTRAP_CHOICES = ("parametric", "nonparametric", "both", "none")
STATISTIC_CHOICES = ("auto", "chibar", "ebar", "lrt")


@dataclass(frozen=True)
class RunOptions:
    """Everything one ``run`` needs besides the input table."""

    scenario: Scenario
    sigma2: float | str | None = None  # value or "pooled"
    ratios: tuple[float, ...] | str | None = None  # values or "sample"
    statistic: str = "auto"
    bootstrap: str = "parametric"
    replicates: int = DEFAULT_REPLICATES
    seed: int = DEFAULT_SEED
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    solver: Solver = Solver.AIM
    mean_order: Order = Order.INCREASING
    variance_order: Order = Order.DECREASING
    workers: int = BOOTSTRAP_WORKERS
    generation: Generation = Generation.SUFFICIENT_ONLY
    strict: bool = False
    dump_replicates: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "scenario", Scenario(self.scenario))
        if self.statistic not in STATISTIC_CHOICES:
            raise InvalidInput(f"unknown statistic {self.statistic!r}; choose from {', '.join(STATISTIC_CHOICES)}")
        if self.bootstrap not in BOOTSTRAP_CHOICES:
            raise InvalidInput(f"unknown bootstrap mode {self.bootstrap!r}")
        if isinstance(self.sigma2, str) and self.sigma2 != "pooled":
            raise InvalidInput(f"sigma2 must be a number or 'pooled', got {self.sigma2!r}")
        if isinstance(self.ratios, str) and self.ratios != "sample":
            raise InvalidInput(f"ratios must be numbers or 'sample', got {self.ratios!r}")

    @property
    def bootstrap_modes(self) -> tuple[BootstrapMode, ...]:
        if self.bootstrap == "none":
            return ()
        if self.bootstrap == "both":
            return (BootstrapMode.PARAMETRIC, BootstrapMode.NONPARAMETRIC)
        return (BootstrapMode(self.bootstrap),)


def build_config(stats: SufficientStats, options: RunOptions) -> ScenarioConfig:
    """Resolve ``pooled``/``sample`` shorthands against the data and build the scenario config."""
    sigma2 = options.sigma2
    ratios = options.ratios
    if sigma2 == "pooled" or ratios == "sample":
        pooled = pooled_total_variance(stats)
        if sigma2 == "pooled":
            sigma2 = pooled
        if ratios == "sample":
            ratios = tuple((stats.var / pooled).tolist())
    return ScenarioConfig(
        options.scenario,
        ratios=ratios,
        sigma2=sigma2,
        mean_order=options.mean_order,
        variance_order=options.variance_order,
        tol=options.tol,
        max_iter=options.max_iter,
        solver=options.solver,
    )


def resolve_statistic(options: RunOptions, cfg: ScenarioConfig) -> StatisticKind:
    """Map the ``--statistic`` choice to a statistic valid for the scenario."""
    if options.statistic == "auto":
        return default_kind(cfg)
    if options.statistic == "lrt":
        if cfg.scenario is Scenario.KNOWN_RATIO:
            raise InvalidInput("statistic lrt needs the unknown or ordered scenario; use chibar or ebar")
        return default_kind(cfg)
    kind = StatisticKind(options.statistic)
    if cfg.scenario is not Scenario.KNOWN_RATIO:
        raise InvalidInput(f"statistic {kind.value} needs the known-ratio scenario")
    if kind is StatisticKind.CHI_BAR_SQ and cfg.sigma2 is None:
        raise InvalidInput("statistic chibar needs --sigma2 (a value or 'pooled')")
    return kind


# ---------- orientation ------------------------------------------------------


@dataclass(frozen=True)
class Orientation:
    """Map a (mean order, variance order) problem onto increasing means and decreasing variances.

    Decreasing means are handled by negation; increasing variances by reversing
    the level order, which also flips the mean order.
    """

    negate: bool = False
    reverse: bool = False

    @classmethod
    def for_config(cls, cfg: ScenarioConfig) -> Orientation:
        reverse = cfg.scenario is Scenario.ORDERED_VARIANCES and cfg.variance_order is Order.INCREASING
        negate = (cfg.mean_order is Order.DECREASING) != reverse
        return cls(negate=negate, reverse=reverse)

    def stats(self, stats: SufficientStats) -> SufficientStats:
        out = stats.negated() if self.negate else stats
        return out.reversed() if self.reverse else out

    def sample(self, sample: GroupedSample) -> GroupedSample:
        out = sample.negated() if self.negate else sample
        return out.reversed() if self.reverse else out

    def config(self, cfg: ScenarioConfig) -> ScenarioConfig:
        ratios = cfg.ratios
        if ratios is not None and self.reverse:
            ratios = tuple(reversed(ratios))
        return replace(cfg, ratios=ratios, mean_order=Order.INCREASING, variance_order=Order.DECREASING)

    def restore_vector(self, values: np.ndarray, *, signed: bool) -> np.ndarray:
        out = -values if (signed and self.negate) else values
        return out[::-1].copy() if self.reverse else out

    def restore_blocks(self, blocks: tuple[Block, ...], k: int) -> tuple[Block, ...]:
        sign = -1.0 if self.negate else 1.0
        out = [Block(b.start, b.end, sign * b.value, b.weight) for b in blocks]
        if self.reverse:
            out = [Block(k - b.end, k - b.start, b.value, b.weight) for b in reversed(out)]
        return tuple(out)


def restore_fit(fit: RestrictedFit, orientation: Orientation) -> RestrictedFit:
    """Express an H1 fit in the caller's level order and sign."""
    k = fit.mu.size
    return replace(
        fit,
        mu=orientation.restore_vector(fit.mu, signed=True),
        sigma2=orientation.restore_vector(fit.sigma2, signed=False),
        blocks=orientation.restore_blocks(fit.blocks, k),
    )


def restore_null(fit: NullFit, orientation: Orientation) -> NullFit:
    return replace(
        fit,
        mu0=-fit.mu0 if orientation.negate else fit.mu0,
        sigma2=orientation.restore_vector(fit.sigma2, signed=False),
    )


# ---------- report sections --------------------------------------------------


def _estimates(stats: SufficientStats, cfg: ScenarioConfig) -> dict[str, Any]:
    """Per-level moments plus the H1 fit of every scenario that can be fitted."""
    out: dict[str, Any] = {
        "levels": list(stats.levels),
        "n": stats.n.tolist(),
        "mean": stats.mean.tolist(),
        "var": stats.var.tolist(),
        "var_unbiased": stats.to_dict()["var_unbiased"],
        "fits": {},
    }
    for scenario in Scenario:
        if scenario is cfg.scenario:
            scfg = cfg
        else:
            scfg = replace(cfg, scenario=scenario, ratios=None, sigma2=None)
        orientation = Orientation.for_config(scfg)
        try:
            fit = fit_alternative(orientation.stats(stats), orientation.config(scfg))
        except OrdMeansError as e:
            out["fits"][scenario.value] = {"error": str(e)}
            continue
        out["fits"][scenario.value] = restore_fit(fit, orientation).to_dict()
    return out


def _conditions(stats: SufficientStats) -> dict[str, Any]:
    left, right = concavity_interval(stats)
    return {
        "condition1": check_condition1(stats),
        "condition2": check_condition2(stats),
        "concavity_interval": [left, right],
        "mean_bracket": [float(stats.mean.min()), float(stats.mean.max())],
        "profile_unique": check_profile_uniqueness(stats),
    }


def _condition_warnings(cfg: ScenarioConfig, conditions: dict[str, Any]) -> list[str]:
    warnings = []
    if cfg.scenario is Scenario.UNKNOWN_VARIANCES:
        if not conditions["condition1"]:
            warnings.append("Condition 1 fails: the restricted MLE under unknown variances may not be unique")
        if not conditions["profile_unique"]:
            warnings.append("mean bracket exceeds the concavity interval: the H0 profile maximizer may not be unique")
    if cfg.scenario is Scenario.ORDERED_VARIANCES and not conditions["condition2"]:
        warnings.append("Condition 2 fails: the restricted MLE under ordered variances may not be unique")
    return warnings


def _dump_path(base: str, mode: BootstrapMode, several: bool) -> Path:
    p = Path(base)
    return p.with_name(f"{p.stem}-{mode.value}{p.suffix}") if several else p


def _bootstrap(
    table: InputTable,
    options: RunOptions,
    kind: StatisticKind,
    ocfg: ScenarioConfig,
    orientation: Orientation,
    ostats: SufficientStats,
    null_fit: NullFit,
    observed: float,
) -> dict[str, BootstrapResult]:
    modes = options.bootstrap_modes
    if BootstrapMode.NONPARAMETRIC in modes and not table.has_raw:
        raise InvalidInput("non-parametric bootstrap needs raw observations (level,value input), not a summary table")
    results: dict[str, BootstrapResult] = {}
    for mode in modes:
        plan = BootstrapPlan(
            mode=mode,
            kind=kind,
            config=ocfg,
            replicates=options.replicates,
            seed=options.seed,
            generation=options.generation,
            workers=options.workers,
            keep_values=options.dump_replicates is not None,
        )
        if mode is BootstrapMode.PARAMETRIC:
            result = parametric_bootstrap(null_fit, ostats.n, plan, observed)
        else:
            assert table.sample is not None
            result = nonparametric_bootstrap(orientation.sample(table.sample), null_fit, plan, observed)
        if options.dump_replicates is not None:
            path = _dump_path(options.dump_replicates, mode, len(modes) > 1)
            count = result.dump_values(path)
            logger.info("Wrote %d replicate values to %s", count, path)
        results[mode.value] = result
    return results


def analyze(table: InputTable, options: RunOptions) -> dict[str, Any]:
    """Fit, test and bootstrap ``table``; returns the report object."""
    stats = table.stats
    if stats.k < 2:
        raise InvalidInput(f"testing homogeneity needs at least 2 levels, got k={stats.k}")
    cfg = build_config(stats, options)
    kind = resolve_statistic(options, cfg)
    orientation = Orientation.for_config(cfg)
    ostats = orientation.stats(stats)
    ocfg = orientation.config(cfg)

    conditions = _conditions(stats)
    warnings = _condition_warnings(cfg, conditions)
    for w in warnings:
        logger.warning(w)

    stat = compute_statistic(ostats, kind, ocfg)
    converged = stat.converged
    if not converged:
        msg = f"{kind.value} fits did not converge within {cfg.max_iter} iterations"
        warnings.append(msg)
        logger.warning(msg)
    logger.info(
        "Statistic %s = %.6g",
        kind.value,
        stat.value,
        extra={"scenario": cfg.scenario.value, "converged": converged},
    )

    boot = _bootstrap(table, options, kind, ocfg, orientation, ostats, stat.null_fit, stat.value)
    for result in boot.values():
        if result.failure_warning:
            warnings.append(
                f"{result.failures} of {result.replicates} {result.mode.value} replicates failed to fit"
            )

    return {
        "tool": {"name": TOOL_NAME, "version": __version__},
        "scenario": cfg.to_dict(),
        "direction": {"means": cfg.mean_order.value, "variances": cfg.variance_order.value},
        "input": {**table.to_dict(), **stats.to_dict()},
        "estimates": _estimates(stats, cfg),
        "null_fit": restore_null(stat.null_fit, orientation).to_dict(),
        "alt_fit": restore_fit(stat.alt_fit, orientation).to_dict(),
        "statistic": stat.to_dict(),
        "conditions": conditions,
        "bootstrap": {mode: result.to_dict() for mode, result in boot.items()},
        "replicates": options.replicates if boot else None,
        "seed": options.seed if boot else None,
        "warnings": warnings,
        "converged": converged,
    }


# ---------- rendering --------------------------------------------------------


def _fmt(x: Any, width: int = 10) -> str:
    if x is None:
        return "-".rjust(width)
    if isinstance(x, float):
        return f"{x:.4f}".rjust(width)
    return str(x).rjust(width)


def render_text(report: dict[str, Any]) -> str:
    """Plain-text rendering: one table of per-level estimates, one of the test."""
    est = report["estimates"]
    fits = {name: fit for name, fit in est["fits"].items() if "mu" in fit}
    header = ["level", "n", "mean", "var", "s2"]
    for name in fits:
        header += [f"mu[{name}]", f"s2[{name}]"]
    lines = [f"{report['tool']['name']} {report['tool']['version']}  scenario={report['scenario']['scenario']}", ""]
    lines.append("".join(_fmt(h, 14 if "[" in h else 10) for h in header))
    for i, level in enumerate(est["levels"]):
        row = [_fmt(f"{level:g}"), _fmt(est["n"][i]), _fmt(est["mean"][i]), _fmt(est["var"][i]), _fmt(est["var_unbiased"][i])]
        for fit in fits.values():
            row += [_fmt(fit["mu"][i], 14), _fmt(fit["sigma2"][i], 14)]
        lines.append("".join(row))
    for name, fit in est["fits"].items():
        if "error" in fit:
            lines.append(f"  {name}: not fitted ({fit['error']})")

    stat = report["statistic"]
    lines += ["", f"statistic      {stat['kind']} ({stat['scale']})", f"value          {stat['value']:.6g}"]
    lines.append(f"mu_H0          {report['null_fit']['mu0']:.6g}")
    for mode, result in report["bootstrap"].items():
        p = result["p_value"]
        p_text = "n/a" if p is None else f"{p:.4f}"
        lines.append(
            f"p ({mode:<13}) {p_text}  [(#+1)/(M+1) = {result['p_value_plus_one']:.4f}, "
            f"valid={result['valid']}, failures={result['failures']}]"
        )
    if report["bootstrap"]:
        lines.append(f"replicates     {report['replicates']}  seed={report['seed']}")
    cond = report["conditions"]
    lines += [
        "",
        f"condition 1    {cond['condition1']}",
        f"condition 2    {cond['condition2']}",
        "concavity      [{:.4f}, {:.4f}] vs means [{:.4f}, {:.4f}] -> unique={}".format(
            *cond["concavity_interval"], *cond["mean_bracket"], cond["profile_unique"]
        ),
        f"converged      {report['converged']}",
    ]
    for w in report["warnings"]:
        lines.append(f"warning: {w}")
    return "\n".join(lines) + "\n"


def format_report(report: dict[str, Any], fmt: str = "json") -> str:
    if fmt == "text":
        return render_text(report)
    return dumps_report(report)


def write_report(report: dict[str, Any], path: str | Path, fmt: str = "json") -> None:
    """Write the report as JSON (canonical) or text."""
    if fmt == "json":
        save_json(path, report)
        return
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(render_text(report), encoding="utf-8")
