"""Tests for the restricted (H1) and common-mean (H0) fitters."""

import numpy as np
import pytest

from src.ordmeans.errors import DegenerateVariance, InvalidInput
from src.ordmeans.estimation import (
    aim_state,
    check_condition1,
    check_condition2,
    check_profile_uniqueness,
    concavity_interval,
    fit_alternative,
    fit_case1,
    fit_case2,
    fit_case3,
    fit_null,
    graybill_deal,
    h0_fit_case2,
    h0_fit_case3,
    h0_mean_case1,
    isotonic_profile_scan,
    log_likelihood,
    misra_start,
    profile_log_likelihood,
    profile_score,
)
from src.ordmeans.lrt import lrt_unknown
from src.ordmeans.models import Scenario, ScenarioConfig, Solver, SufficientStats, pooled_total_variance
from tests.oracle import GridSpec, cone_grid_max, profile_grid_max, random_stats

KNOWN = Scenario.KNOWN_RATIO
UNKNOWN = Scenario.UNKNOWN_VARIANCES
ORDERED = Scenario.ORDERED_VARIANCES


def _sample_ratio_config(stats: SufficientStats) -> ScenarioConfig:
    s2 = pooled_total_variance(stats)
    return ScenarioConfig(KNOWN, ratios=tuple(stats.var / s2), sigma2=s2)


class TestReferenceFits:
    """Estimates from the printed carbide/KAM summary."""

    def test_case1_sample_ratios(self, kam):
        fit = fit_case1(kam, _sample_ratio_config(kam))
        np.testing.assert_allclose(fit.mu, [0.815, 0.833, 0.867, 0.867], atol=1e-3)
        assert fit.iterations == 1
        assert fit.converged
        assert fit.uniqueness_certificate is True

    def test_case1_unknown_sigma2_uses_h1_residuals(self, kam):
        cfg = ScenarioConfig(KNOWN)
        fit = fit_case1(kam, cfg)
        s2 = float(np.sum(kam.n * kam.rss(fit.mu))) / kam.N
        np.testing.assert_allclose(fit.sigma2, s2)

    def test_case2(self, kam):
        fit = fit_case2(kam, ScenarioConfig(UNKNOWN))
        np.testing.assert_allclose(fit.mu, [0.815, 0.833, 0.867, 0.867], atol=1e-3)
        np.testing.assert_allclose(fit.sigma2, [0.035, 0.024, 0.017011, 0.022162], atol=1e-4)
        assert fit.converged
        assert fit.uniqueness_certificate is True

    def test_case3(self, kam):
        fit = fit_case3(kam, ScenarioConfig(ORDERED))
        np.testing.assert_allclose(fit.mu, [0.815, 0.833, 0.866, 0.866], atol=1e-3)
        assert fit.sigma2[2] == pytest.approx(fit.sigma2[3])
        assert fit.sigma2[2] == pytest.approx(0.0183, abs=5e-4)
        assert np.all(np.diff(fit.sigma2) <= 1e-15)
        assert fit.uniqueness_certificate is False

    def test_conditions(self, kam):
        assert check_condition1(kam)
        assert not check_condition2(kam)
        left, right = concavity_interval(kam)
        assert left == pytest.approx(0.740, abs=1e-3)
        assert right == pytest.approx(0.988, abs=1e-3)
        assert check_profile_uniqueness(kam)

    def test_h0_case1(self, kam):
        plain = h0_mean_case1(kam, ScenarioConfig(KNOWN, sigma2=0.03))
        assert plain.mu0 == pytest.approx(0.82699, abs=1e-5)
        assert plain.iterations == 0
        weighted = h0_mean_case1(kam, _sample_ratio_config(kam))
        assert weighted.mu0 == pytest.approx(0.83122, abs=1e-5)

    def test_h0_case2(self, kam):
        fit = h0_fit_case2(kam, ScenarioConfig(UNKNOWN))
        assert fit.mu0 == pytest.approx(0.831, abs=1e-3)
        np.testing.assert_allclose(fit.sigma2, kam.rss(fit.mu0))
        np.testing.assert_allclose(fit.sigma2, [0.035256, 0.024004, 0.018521, 0.022529], atol=1e-4)
        assert fit.converged
        assert profile_score(kam, fit.mu0) == pytest.approx(0.0, abs=1e-6)

    def test_h0_case2_matches_profile_grid(self, kam):
        fit = h0_fit_case2(kam, ScenarioConfig(UNKNOWN))
        grid = GridSpec(0.815, 0.870, 1_000_001)
        arg, value = profile_grid_max(kam, grid)
        assert abs(fit.mu0 - arg) <= 2 * grid.step
        assert profile_log_likelihood(kam, fit.mu0) >= value - 1e-9

    def test_h0_case3(self, kam):
        fit = h0_fit_case3(kam, ScenarioConfig(ORDERED))
        assert fit.mu0 == pytest.approx(0.8307, abs=1e-3)
        assert fit.sigma2[2] == pytest.approx(fit.sigma2[3])
        assert fit.sigma2[2] == pytest.approx(0.0195, abs=1e-3)
        assert np.all(np.diff(fit.sigma2) <= 1e-15)
        assert fit.converged

    def test_graybill_deal_and_misra_start(self, kam):
        gd = graybill_deal(kam)
        assert kam.mean.min() < gd < kam.mean.max()
        assert misra_start(kam) == pytest.approx(gd, abs=0.01)


class TestTieAndEdgeCases:
    def test_equal_means_take_zero_iterations(self):
        stats = SufficientStats(n=[5, 6, 7], mean=[1.0, 1.0, 1.0], var=[1.0, 0.5, 0.8])
        for cfg in (ScenarioConfig(KNOWN), ScenarioConfig(UNKNOWN), ScenarioConfig(ORDERED)):
            fit = fit_alternative(stats, cfg)
            assert fit.iterations == 0
            assert fit.mu.tolist() == [1.0, 1.0, 1.0]
        null = h0_fit_case2(stats, ScenarioConfig(UNKNOWN))
        assert null.method == "tie"
        assert null.mu0 == 1.0

    def test_feasible_data_takes_one_case1_iteration(self):
        stats = SufficientStats(n=[5, 6], mean=[0.0, 1.0], var=[1.0, 1.0])
        fit = fit_case1(stats, ScenarioConfig(KNOWN, sigma2=1.0))
        assert fit.iterations == 1
        assert fit.mu.tolist() == [0.0, 1.0]

    def test_zero_variance_is_degenerate(self):
        stats = SufficientStats(n=[3, 3], mean=[1.0, 0.0], var=[0.0, 1.0])
        with pytest.raises(DegenerateVariance, match="level"):
            fit_case2(stats, ScenarioConfig(UNKNOWN))
        with pytest.raises(DegenerateVariance):
            h0_fit_case3(stats, ScenarioConfig(ORDERED))

    def test_singleton_level_rejected_for_h0_start(self):
        stats = SufficientStats(n=[1, 3], mean=[1.0, 0.0], var=[0.0, 1.0])
        with pytest.raises(InvalidInput, match="n_i >= 2"):
            graybill_deal(stats)

    def test_constant_data_case1(self):
        stats = SufficientStats(n=[2, 2], mean=[1.0, 1.0], var=[0.0, 0.0])
        with pytest.raises(DegenerateVariance):
            fit_case1(stats, ScenarioConfig(KNOWN))

    def test_scenario_mismatch(self, kam):
        with pytest.raises(InvalidInput, match="expected scenario"):
            fit_case2(kam, ScenarioConfig(KNOWN))

    def test_two_step_solver_converges_to_same_fit(self, kam):
        aim = fit_case3(kam, ScenarioConfig(ORDERED, tol=1e-10, max_iter=10_000))
        two = fit_case3(kam, ScenarioConfig(ORDERED, tol=1e-10, max_iter=10_000, solver=Solver.TWO_STEP))
        np.testing.assert_allclose(two.mu, aim.mu, atol=1e-6)
        np.testing.assert_allclose(two.sigma2, aim.sigma2, atol=1e-6)
        assert two.final_mu_delta <= 1e-10
        assert two.final_sigma2_delta <= 1e-10

    def test_non_convergence_is_reported(self, kam):
        fit = fit_case3(kam, ScenarioConfig(ORDERED, max_iter=1))
        assert not fit.converged
        assert fit.iterations == 1

    def test_fit_null_dispatch(self, kam):
        assert fit_null(kam, ScenarioConfig(KNOWN)).method == "closed-form"
        assert fit_null(kam, ScenarioConfig(ORDERED)).method == "alternating"


class TestRandomized:
    """Ascent, feasibility and oracle agreement on random instances."""

    @pytest.fixture
    def instances(self):
        rng = np.random.default_rng(11)
        return [random_stats(rng, int(rng.integers(2, 7))) for _ in range(200)]

    def test_case2_ascent_and_feasibility(self, instances):
        for stats in instances:
            fit = fit_case2(stats, ScenarioConfig(UNKNOWN, tol=1e-12, max_iter=5000))
            assert np.all(np.diff(fit.trace) >= -1e-9)
            assert np.all(np.diff(fit.mu) >= -1e-12)
            np.testing.assert_allclose(fit.sigma2, stats.rss(fit.mu))
            assert fit.log_lik == pytest.approx(log_likelihood(stats, fit.mu, fit.sigma2))

    def test_case3_ascent_and_feasibility(self, instances):
        for stats in instances:
            fit = fit_case3(stats, ScenarioConfig(ORDERED, tol=1e-12, max_iter=5000))
            assert np.all(np.diff(fit.trace) >= -1e-9)
            assert np.all(np.diff(fit.mu) >= -1e-12)
            assert np.all(np.diff(fit.sigma2) <= 1e-12)

    def test_h0_case3_ascent(self, instances):
        for stats in instances:
            fit = h0_fit_case3(stats, ScenarioConfig(ORDERED, tol=1e-12, max_iter=5000))
            assert np.all(np.diff(fit.trace) >= -1e-9)
            assert np.all(np.diff(fit.sigma2) <= 1e-12)

    def test_iterates_stay_in_aim_box(self, instances):
        for stats in instances:
            box = aim_state(stats)
            fit = fit_case2(stats, ScenarioConfig(UNKNOWN))
            assert np.all(np.abs(fit.mu) <= box.a)
            assert np.all(1.0 / fit.sigma2 <= box.nu_upper * (1 + 1e-12))
            assert np.all(1.0 / fit.sigma2 >= box.nu_lower * (1 - 1e-12))

    def test_h1_likelihood_dominates_h0(self, instances):
        """With a unique restricted MLE the H1 maximum is at least the H0 maximum."""
        unique = [s for s in instances if check_condition1(s)]
        assert unique
        for stats in unique:
            cfg = ScenarioConfig(UNKNOWN, tol=1e-12, max_iter=5000)
            assert fit_case2(stats, cfg).log_lik >= h0_fit_case2(stats, cfg).log_lik - 1e-8

    def test_h0_case2_matches_profile_grid(self):
        """Unique-profile instances: Newton/bisection lands within two grid steps of the scan."""
        rng = np.random.default_rng(5)
        for _ in range(100):
            k = int(rng.integers(2, 6))
            mean = rng.uniform(0.0, 1.0, size=k)
            mean[:2] = (0.0, 1.0)
            stats = SufficientStats(
                n=rng.integers(5, 60, size=k),
                mean=mean,
                var=rng.uniform(1.0, 2.0, size=k),
            )
            assert check_profile_uniqueness(stats)
            fit = h0_fit_case2(stats, ScenarioConfig(UNKNOWN))
            grid = GridSpec(float(stats.mean.min()), float(stats.mean.max()), 100_001)
            arg, _ = profile_grid_max(stats, grid)
            assert abs(fit.mu0 - arg) <= 2 * grid.step


class TestConeOracle:
    def test_constraints_inactive_recovers_sample_moments(self):
        stats = SufficientStats(n=[20, 20], mean=[0.0, 0.5], var=[2.0, 1.0])
        mu_grid, s2_grid = GridSpec(-0.5, 1.0, 31), GridSpec(0.5, 2.5, 41)
        mu, s2, _ = cone_grid_max(stats, mu_grid, s2_grid)
        np.testing.assert_allclose(mu, stats.mean, atol=mu_grid.step + 1e-9)
        np.testing.assert_allclose(s2, stats.var, atol=s2_grid.step + 1e-9)
        fit = fit_case3(stats, ScenarioConfig(ORDERED))
        np.testing.assert_allclose(fit.mu, stats.mean)
        np.testing.assert_allclose(fit.sigma2, stats.var)

    def test_case3_dominates_grid(self):
        stats = SufficientStats(n=[10, 12], mean=[0.2, 0.0], var=[1.0, 1.5])
        assert check_condition2(stats)
        _, _, value = cone_grid_max(stats, GridSpec(-0.2, 0.4, 61), GridSpec(0.5, 2.5, 81))
        fit = fit_case3(stats, ScenarioConfig(ORDERED, tol=1e-12, max_iter=10_000))
        assert value <= fit.log_lik + 1e-6
        assert fit.log_lik - value < 0.05

    def test_h0_case3_dominates_grid(self):
        stats = SufficientStats(n=[10, 12, 8], mean=[0.2, 0.0, 0.1], var=[1.0, 1.5, 0.9])
        _, _, value = cone_grid_max(stats, GridSpec(-0.2, 0.4, 61), GridSpec(0.5, 2.5, 41), common_mean=True)
        fit = h0_fit_case3(stats, ScenarioConfig(ORDERED, tol=1e-12, max_iter=10_000))
        assert value <= fit.log_lik + 1e-6

    def test_constant_means_h0_equals_h1(self):
        stats = SufficientStats(n=[10, 12, 8], mean=[0.3, 0.3, 0.3], var=[1.5, 1.0, 0.8])
        mu_grid, s2_grid = GridSpec(0.0, 0.6, 13), GridSpec(0.5, 2.0, 21)
        _, _, h1 = cone_grid_max(stats, mu_grid, s2_grid)
        _, _, h0 = cone_grid_max(stats, mu_grid, s2_grid, common_mean=True)
        assert h1 == pytest.approx(h0, abs=1e-12)

    def test_k4_unsupported(self, kam):
        from src.ordmeans.errors import Unsupported

        with pytest.raises(Unsupported):
            cone_grid_max(kam, GridSpec(0.8, 0.9, 3), GridSpec(0.01, 0.04, 3))


def _spread_stats(rng: np.random.Generator, k: int) -> SufficientStats:
    n = rng.integers(5, 61, size=k)
    return SufficientStats(n=n, mean=rng.normal(0.0, 2.0, size=k), var=rng.uniform(0.05, 2.0, size=k))


def _multimodal_instances(seed: int, count: int, k_range=(2, 7)) -> list[SufficientStats]:
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        stats = _spread_stats(rng, int(rng.integers(*k_range)))
        if not check_profile_uniqueness(stats):
            out.append(stats)
    return out


def test_h0_case2_finds_global_mode_of_bimodal_profile():
    """Newton from Graybill–Deal reaches a minor mode here; the fit must still return the global one."""
    stats = SufficientStats(
        n=[24, 32, 15, 31, 23],
        mean=[-0.580, -4.003, 0.731, -4.425, -1.260],
        var=[0.895, 0.985, 0.203, 0.800, 1.122],
    )
    assert not check_profile_uniqueness(stats)
    cfg = ScenarioConfig(UNKNOWN)
    fit = h0_fit_case2(stats, cfg)
    grid = GridSpec(float(stats.mean.min()), float(stats.mean.max()), 1_000_001)
    arg, value = profile_grid_max(stats, grid)
    assert fit.mu0 == pytest.approx(-3.92, abs=0.01)
    assert abs(fit.mu0 - arg) <= 2 * grid.step
    assert profile_log_likelihood(stats, fit.mu0) >= value - 1e-9
    assert fit.converged
    assert lrt_unknown(stats, cfg).value == pytest.approx(47.0, abs=1.0)


def test_h0_case2_global_on_multimodal_profiles():
    """Instances outside the concavity interval: the fit stays in [min ȳ, max ȳ] and beats a fine grid."""
    for stats in _multimodal_instances(seed=31, count=40):
        fit = h0_fit_case2(stats, ScenarioConfig(UNKNOWN))
        lo, hi = float(stats.mean.min()), float(stats.mean.max())
        assert lo <= fit.mu0 <= hi
        _, value = profile_grid_max(stats, GridSpec(lo, hi, 1_000_001))
        assert profile_log_likelihood(stats, fit.mu0) >= value - 1e-9


def test_h0_case2_score_vanishes_at_fit():
    """The returned common mean is a root of the profile score on random instances."""
    rng = np.random.default_rng(13)
    for _ in range(100):
        stats = _spread_stats(rng, int(rng.integers(2, 7)))
        fit = h0_fit_case2(stats, ScenarioConfig(UNKNOWN))
        assert fit.method in ("newton", "grid-bisection")
        scale = float(np.sum(stats.n / stats.var))
        assert abs(profile_score(stats, fit.mu0)) <= 1e-6 * scale
        np.testing.assert_allclose(fit.sigma2, stats.rss(fit.mu0))


def test_h0_case3_matches_case2_when_variance_order_is_inactive():
    """σ̄²_1 > σ̄²_2 by a wide margin: the ordered-variance H0 fit is the unrestricted one."""
    stats = SufficientStats(n=[20, 20], mean=[0.0, 0.3], var=[2.0, 0.5])
    plain = h0_fit_case2(stats, ScenarioConfig(UNKNOWN))
    ordered = h0_fit_case3(stats, ScenarioConfig(ORDERED, tol=1e-12, max_iter=10_000, solver=Solver.TWO_STEP))
    assert ordered.converged
    assert ordered.mu0 == pytest.approx(plain.mu0, abs=1e-6)
    np.testing.assert_allclose(ordered.sigma2, plain.sigma2, atol=1e-6)
    assert ordered.log_lik == pytest.approx(plain.log_lik, abs=1e-8)


def test_isotonic_profile_scan_is_feasible():
    """The grid path is non-decreasing and stays inside the range of the sample means."""
    rng = np.random.default_rng(17)
    for _ in range(50):
        stats = _spread_stats(rng, int(rng.integers(2, 7)))
        mu = isotonic_profile_scan(stats)
        assert np.all(np.diff(mu) >= 0)
        assert stats.mean.min() <= mu.min() and mu.max() <= stats.mean.max()


def test_case2_beats_random_isotonic_candidates():
    """k = 3: the restricted fit is at least the profile at 10^5 random non-decreasing means."""
    rng = np.random.default_rng(23)
    cfg = ScenarioConfig(UNKNOWN, tol=1e-12, max_iter=5000)
    for _ in range(100):
        stats = _spread_stats(rng, 3)
        fit = fit_case2(stats, cfg)
        lo, hi = float(stats.mean.min()), float(stats.mean.max())
        mu = np.sort(rng.uniform(lo, hi, size=(100_000, 3)), axis=1)
        d = stats.mean[None, :] - mu
        profile = -0.5 * np.sum(stats.n * (np.log(stats.var + d * d) + 1.0), axis=1)
        assert fit.log_lik >= float(profile.max()) - 1e-8
        assert np.all(np.diff(fit.mu) >= -1e-12)
