"""Shared fixtures: the printed carbide/KAM summary table and a raw sample with the same moments."""

import numpy as np
import pytest

from src.ordmeans.models import GroupedSample, SufficientStats

# n_i, ȳ_i and σ̄²_i (divisor n_i) for carbide counts 0..3
KAM_N = (340, 211, 54, 18)
KAM_MEAN = (0.815, 0.833, 0.870, 0.854)
KAM_VAR = (0.035, 0.024, 0.017, 0.022)
KAM_LEVELS = (0.0, 1.0, 2.0, 3.0)


@pytest.fixture
def kam() -> SufficientStats:
    return SufficientStats(n=KAM_N, mean=KAM_MEAN, var=KAM_VAR, levels=KAM_LEVELS)


@pytest.fixture
def kam_sample() -> GroupedSample:
    """Normal draws rescaled so every level reproduces the table moments exactly."""
    rng = np.random.default_rng(20240601)
    groups = []
    for n, m, v in zip(KAM_N, KAM_MEAN, KAM_VAR):
        z = rng.standard_normal(n)
        z = (z - z.mean()) / z.std()
        groups.append(m + np.sqrt(v) * z)
    return GroupedSample(levels=KAM_LEVELS, observations=tuple(groups))


@pytest.fixture
def kam_summary_csv(tmp_path):
    path = tmp_path / "kam.csv"
    rows = ["level,n,mean,var"]
    rows += [f"{int(lv)},{n},{m!r},{v!r}" for lv, n, m, v in zip(KAM_LEVELS, KAM_N, KAM_MEAN, KAM_VAR)]
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def kam_long_csv(tmp_path, kam_sample):
    path = tmp_path / "kam_long.csv"
    rows = ["level,value"]
    for level, obs in zip(kam_sample.levels, kam_sample.observations):
        rows += [f"{int(level)},{y!r}" for y in obs.tolist()]
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return path
