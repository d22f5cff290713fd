import numpy as np
import pandas as pd
import pytest

import noise
from noise import (MIN_PATHS, CorrelationSpec, correlation_from_samples, dump_path_csv, estimate_correlation,
                   mix_seed, recursion_covariance, sample_path, sample_paths)
from numerics import TimeGrid


def _ensemble(corr, grid, count, offset=0):
    return sample_paths(corr, grid, [mix_seed(99, offset + i) for i in range(count)])


@pytest.mark.parametrize("Gamma,gamma", [(-1.0, 1.0), (1.0, 0.0), (1.0, -2.0)])
def test_invalid_correlation_parameters(Gamma, gamma):
    with pytest.raises(ValueError):
        CorrelationSpec(Gamma, gamma)


def test_correlation_function():
    corr = CorrelationSpec(1.0, 0.5)
    assert corr.strength == pytest.approx(0.25)
    assert corr.alpha(3.0, 1.0) == pytest.approx(0.25 * np.exp(-1.0))
    assert corr.alpha(1.0, 3.0) == corr.alpha(3.0, 1.0)


def test_mix_seed_is_stable_and_distinct():
    seeds = [mix_seed(20240501, i) for i in range(1000)]
    assert len(set(seeds)) == 1000
    assert seeds[3] == mix_seed(20240501, 3)
    assert mix_seed(1, 0) != mix_seed(2, 0)
    assert all(0 <= s < 2 ** 64 for s in seeds)


def test_recursion_preserves_stationary_variance():
    corr = CorrelationSpec(1.0, 2.0)
    covariance, variance = recursion_covariance(corr, 0.37)
    assert variance == pytest.approx(corr.strength, rel=1e-14)
    assert covariance == pytest.approx(corr.alpha(0.37, 0.0), rel=1e-14)


def test_paths_are_reproducible():
    corr = CorrelationSpec(1.0, 0.5)
    grid = TimeGrid.uniform(2.0, 0.01)
    first = sample_path(corr, grid, 42)
    second = sample_path(corr, grid, 42)
    assert np.array_equal(first.samples, second.samples)
    assert not np.array_equal(first.samples, sample_path(corr, grid, 43).samples)


def test_batch_rows_match_single_paths():
    corr = CorrelationSpec(1.0, 0.5)
    grid = TimeGrid.uniform(1.0, 0.05)
    batch = sample_paths(corr, grid, [5, 6, 7])
    assert np.array_equal(batch[1], sample_path(corr, grid, 6).samples)


def test_zero_coupling_gives_zero_path():
    grid = TimeGrid.uniform(1.0, 0.1)
    path = sample_path(CorrelationSpec(0.0, 1.0), grid, 1)
    assert np.all(path.samples == 0)


def test_estimate_correlation_needs_enough_paths():
    corr = CorrelationSpec(1.0, 0.5)
    grid = TimeGrid.uniform(1.0, 0.1)
    paths = [sample_path(corr, grid, s) for s in range(10)]
    with pytest.raises(ValueError):
        estimate_correlation(paths, 0, 1)


def test_estimate_correlation_from_paths():
    corr = CorrelationSpec(1.0, 0.5)
    grid = TimeGrid.uniform(1.0, 0.1)
    paths = [sample_path(corr, grid, mix_seed(3, s)) for s in range(400)]
    estimate, stderr = estimate_correlation(paths, 10, 0)
    assert abs(estimate - corr.alpha(1.0, 0.0)) <= 5 * stderr


def test_ensemble_correlation_matches_target():
    corr = CorrelationSpec(1.0, 0.5)
    grid = TimeGrid.uniform(4.0, 0.05)
    samples = _ensemble(corr, grid, 4000)
    for i, j in [(0, 0), (80, 80), (80, 40), (80, 0), (20, 10)]:
        target = corr.alpha(grid.points[i], grid.points[j])
        estimate, stderr = correlation_from_samples(samples, i, j)
        assert abs(estimate - target) <= 5 * stderr
        vanishing, stderr0 = correlation_from_samples(samples, i, j, conjugate=False)
        assert abs(vanishing) <= 5 * stderr0


def test_scaled_innovation_is_detected(monkeypatch):
    monkeypatch.setattr(noise, "NOISE_VARIANCE_SCALE", 2.0)
    corr = CorrelationSpec(1.0, 0.5)
    grid = TimeGrid.uniform(4.0, 0.05)
    samples = _ensemble(corr, grid, 2000)
    last = grid.size - 1
    estimate, stderr = correlation_from_samples(samples, last, last)
    assert abs(estimate - corr.strength) > 5 * stderr


def test_dump_path_csv(tmp_path):
    corr = CorrelationSpec(1.0, 0.5)
    grid = TimeGrid.uniform(1.0, 0.1)
    path = sample_path(corr, grid, 11)
    target = dump_path_csv(path, tmp_path / "path.csv")
    with open(target, encoding="utf-8") as f:
        assert f.readline().strip() == "# seed: 11"
    frame = pd.read_csv(target, comment="#")
    assert list(frame.columns) == ["t", "re_z_star", "im_z_star"]
    assert len(frame) == grid.size
    assert frame["re_z_star"].to_numpy() == pytest.approx(path.samples.real, rel=1e-8, abs=1e-12)


@pytest.mark.slow
@pytest.mark.parametrize("gamma", [0.2, 2.0])
def test_noise_statistics_on_long_horizon(gamma):
    corr = CorrelationSpec(1.0, gamma)
    grid = TimeGrid.uniform(5.0, 0.05)
    samples = _ensemble(corr, grid, 20000, offset=50_000)
    pairs = [(0, 0), (100, 100), (100, 0), (100, 50), (50, 25), (60, 59), (30, 0), (90, 10), (70, 35), (40, 20)]
    for i, j in pairs:
        target = corr.alpha(grid.points[i], grid.points[j])
        estimate, stderr = correlation_from_samples(samples, i, j)
        assert abs(estimate - target) <= 4 * stderr
        vanishing, stderr0 = correlation_from_samples(samples, i, j, conjugate=False)
        assert abs(vanishing) <= 4 * stderr0


def test_correlation_depends_only_on_lag():
    corr = CorrelationSpec(1.0, 0.5)
    grid = TimeGrid.uniform(4.0, 0.05)
    samples = _ensemble(corr, grid, 4000, offset=9000)
    target = corr.alpha(0.5, 0.0)
    estimates = []
    for i, j in [(20, 10), (50, 40), (75, 65), (80, 70)]:
        estimate, stderr = correlation_from_samples(samples, i, j)
        assert abs(estimate - target) <= 5 * stderr
        estimates.append((estimate, stderr))
    first, first_err = estimates[0]
    for estimate, stderr in estimates[1:]:
        assert abs(estimate - first) <= 5 * np.hypot(stderr, first_err)


def test_estimate_correlation_rejects_mixed_grids():
    corr = CorrelationSpec(1.0, 0.5)
    grid = TimeGrid.uniform(1.0, 0.1)
    other = TimeGrid.uniform(1.0, 0.05)
    paths = [sample_path(corr, grid, s) for s in range(MIN_PATHS)]
    paths.append(sample_path(corr, other, 1))
    with pytest.raises(ValueError, match="one grid"):
        estimate_correlation(paths, 0, 1)


def test_repeated_path_has_zero_stderr():
    corr = CorrelationSpec(1.0, 0.5)
    grid = TimeGrid.uniform(1.0, 0.1)
    path = sample_path(corr, grid, 21)
    estimate, stderr = estimate_correlation([path] * MIN_PATHS, 7, 2)
    expected = np.conj(path.samples[7]) * path.samples[2]
    assert estimate == pytest.approx(expected, rel=1e-12)
    assert stderr == pytest.approx(0.0, abs=1e-12)
