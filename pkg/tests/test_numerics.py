import numpy as np
import pytest

from errors import GridError, IntegrationError
from numerics import (ComplexSeries, TimeGrid, cumulative_simpson, cumulative_trapezoid, fine_index,
                      mean_and_stderr, propagator_step, rk4_integrate)


def test_uniform_grid_hits_end_exactly():
    grid = TimeGrid.uniform(1.0, 0.1)
    assert grid.size == 11
    assert grid.t_end == 1.0
    assert np.all(grid.steps <= 0.1 + 1e-15)


def test_breakpoints_are_grid_points():
    grid = TimeGrid.from_breakpoints([0.0, 0.04, 0.08, 0.12, 0.16], 0.01)
    for t in (0.04, 0.08, 0.12, 0.16):
        assert grid.points[grid.index_of(t)] == t


@pytest.mark.parametrize("points", [[0.0, 0.2, 0.1], [0.0, 0.0, 0.1], [0.0]])
def test_invalid_grids_are_rejected(points):
    with pytest.raises(GridError):
        TimeGrid(np.array(points), 1.0)


def test_spacing_above_nominal_is_rejected():
    with pytest.raises(GridError):
        TimeGrid(np.array([0.0, 0.5, 1.0]), 0.1)


def test_refined_grid_interleaves_midpoints():
    grid = TimeGrid.uniform(1.0, 0.25)
    fine = grid.refined()
    assert fine.size == 2 * grid.size - 1
    assert fine.dt_nominal == pytest.approx(0.125)
    assert np.array_equal(fine.points[0::2], grid.points)
    assert fine.points[1] == pytest.approx(0.125)


def test_sample_indices_include_last_point():
    grid = TimeGrid.uniform(1.0, 0.1)
    assert list(grid.sample_indices(3)) == [0, 3, 6, 9, 10]
    assert list(grid.sample_indices(5)) == [0, 5, 10]


def test_index_of_rejects_off_grid_times():
    grid = TimeGrid.uniform(1.0, 0.1)
    with pytest.raises(GridError):
        grid.index_of(0.05)


def test_rk4_matches_exponential():
    grid = TimeGrid.uniform(1.0, 0.01)
    series = rk4_integrate(lambda t, y, step, stage: -1j * y, np.array([1.0 + 0j]), grid)
    exact = np.exp(-1j * grid.points)
    assert np.max(np.abs(series.values[:, 0] - exact)) < 1e-8


def test_rk4_error_is_fourth_order():
    rate = -0.5 + 1j
    errors = []
    for dt in (0.1, 0.05):
        grid = TimeGrid.uniform(2.0, dt)
        final = rk4_integrate(lambda t, y, step, stage: rate * y, np.array([1.0 + 0j]), grid, store=False)
        errors.append(abs(final[0] - np.exp(2.0 * rate)))
    assert 14.0 <= errors[0] / errors[1] <= 18.0


def test_rk4_reports_half_step_indices():
    grid = TimeGrid.uniform(0.3, 0.1)
    seen = []

    def rhs(t, y, step, stage):
        seen.append((fine_index(step, stage), t))
        return np.zeros_like(y)

    final = rk4_integrate(rhs, np.zeros(1), grid, store=False)
    fine = grid.refined()
    assert final.shape == (1,)
    assert [j for j, _ in seen[:4]] == [0, 1, 1, 2]
    for j, t in seen:
        assert fine.points[j] == pytest.approx(t)


def test_rk4_raises_on_blow_up():
    grid = TimeGrid.uniform(1.0, 0.1)
    with pytest.raises(IntegrationError) as info:
        rk4_integrate(lambda t, y, step, stage: np.full_like(y, np.inf), np.ones(1), grid)
    assert info.value.time == pytest.approx(0.1)


def test_cumulative_trapezoid_is_exact_for_linear():
    grid = TimeGrid.uniform(2.0, 0.1)
    result = cumulative_trapezoid(ComplexSeries(grid, grid.points))
    assert result.values[0] == 0
    assert np.allclose(result.values, grid.points ** 2 / 2, atol=1e-12)


def test_cumulative_simpson_is_exact_for_quadratics():
    fine = TimeGrid.uniform(1.0, 0.1).refined()
    result = cumulative_simpson(ComplexSeries(fine, fine.points ** 2))
    assert np.allclose(result.values, fine.points ** 3 / 3, atol=1e-12)


def test_cumulative_simpson_integrates_step_functions_with_left_limits():
    grid = TimeGrid.uniform(1.0, 0.25)
    fine = grid.refined()
    levels = np.array([1.0, 3.0, -2.0, 5.0])
    right = np.append(np.repeat(levels, 2), levels[-1])
    left = np.concatenate([[levels[0]], np.repeat(levels, 2)])
    result = cumulative_simpson(ComplexSeries(fine, right), left)
    assert result.values[-1] == pytest.approx(np.sum(levels) * 0.25)
    assert result.values[2] == pytest.approx(0.25)


def test_cumulative_simpson_needs_half_step_grid():
    grid = TimeGrid.uniform(1.0, 0.25)
    with pytest.raises(GridError):
        cumulative_simpson(ComplexSeries(TimeGrid(grid.points[:4], 0.25), np.ones(4)))


def test_propagator_step_of_diagonal_generator():
    generator = np.diag([1.0, -2.0])
    U = propagator_step(generator, 0.3)
    assert np.allclose(U, np.diag(np.exp(-1j * 0.3 * np.array([1.0, -2.0]))))


def test_mean_and_stderr():
    mean, stderr = mean_and_stderr(np.array([1.0, 2.0, 3.0, 4.0]))
    assert mean == pytest.approx(2.5)
    assert stderr == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)
