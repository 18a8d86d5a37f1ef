import math

import numpy as np
import pytest

import kernelperc as kp


def test_single_cell_grid():
    grid = kp.build_uniform_grid(1)
    assert grid.cell_edges.tolist() == [0.0, 1.0]
    assert grid.weights.tolist() == [1.0]
    assert grid.midpoints.tolist() == [0.5]


def test_four_cell_grid():
    grid = kp.build_uniform_grid(4)
    assert np.allclose(grid.weights, 0.25)
    assert np.allclose(grid.midpoints, [0.125, 0.375, 0.625, 0.875])


def test_large_grid_normalized():
    grid = kp.build_uniform_grid(1000)
    assert abs(grid.weights.sum() - 1.0) <= 1e-12


def test_zero_cells_rejected():
    with pytest.raises(ValueError):
        kp.build_uniform_grid(0)


def test_cell_lookup():
    grid = kp.build_uniform_grid(10)
    assert grid.cell_of(np.array([0.0, 0.05, 0.999, 1.0])).tolist() == [0, 0, 9, 9]


def test_case_study_kernel_values():
    kernel = kp.make_case_study_kernel()
    assert kernel.evaluator(0.0, 0.0) == 0.0
    assert kernel.evaluator(1.0, 1.0) == pytest.approx(10 * math.sqrt(2), abs=1e-12)
    assert kernel.evaluator(1.0, 0.0) == pytest.approx(5.0, abs=1e-12)
    assert kernel.bound == pytest.approx(10 * math.sqrt(2))


def test_kernel_bound_checked_on_tabulation():
    bad = kp.KernelModel(evaluator=lambda x, y: x + y, bound=0.5, name="bad")
    with pytest.raises(ValueError, match="bound"):
        bad.matrix(kp.build_uniform_grid(8))


def test_kernel_registry():
    grid = kp.build_uniform_grid(8)
    assert kp.make_kernel("constant:1.5").evaluator(0.2, 0.9) == pytest.approx(1.5)
    prod = kp.make_kernel("product:0,2")
    assert prod.evaluator(0.5, 0.25) == pytest.approx(2 * 0.5 * 2 * 0.25)
    assert kp.make_kernel("case_study").name == "case_study"
    with pytest.raises(ValueError):
        kp.make_kernel("mystery:1", grid)


def test_table_kernel_roundtrip(tmp_path):
    grid = kp.build_uniform_grid(4)
    table = np.arange(16, dtype=float).reshape(4, 4)
    path = tmp_path / "kernel.csv"
    np.savetxt(path, table, delimiter=",")
    kernel = kp.make_kernel(f"table:{path}", grid)
    assert np.allclose(kernel.matrix(grid), table)
    # nearest-cell lookup off the midpoints
    assert kernel.evaluator(0.0, 0.99) == table[0, 3]


def test_step_kernel_blocks_additive_kernel():
    grid = kp.build_uniform_grid(4)
    kernel = kp.KernelModel(evaluator=lambda x, y: x + y, bound=2.0, name="sum")
    upper, lower = kp.make_step_kernels(kernel, grid, 2)
    assert upper.block_values[1, 1] == pytest.approx(0.875 + 0.875)
    assert lower.block_values[0, 0] == pytest.approx(0.125 + 0.125)


def test_step_kernel_constant_collapses():
    grid = kp.build_uniform_grid(8)
    upper, lower = kp.make_step_kernels(kp.make_kernel("constant:3"), grid, 4)
    assert np.allclose(upper.block_values, 3.0)
    assert np.allclose(lower.block_values, 3.0)


def test_step_kernel_gap_shrinks_with_level():
    grid = kp.build_uniform_grid(100)
    kernel = kp.make_case_study_kernel()
    gaps = {}
    for level in (2, 10):
        upper, lower = kp.make_step_kernels(kernel, grid, level)
        gaps[level] = np.max(upper.block_values - lower.block_values)
    assert gaps[10] < gaps[2]


def test_step_kernel_sandwich_and_refinement():
    grid = kp.build_uniform_grid(96)
    kernel = kp.make_case_study_kernel()
    base = kernel.matrix(grid)
    previous_upper, previous_lower = None, None
    for level in (4, 8, 16):
        upper, lower = kp.make_step_kernels(kernel, grid, level)
        up, low = upper.matrix(grid), lower.matrix(grid)
        assert np.all(low <= base + 1e-12) and np.all(base <= up + 1e-12)
        if previous_upper is not None:
            assert np.all(up <= previous_upper + 1e-12)
            assert np.all(low >= previous_lower - 1e-12)
        previous_upper, previous_lower = up, low


def test_step_kernel_misaligned_level_rejected():
    grid = kp.build_uniform_grid(10)
    with pytest.raises(ValueError, match="divide"):
        kp.make_step_kernels(kp.make_kernel("constant:1"), grid, 3)


def test_measure_case_study():
    grid = kp.build_uniform_grid(16)
    measure = kp.make_threshold_measure([(0, 0.1), (2, 0.9)], grid)
    assert measure.max_threshold == 2
    assert np.allclose(measure.densities[0], 0.1)
    assert np.allclose(measure.densities[1], 0.0)
    assert np.allclose(measure.densities[2], 0.9)
    assert measure.tail_mass == 0.0


def test_measure_normalizes_any_scaling():
    grid = kp.build_uniform_grid(8)
    measure = kp.make_threshold_measure([(0, 3.0), (1, 9.0)], grid)
    assert np.allclose(measure.densities.sum(axis=0), 1.0, atol=1e-10)
    assert np.allclose(measure.densities[0], 0.25)


def test_measure_degenerate_seed_and_unit_threshold():
    grid = kp.build_uniform_grid(8)
    all_seeds = kp.make_threshold_measure([(0, 1.0)], grid)
    assert np.allclose(all_seeds.densities[0], 1.0)
    unit = kp.make_threshold_measure([(1, 1.0)], grid)
    assert np.allclose(unit.densities[0], 0.0)
    assert np.allclose(unit.densities[1], 1.0)


def test_measure_rejects_bad_input():
    grid = kp.build_uniform_grid(8)
    with pytest.raises(ValueError):
        kp.make_threshold_measure([(0, -0.1)], grid)
    with pytest.raises(ValueError):
        kp.make_threshold_measure([(0, 0.0)], grid)
    with pytest.raises(ValueError):
        kp.make_threshold_measure([(-1, 0.5)], grid)


def test_measure_tail_mass_tracks_clipped_thresholds():
    grid = kp.build_uniform_grid(8)
    measure = kp.make_threshold_measure(
        [(0, 0.5), (1, 0.3), (90, 0.2)], grid, max_threshold=64
    )
    assert measure.max_threshold == 1
    assert measure.tail_mass == pytest.approx(0.2)
    assert np.allclose(measure.densities.sum(axis=0), 1.0)


def test_measure_type_dependent_densities():
    grid = kp.build_uniform_grid(4)
    ramp = grid.midpoints
    measure = kp.make_threshold_measure([(0, ramp), (1, 1.0 - ramp)], grid)
    assert np.allclose(measure.densities[0], ramp)
