import math

import numpy as np
import pytest

import kernelperc as kp
from kernelperc.operators import infection_map, infection_map_derivative

from oracles import scalar_min_root


def scalar_system(seed_mass=0.1, threshold=1, level=2.0):
    masses = np.zeros((threshold + 1, 1))
    masses[0, 0] = seed_mass
    masses[threshold, 0] = 1.0 - seed_mass
    return kp.FiniteTypeSystem(
        type_count=1,
        kernel_d=np.array([[level]]),
        initial_masses=masses,
        max_threshold=threshold,
    )


def random_system(rng, types=4, k_max=3):
    kernel = rng.random((types, types)) * 3.0
    masses = rng.random((k_max + 1, types))
    masses /= masses.sum()
    return kp.FiniteTypeSystem(types, kernel, masses, k_max)


def test_state_masses_at_zero_reproduce_initials():
    rng = np.random.default_rng(0)
    sys = random_system(rng)
    masses = kp.state_masses(sys, np.zeros(4))
    assert np.allclose(masses, sys.initial_masses, atol=1e-14)


def test_state_masses_scalar_closed_form():
    sys = scalar_system()
    z = np.array([0.3])
    masses = kp.state_masses(sys, z)
    lam = 2.0 * 0.3
    assert masses[0, 0] == pytest.approx(-0.3 + 0.1 + 0.9 * (1 - math.exp(-lam)), abs=1e-14)
    assert masses[1, 0] == pytest.approx(0.9 * math.exp(-lam), abs=1e-14)


def test_state_masses_symmetric_under_type_swap():
    kernel = np.array([[1.0, 0.5], [0.5, 1.0]])
    masses = np.array([[0.05, 0.05], [0.45, 0.45]])
    sys = kp.FiniteTypeSystem(2, kernel, masses, 1)
    out = kp.state_masses(sys, np.array([0.2, 0.2]))
    assert out[:, 0] == pytest.approx(out[:, 1], abs=1e-14)


def test_mass_conservation_along_iteration():
    rng = np.random.default_rng(1)
    sys = random_system(rng)
    z = np.zeros(4)
    for _ in range(30):
        masses = kp.state_masses(sys, z)
        total = (masses[0] + z).sum() + masses[1:].sum()
        assert total == pytest.approx(1.0, abs=1e-12)
        z = np.minimum(z + masses[0], 1.0)


def test_first_joint_zero_all_seeds():
    masses = np.array([[0.25, 0.75]])
    sys = kp.FiniteTypeSystem(2, np.ones((2, 2)), masses, 0)
    z_hat, tau = kp.first_joint_zero(sys)
    assert np.allclose(z_hat, masses[0], atol=1e-12)
    assert tau == pytest.approx(1.0, abs=1e-12)


def test_first_joint_zero_scalar_matches_oracle():
    sys = scalar_system()
    z_hat, tau = kp.first_joint_zero(sys)
    root = scalar_min_root(2.0, [(0, 0.1), (1, 0.9)])
    assert tau == pytest.approx(root, abs=1e-9)


def test_first_joint_zero_matches_step_kernel_solver(small_case_ctx):
    grid = small_case_ctx.grid
    measure = small_case_ctx.measure
    _, lower = kp.make_step_kernels(kp.make_case_study_kernel(), grid, 20)
    system = kp.system_from_step_kernel(lower, grid, measure)
    _, tau = kp.first_joint_zero(system, tolerance=1e-13)
    picard = kp.solve_picard(kp.OperatorContext(grid, lower, measure), tolerance=1e-13)
    assert tau == pytest.approx(picard.integral, abs=1e-8)


def test_first_joint_zero_minimal_from_any_start_below():
    rng = np.random.default_rng(2)
    sys = random_system(rng)
    z_hat, _ = kp.first_joint_zero(sys)
    for _ in range(100):
        z = z_hat * rng.random(4)
        for _ in range(20_000):
            z_next = np.minimum(z + kp.state_masses(sys, z)[0], 1.0)
            if np.max(np.abs(z_next - z)) < 1e-12:
                break
            z = z_next
        assert np.allclose(z, z_hat, atol=1e-8)


def test_stability_margin_decoupled_types():
    masses = np.array([[0.2, 0.3], [0.3, 0.2]])
    sys = kp.FiniteTypeSystem(2, np.zeros((2, 2)), masses, 1)
    w = np.array([0.4, 0.6])
    assert kp.stability_margin(sys, np.zeros(2), w) == pytest.approx(-0.4)


def test_stability_margin_scalar_matches_finite_difference():
    sys = scalar_system()
    z_hat, _ = kp.first_joint_zero(sys)
    margin = kp.stability_margin(sys, z_hat, np.array([1.0]))
    eps = 1e-7
    up = kp.state_masses(sys, z_hat + eps)[0, 0]
    down = kp.state_masses(sys, z_hat - eps)[0, 0]
    slope = (up - down) / (2 * eps)
    assert margin == pytest.approx(slope, abs=1e-6)
    assert margin == pytest.approx(-1.0 + 2.0 * kp.state_masses(sys, z_hat)[1, 0], abs=1e-12)


def test_embed_step_function_examples():
    grid = kp.build_uniform_grid(4)
    whole = kp.embed_step_function(grid, (range(0, 4),), np.array([0.4]))
    assert np.allclose(whole, 0.4)
    halves = kp.embed_step_function(grid, (range(0, 2), range(2, 4)), np.array([0.1, 0.3]))
    assert np.allclose(halves, [0.2, 0.2, 0.6, 0.6])


def test_embed_step_function_roundtrip():
    grid = kp.build_uniform_grid(60)
    partition = tuple(range(10 * b, 10 * (b + 1)) for b in range(6))
    rng = np.random.default_rng(3)
    z = rng.random(6) / 6
    f = kp.embed_step_function(grid, partition, z)
    back = [float(np.dot(f[c.start : c.stop], grid.weights[c.start : c.stop])) for c in partition]
    assert np.allclose(back, z, atol=1e-15)


def _random_step_setup(rng, cells=60):
    level = int(rng.choice([4, 6, 10, 12]))
    grid = kp.build_uniform_grid(cells)
    scale = 0.5 + 2.5 * rng.random()
    shift = rng.random()
    kernel = kp.KernelModel(
        evaluator=lambda x, y, a=scale, b=shift: a * (x + b) * (y + b) + 0.2,
        bound=scale * (1 + shift) ** 2 + 0.2,
        name="random",
    )
    densities = rng.random((4, cells)) + 0.05
    measure = kp.make_threshold_measure([(k, densities[k]) for k in range(4)], grid)
    side = "upper" if rng.random() < 0.5 else "lower"
    upper, lower = kp.make_step_kernels(kernel, grid, level)
    step = upper if side == "upper" else lower
    return grid, measure, step


def test_embedding_identity_masses_match_block_integrals():
    # unexplored-infected mass == blockwise integral of (Psi f_L - f_L)
    rng = np.random.default_rng(4)
    for _ in range(10):
        grid, measure, step = _random_step_setup(rng)
        system = kp.system_from_step_kernel(step, grid, measure)
        block_w = step.block_weights(grid)
        z = rng.random(step.level) * block_w
        f_l = kp.embed_step_function(grid, step.partition, z)
        psi = infection_map(kp.OperatorContext(grid, step, measure), f_l)
        nu0 = kp.state_masses(system, z)[0]
        for l, cells in enumerate(step.partition):
            sl = slice(cells.start, cells.stop)
            integral = float(np.dot(psi[sl] - f_l[sl], grid.weights[sl]))
            assert nu0[l] == pytest.approx(integral, abs=1e-10)


def test_embedding_identity_derivative_margin():
    rng = np.random.default_rng(5)
    for _ in range(5):
        grid, measure, step = _random_step_setup(rng)
        system = kp.system_from_step_kernel(step, grid, measure)
        block_w = step.block_weights(grid)
        z_hat, _ = kp.first_joint_zero(system, tolerance=1e-13)
        w = rng.random(step.level)
        w /= w.sum()
        h_l = kp.embed_step_function(grid, step.partition, w)
        ctx = kp.OperatorContext(grid, step, measure)
        f_l = kp.embed_step_function(grid, step.partition, z_hat)
        deriv = infection_map_derivative(ctx, f_l, h_l)
        mass1 = kp.state_masses(system, z_hat)[1]
        directional = -w + system.intensities(w) * mass1
        for l, cells in enumerate(step.partition):
            sl = slice(cells.start, cells.stop)
            integral = float(np.dot(deriv[sl] - h_l[sl], grid.weights[sl]))
            assert directional[l] == pytest.approx(integral, abs=1e-10)
        margin = kp.stability_margin(system, z_hat, w)
        assert margin == pytest.approx(directional.max(), abs=1e-13)


def test_system_requires_full_mass():
    with pytest.raises(ValueError, match="sum to 1"):
        kp.FiniteTypeSystem(1, np.ones((1, 1)), np.array([[0.4]]), 0)


def test_system_rejects_tail_mass(small_grid):
    measure = kp.make_threshold_measure(
        [(0, 0.5), (70, 0.5)], small_grid, max_threshold=64
    )
    _, lower = kp.make_step_kernels(kp.make_kernel("constant:1"), small_grid, 10)
    with pytest.raises(ValueError, match="tail_mass"):
        kp.system_from_step_kernel(lower, small_grid, measure)
