import time

import numpy as np
import pytest

from gridident import (NoiseSpec, PriorTopology, SolverConfig, add_noise,
                       complete_graph, constraint_residual, estimate_vector_ls,
                       incidence_matrix, noise_blocks, plug_in_ols,
                       random_admittances, realified_coefficient, realify,
                       save_trace, solve_stls, stack_coefficients, synthesize,
                       synthesize_independent, voltage_coefficient)
from gridident.synth import OperatingPoint


def _network(n, seed):
    return random_admittances(complete_graph(n), np.random.default_rng(seed))


def test_realify_block_structure():
    net = _network(4, 50)
    ms = synthesize_independent(net, 1, seed=51)
    block = realify(incidence_matrix(net.graph), ms.points[0])
    n, e = 4, 6
    assert block.a.shape == (2 * n, 2 * e)
    top_left = block.a[:n, :e]
    assert np.array_equal(top_left, block.a[n:, e:])
    assert np.array_equal(block.a[:n, e:], -block.a[n:, :e])
    assert np.array_equal(block.b, np.concatenate([ms.points[0].I.real,
                                                   ms.points[0].I.imag]))


def test_realify_real_input_reduces_to_real_arithmetic():
    net = _network(3, 52)
    h = incidence_matrix(net.graph)
    v = np.array([1.0, 2.0, -0.5]) + 0j
    point = OperatingPoint(v, np.zeros(3, dtype=complex), 1)
    block = realify(h, point)
    assert np.abs(block.a[:3, 3:]).max() == 0  # no imaginary coupling
    assert np.array_equal(block.a[:3, :3], voltage_coefficient(h, v).real)


def test_realified_product_matches_complex_product():
    rng = np.random.default_rng(53)
    net = _network(5, 54)
    h = incidence_matrix(net.graph)
    v = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    y = rng.standard_normal(net.graph.e) + 1j * rng.standard_normal(net.graph.e)
    a = realified_coefficient(h, v.real, v.imag)
    product = a @ np.concatenate([y.real, y.imag])
    expected = voltage_coefficient(h, v) @ y
    assert np.abs(product - np.concatenate([expected.real, expected.imag])).max() <= 1e-12


def test_realify_zero_voltage():
    net = _network(3, 55)
    point = OperatingPoint(np.zeros(3, dtype=complex), np.zeros(3, dtype=complex), 1)
    assert np.abs(realify(incidence_matrix(net.graph), point).a).max() == 0


def test_constraint_residual_zero_at_exact_solution():
    net = _network(4, 56)
    ms = synthesize_independent(net, 1, seed=57)
    h = incidence_matrix(net.graph)
    block = realify(h, ms.points[0])
    g = constraint_residual(block, np.zeros(16), net.y.real, net.y.imag)
    assert np.abs(g).max() <= 1e-10


def test_constraint_residual_zero_parameters():
    net = _network(4, 58)
    ms = synthesize_independent(net, 1, seed=59)
    block = realify(incidence_matrix(net.graph), ms.points[0])
    e = net.graph.e
    g = constraint_residual(block, np.zeros(16), np.zeros(e), np.zeros(e))
    assert np.array_equal(g, -block.b)


def test_constraint_residual_matches_complex_recomputation():
    rng = np.random.default_rng(60)
    net = _network(4, 61)
    n, e = 4, net.graph.e
    h = incidence_matrix(net.graph)
    ms = synthesize_independent(net, 1, seed=62)
    point = ms.points[0]
    block = realify(h, point)
    s = rng.standard_normal(4 * n) * 0.01
    y = rng.standard_normal(e) + 1j * rng.standard_normal(e)
    g = constraint_residual(block, s, y.real, y.imag)
    # independent complex-arithmetic recomputation of the noisy equation
    dv = s[:n] + 1j * s[n:2 * n]
    di = s[2 * n:3 * n] + 1j * s[3 * n:]
    lhs = voltage_coefficient(h, point.V + dv) @ y - (point.I + di)
    assert np.abs(g - np.concatenate([lhs.real, lhs.imag])).max() <= 1e-12


def test_noise_blocks_length_check():
    net = _network(3, 63)
    with pytest.raises(ValueError):
        noise_blocks(incidence_matrix(net.graph), np.zeros(5))


@pytest.mark.parametrize("prior_kind", ["complete", "tree", "minus_one"])
def test_zero_noise_degeneracy(prior_kind):
    from gridident import random_tree
    n = 6
    rng = np.random.default_rng(64)
    if prior_kind == "complete":
        prior = PriorTopology.complete(n)
    elif prior_kind == "tree":
        prior = PriorTopology.tree(random_tree(n, rng))
    else:
        prior = PriorTopology.minus_one(n, (2, 5))
    net = random_admittances(prior.graph, rng)
    from gridident import min_measurements
    ms = synthesize_independent(net, min_measurements(prior, n), seed=65)
    sol = solve_stls(ms, prior)
    a, i = stack_coefficients(ms, incidence_matrix(prior.graph))
    y_exact = estimate_vector_ls(a, i)
    assert sol.converged
    assert np.linalg.norm(sol.y - y_exact) <= 1e-6 * np.linalg.norm(y_exact)
    scale = np.linalg.norm(np.concatenate([ms.voltage_matrix().ravel(),
                                           ms.current_matrix().ravel()]))
    assert np.linalg.norm(sol.s) <= 1e-6 * scale


def test_weight_scaling_leaves_solution_unchanged():
    n = 5
    prior = PriorTopology.complete(n)
    net = _network(n, 66)
    ms = add_noise(synthesize_independent(net, n - 1, seed=67), NoiseSpec(0.001), seed=68)
    base = solve_stls(ms, prior, SolverConfig())
    scaled = solve_stls(ms, prior, SolverConfig(weight=3.0 * np.eye(4 * n)))
    assert np.allclose(scaled.y, base.y, rtol=1e-6)


def test_weight_validation():
    n = 4
    prior = PriorTopology.complete(n)
    net = _network(n, 69)
    ms = synthesize_independent(net, n - 1, seed=70)
    with pytest.raises(ValueError):
        solve_stls(ms, prior, SolverConfig(weight=np.eye(3)))
    with pytest.raises(ValueError):
        solve_stls(ms, prior, SolverConfig(weight=-np.eye(4 * n)))


def test_noisy_solve_converges_and_improves():
    n = 7
    prior = PriorTopology.complete(n)
    net = _network(n, 71)
    ms = add_noise(synthesize_independent(net, n - 1, seed=72), NoiseSpec(0.001), seed=73)
    sol = solve_stls(ms, prior)
    assert sol.converged and sol.kkt_residual <= 1e-5
    a, i = stack_coefficients(ms, incidence_matrix(prior.graph))
    from gridident import minimum_norm_vector
    y_ls = minimum_norm_vector(a, i)
    err_stls = np.sum(np.abs(sol.y - net.y))
    err_ls = np.sum(np.abs(y_ls - net.y))
    assert err_stls <= err_ls * 1.2  # structured solve should not lose to plain LS


def test_solver_determinism():
    n = 5
    prior = PriorTopology.complete(n)
    net = _network(n, 74)
    ms = add_noise(synthesize_independent(net, n - 1, seed=75), NoiseSpec(0.001), seed=76)
    a = solve_stls(ms, prior)
    b = solve_stls(ms, prior)
    assert np.array_equal(a.y, b.y) and np.array_equal(a.s, b.s)
    assert a.trace == b.trace


def test_residual_never_worse_than_initial():
    n = 6
    prior = PriorTopology.complete(n)
    net = _network(n, 77)
    ms = add_noise(synthesize_independent(net, n - 1, seed=78), NoiseSpec(0.001), seed=79)
    sol = solve_stls(ms, prior, SolverConfig(max_iter=1))
    assert sol.kkt_residual <= sol.trace[0][1]


def test_non_convergence_is_flagged():
    n = 5
    prior = PriorTopology.complete(n)
    net = _network(n, 80)
    ms = add_noise(synthesize_independent(net, n - 1, seed=81), NoiseSpec(0.001), seed=82)
    sol = solve_stls(ms, prior, SolverConfig(max_iter=0))
    assert not sol.converged
    assert sol.kkt_residual > 1e-5


def test_trace_file(tmp_path):
    n = 4
    prior = PriorTopology.complete(n)
    net = _network(n, 83)
    ms = add_noise(synthesize_independent(net, n - 1, seed=84), NoiseSpec(0.001), seed=85)
    sol = solve_stls(ms, prior)
    path = tmp_path / "trace.csv"
    save_trace(sol, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "iter,kkt_residual,constraint_norm,step_norm"
    assert len(lines) == len(sol.trace) + 1


def test_rank_deficient_warns():
    n = 6
    prior = PriorTopology.complete(n)
    net = _network(n, 86)
    ms = add_noise(synthesize_independent(net, 2, seed=87), NoiseSpec(0.001), seed=88)
    with pytest.warns(UserWarning, match="cannot be unique"):
        sol = solve_stls(ms, prior)
    assert np.all(np.isfinite(sol.y))


def test_plug_in_single_noiseless_equals_exact():
    n = 6
    prior = PriorTopology.complete(n)
    net = _network(n, 89)
    ms = synthesize_independent(net, n - 1, seed=90)
    y = plug_in_ols([ms], prior)
    a, i = stack_coefficients(ms, incidence_matrix(prior.graph))
    assert np.allclose(y, estimate_vector_ls(a, i), rtol=1e-12)


def test_plug_in_is_fast_where_structured_solve_is_not():
    n = 40
    prior = PriorTopology.complete(n)
    net = _network(n, 91)
    ms = synthesize_independent(net, n - 1, seed=92)
    spec = NoiseSpec(0.001)
    reps = [add_noise(ms, spec, seed=[93, r]) for r in range(4)]
    t0 = time.perf_counter()
    plug_in_ols(reps, prior)
    t_plugin = time.perf_counter() - t0
    t0 = time.perf_counter()
    solve_stls(reps[0], prior, SolverConfig(max_iter=1))
    t_one_newton_step = time.perf_counter() - t0
    assert t_plugin < t_one_newton_step
