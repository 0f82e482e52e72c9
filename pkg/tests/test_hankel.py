import numpy as np
import pytest

from uiekit import (
    build_design_stack,
    build_hankel,
    is_persistently_exciting,
    simulate,
    stack_window,
    trajectory_membership,
)
from uiekit.lti import IoTrajectory

from conftest import open_loop_record, random_system


def test_scalar_signal_depth_two():
    H = build_hankel(np.array([[1.0], [2.0], [3.0], [4.0]]), 2)
    assert np.array_equal(H, [[1, 2, 3], [2, 3, 4]])


def test_depth_one_lays_out_columns():
    sig = np.arange(8.0).reshape(4, 2)
    H = build_hankel(sig, 1)
    assert np.array_equal(H, sig.T)


def test_vector_signal_by_window_enumeration():
    sig = np.array([[1.0, 10.0], [2.0, 20.0], [3.0, 30.0]])
    H = build_hankel(sig, 2)
    # oracle: enumerate the two windows by hand
    expected = np.array([[1, 2], [10, 20], [2, 3], [20, 30]], dtype=float)
    assert H.shape == (4, 2)
    assert np.array_equal(H, expected)


def test_depth_longer_than_signal_rejected():
    with pytest.raises(ValueError):
        build_hankel(np.zeros((3, 1)), 4)


def test_shift_structure():
    rng = np.random.default_rng(0)
    sig = rng.normal(size=(12, 3))
    depth = 4
    H = build_hankel(sig, depth)
    n_s = 3
    for i in range(1, depth):
        for j in range(H.shape[1] - 1):
            assert np.array_equal(
                H[i * n_s : (i + 1) * n_s, j], H[(i - 1) * n_s : i * n_s, j + 1]
            )


def test_constant_signal_not_pe():
    u = np.ones((20, 1))
    assert not is_persistently_exciting(u, 2)


def test_random_excitation_pe_and_rank_bound():
    rng = np.random.default_rng(1)
    u = rng.uniform(-1, 1, size=(50, 2))
    assert is_persistently_exciting(u, 9)
    # more rows than columns can never be full row rank
    assert not is_persistently_exciting(u, 20)


def test_pe_rejects_short_sequence():
    with pytest.raises(ValueError):
        is_persistently_exciting(np.ones((3, 1)), 5)


def test_design_stack_manual_slicing():
    us = np.array([[1.0], [2.0], [3.0]])
    ys = np.array([[4.0], [5.0], [6.0]])
    stack = build_design_stack(IoTrajectory(us, ys), 1, 1)
    # depth 2, two columns; H = [u_init; y_init; y_est]
    assert stack.H.shape == (3, 2)
    assert np.array_equal(stack.H, [[1, 2], [4, 5], [5, 6]])
    assert np.array_equal(stack.H_u, [[2, 3]])
    assert np.array_equal(stack.H_y, [[5, 6]])
    assert np.array_equal(stack.H_hat, [[1, 2], [2, 3], [4, 5]])


def test_design_stack_row_counts(data_g0):
    stack = build_design_stack(data_g0, 5, 2)
    assert stack.H.shape[0] == 5 * 2 + (5 + 2) * 2
    assert stack.H_hat.shape[0] == 5 * 2 + 2 + 5 * 2
    assert stack.H_u.shape == (2, stack.n_c)
    assert stack.H_y.shape == (2, stack.n_c)


def test_design_stack_benchmark_column_count(data_g1):
    stack = build_design_stack(data_g1, 5, 1)
    assert stack.n_c == 50 - 6 + 1 == 45


def test_design_stack_insufficient_data():
    traj = IoTrajectory(np.zeros((4, 1)), np.zeros((4, 1)))
    with pytest.raises(ValueError):
        build_design_stack(traj, 4, 1)


def test_partition_consistency(data_g1):
    stack = build_design_stack(data_g1, 5, 1)
    Hu_full = build_hankel(data_g1.inputs, 6)
    Hy_full = build_hankel(data_g1.outputs, 6)
    rebuilt = np.vstack([Hu_full[:10], Hy_full[:10], Hy_full[10:]])
    assert np.array_equal(stack.H, rebuilt)
    assert np.array_equal(stack.H_u, Hu_full[10:12])


def test_membership_of_own_columns(stack_g1):
    residual, ok = trajectory_membership(stack_g1.H, stack_g1.H[:, 7])
    assert ok and residual < 1e-10


def test_membership_fresh_trajectory(sys_g1, data_g1):
    L = 6
    Hu = build_hankel(data_g1.inputs, L)
    Hy = build_hankel(data_g1.outputs, L)
    full = np.vstack([Hu, Hy])
    rng = np.random.default_rng(9)
    fresh = simulate(sys_g1, rng.normal(size=3), rng.uniform(-1, 1, size=(L, 2)))
    window = stack_window(fresh.inputs, fresh.outputs)
    residual, ok = trajectory_membership(full, window)
    assert ok
    assert residual <= 1e-8 * np.linalg.norm(window)


def test_membership_rejects_foreign_trajectory(sys_g1, data_g1):
    L = 6
    full = np.vstack(
        [build_hankel(data_g1.inputs, L), build_hankel(data_g1.outputs, L)]
    )
    rng = np.random.default_rng(10)
    other = random_system(rng, n_x=3, n_u=2, n_y=2)
    foreign = simulate(other, rng.normal(size=3), rng.uniform(-1, 1, size=(L, 2)))
    window = stack_window(foreign.inputs, foreign.outputs)
    residual, ok = trajectory_membership(full, window)
    assert not ok
    assert residual > 1e-4 * np.linalg.norm(window)


def test_membership_dimension_mismatch(stack_g1):
    with pytest.raises(ValueError):
        trajectory_membership(stack_g1.H, np.zeros(5))


def test_behavior_span_over_random_systems():
    # 20 random controllable systems; PE excitation of order L + n_x; every
    # fresh L-step window lies in the data's column span.
    rng = np.random.default_rng(2024)
    for trial in range(20):
        sys = random_system(rng)
        L = sys.n_x + int(rng.integers(1, 4))
        T = max(8 * (L + sys.n_x) * sys.n_u, 40)
        data = open_loop_record(sys, T, seed=int(rng.integers(1 << 30)))
        assert is_persistently_exciting(data.inputs, L + sys.n_x)
        full = np.vstack(
            [build_hankel(data.inputs, L), build_hankel(data.outputs, L)]
        )
        fresh = simulate(
            sys, rng.normal(size=sys.n_x), rng.uniform(-1, 1, size=(L + 10, sys.n_u))
        )
        for j in range(5):
            window = stack_window(fresh.inputs[j : j + L], fresh.outputs[j : j + L])
            residual, ok = trajectory_membership(full, window)
            assert ok, f"trial {trial}: residual {residual:.2e}"
