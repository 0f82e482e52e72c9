import numpy as np
import pytest

from uiekit import (
    UieRealization,
    clamp_hook,
    closed_loop_excitation,
    design_op_uie,
    build_design_stack,
    init,
    mae,
    push_output,
    run_batch,
    simulate,
    write_estimates_csv,
)

from conftest import open_loop_record, random_system


def zero_realization(n_init=3, n_est=2, n_u=2, n_y=2):
    n_z, n_d = n_init * n_u, (n_init + n_est) * n_y
    return UieRealization(
        np.zeros((n_z, n_z)), np.zeros((n_z, n_d)), n_init, n_est, n_u, n_y, "open-loop"
    )


@pytest.fixture(scope="module")
def wide_design():
    # 1-input 2-output stable plant: estimator can be made near-deadbeat
    rng = np.random.default_rng(0)
    sysr = random_system(rng, n_x=3, n_u=1, n_y=2)
    data = open_loop_record(sysr, 60, seed=100)
    stack = build_design_stack(data, 4, 1)
    real, report = design_op_uie(stack, decay_rate=0.8)
    assert real is not None, report.to_dict()
    return sysr, real


def test_init_validates_dimension():
    real = zero_realization()
    state = init(real)
    assert np.array_equal(state.z, np.zeros(6))
    state = init(real, np.arange(6.0))
    assert np.array_equal(state.z, np.arange(6.0))
    with pytest.raises(ValueError):
        init(real, np.zeros(5))


def test_cold_phase_emits_nothing():
    real = zero_realization()
    state = init(real)
    outs = [push_output(state, np.zeros(2)) for _ in range(4)]
    assert outs == [None] * 4  # window needs N_init + N_est = 5 samples
    est = push_output(state, np.zeros(2))
    assert est is not None


def test_first_emission_targets_n_init():
    real = zero_realization(n_init=3, n_est=2)
    state = init(real)
    emitted = []
    for tau in range(8):
        out = push_output(state, np.zeros(2))
        if out is not None:
            emitted.append((tau, out.t))
    # estimate for step t arrives with the output of step t + N_est - 1
    assert emitted[0] == (4, 3)
    for tau, target in emitted:
        assert target == tau - real.N_est + 1


def test_zero_matrices_estimate_zero():
    real = zero_realization()
    state = init(real, np.ones(6))
    for _ in range(10):
        out = push_output(state, np.ones(2))
        if out is not None:
            assert np.array_equal(out.u_hat, np.zeros(2))


def test_push_rejects_bad_dimension():
    state = init(zero_realization())
    with pytest.raises(ValueError):
        push_output(state, np.zeros(3))


def test_stream_of_exactly_window_length_gives_one_estimate():
    real = zero_realization()
    result = run_batch(real, np.zeros((5, 2)))
    assert len(result) == 1


def test_short_stream_warns_and_returns_empty():
    real = zero_realization()
    with pytest.warns(UserWarning):
        result = run_batch(real, np.zeros((4, 2)))
    assert len(result) == 0


def test_batch_equals_streaming(wide_design):
    sysr, real = wide_design
    fresh = open_loop_record(sysr, 40, seed=7)
    batch = run_batch(real, fresh.outputs, z0=np.ones(real.n_z))
    state = init(real, np.ones(real.n_z))
    manual = [push_output(state, y) for y in fresh.outputs]
    manual = [m for m in manual if m is not None]
    assert np.array_equal(batch.times, [m.t for m in manual])
    assert np.array_equal(batch.estimates, np.vstack([m.u_hat for m in manual]))


def test_estimates_converge_to_true_inputs(wide_design):
    sysr, real = wide_design
    fresh = open_loop_record(sysr, 40, seed=8)
    result = run_batch(real, fresh.outputs)
    keep = result.times < len(fresh)
    errors = np.abs(fresh.inputs[result.times[keep]] - result.estimates[keep]).max(axis=1)
    assert errors[-5:].max() < 1e-9


def test_measurement_lag_annotation():
    real = zero_realization(n_init=3, n_est=2)
    result = run_batch(real, np.zeros((8, 2)))
    assert result.measurement_lag == 1
    assert np.array_equal(result.available_at, result.times + 1)


def test_error_recursion_linearity(wide_design):
    # difference of two runs depends only on z0 difference, not on the stream
    sysr, real = wide_design
    fresh = open_loop_record(sysr, 30, seed=9)
    rng = np.random.default_rng(10)
    z0a, z0b = rng.normal(size=real.n_z), rng.normal(size=real.n_z)
    ra = run_batch(real, fresh.outputs, z0=z0a)
    rb = run_batch(real, fresh.outputs, z0=z0b)
    diff = ra.estimates - rb.estimates
    e = z0a - z0b
    n_u = real.n_u
    for k in range(len(ra)):
        e = real.A_uie @ e
        assert np.abs(diff[k] - e[-n_u:]).max() < 1e-9


def test_determinism_bitwise(wide_design):
    sysr, real = wide_design
    fresh = open_loop_record(sysr, 25, seed=11)
    r1 = run_batch(real, fresh.outputs)
    r2 = run_batch(real, fresh.outputs)
    assert np.array_equal(r1.estimates, r2.estimates)


def test_clamp_always_true_zeroes_everything(wide_design):
    _, real = wide_design
    fresh_y = np.random.default_rng(12).normal(size=(20, real.n_y))
    result = run_batch(real, fresh_y, mask=lambda t: True)
    assert np.all(result.estimates == 0.0)


def test_clamp_always_false_is_identity(wide_design):
    sysr, real = wide_design
    fresh = open_loop_record(sysr, 25, seed=13)
    masked = run_batch(real, fresh.outputs, mask=lambda t: False)
    plain = run_batch(real, fresh.outputs)
    assert np.array_equal(masked.estimates, plain.estimates)


def test_clamp_hook_install_and_remove(wide_design):
    _, real = wide_design
    state = init(real)
    clamp_hook(state, lambda t: True)
    assert state.clamp is not None
    clamp_hook(state, None)
    assert state.clamp is None


def test_night_mask_improves_square_wave_mae(wide_design):
    # occupancy-style input: active for 5 steps, zero for 5 steps
    sysr, real = wide_design
    period, active = 10, 5
    rng = np.random.default_rng(14)
    T = 60
    u = np.array(
        [rng.uniform(0.5, 1.5, sysr.n_u) if t % period < active else np.zeros(sysr.n_u)
         for t in range(T)]
    )
    traj = simulate(sysr, np.zeros(sysr.n_x), u)
    night = lambda t: t % period >= active
    plain = run_batch(real, traj.outputs)
    masked = run_batch(real, traj.outputs, mask=night)
    keep = plain.times < T
    truth = traj.inputs[plain.times[keep]]
    mae_plain = mae(plain.estimates[keep], truth)
    mae_masked = mae(masked.estimates[keep], truth)
    assert np.isfinite(mae_plain) and np.isfinite(mae_masked)
    assert mae_masked <= mae_plain


def test_estimates_csv_round_trip(tmp_path, wide_design):
    sysr, real = wide_design
    fresh = open_loop_record(sysr, 30, seed=15)
    result = run_batch(real, fresh.outputs)
    path = tmp_path / "est.csv"
    write_estimates_csv(path, result, truth=fresh.inputs)
    lines = path.read_text().strip().splitlines()
    header = lines[0].split(",")
    assert header[:2] == ["t", "uhat_1"]
    assert "u_true_1" in header and "err_inf" in header
    assert len(lines) == 1 + len(result)
    first = lines[1].split(",")
    assert int(first[0]) == int(result.times[0])


def test_mae_shape_mismatch():
    with pytest.raises(ValueError):
        mae(np.zeros((3, 2)), np.zeros((2, 2)))
