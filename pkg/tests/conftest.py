import numpy as np
import pytest

from uiekit import (
    LtiSystem,
    benchmark_system,
    build_design_stack,
    closed_loop_excitation,
    design_op_uie,
    simulate,
    stabilizing_gain,
)


@pytest.fixture(scope="session")
def sys_g1():
    return benchmark_system(1.0)


@pytest.fixture(scope="session")
def sys_g0():
    return benchmark_system(0.0)


@pytest.fixture(scope="session")
def data_g1(sys_g1):
    return closed_loop_excitation(sys_g1, 50, seed=1)


@pytest.fixture(scope="session")
def data_g0(sys_g0):
    return closed_loop_excitation(sys_g0, 50, seed=1)


@pytest.fixture(scope="session")
def stack_g1(data_g1):
    return build_design_stack(data_g1, 5, 1)


@pytest.fixture(scope="session")
def stack_g0(data_g0):
    return build_design_stack(data_g0, 5, 2)


@pytest.fixture(scope="session")
def stack_g0_ne1(data_g0):
    # N_est = 1 leaves the next input unidentifiable when D = 0
    return build_design_stack(data_g0, 5, 1)


@pytest.fixture(scope="session")
def op_design_g0(stack_g0):
    real, report = design_op_uie(stack_g0, decay_rate=0.85)
    assert real is not None, report.to_dict()
    return real, report


@pytest.fixture(scope="session")
def fresh_g0(sys_g0):
    return closed_loop_excitation(sys_g0, 60, seed=777, scale=0.5)


def random_system(rng, n_x=None, n_u=None, n_y=None, rho_max=0.95):
    """Random controllable+observable stable system for behavior tests."""
    for _ in range(50):
        nx = n_x or int(rng.integers(1, 5))
        nu = n_u or int(rng.integers(1, 3))
        ny = n_y or int(rng.integers(1, 3))
        A = rng.normal(size=(nx, nx))
        radius = max(abs(np.linalg.eigvals(A))) if nx else 0.0
        if radius > 0:
            A *= rng.uniform(0.3, rho_max) / radius
        B = rng.normal(size=(nx, nu))
        C = rng.normal(size=(ny, nx))
        D = rng.normal(size=(ny, nu))
        sys = LtiSystem(A, B, C, D)
        ctrb = np.hstack([np.linalg.matrix_power(A, k) @ B for k in range(nx)])
        obsv = np.vstack([C @ np.linalg.matrix_power(A, k) for k in range(nx)])
        if nx == 0:
            return sys
        s_c = np.linalg.svd(ctrb, compute_uv=False)
        s_o = np.linalg.svd(obsv, compute_uv=False)
        if s_c[-1] > 1e-3 * s_c[0] and s_o[-1] > 1e-3 * s_o[0]:
            return sys
    raise RuntimeError("failed to draw a well-conditioned random system")


def open_loop_record(sys, T, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    u = rng.uniform(-scale, scale, size=(T, sys.n_u))
    return simulate(sys, np.zeros(sys.n_x), u)
