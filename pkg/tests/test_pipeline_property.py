"""End-to-end randomized property: a feasible report means a working estimator.

Sweeps random plants of mixed shapes through the full pipeline.  Whenever a
design comes back feasible, the realization must be Schur and must actually
reconstruct the inputs of a fresh run; when it does not, the report must say
so without raising.  Square plants with random feedthrough often carry
unstable invariant zeros, so both outcomes get exercised.
"""

import numpy as np

from uiekit import (
    build_design_stack,
    design_cl_uie,
    design_op_uie,
    is_persistently_exciting,
    run_batch,
    simulate,
)
from uiekit.benchmark import select_n_est

from conftest import open_loop_record, random_system


def _fresh_tail_error(real, sys, seed):
    rng = np.random.default_rng(seed)
    fresh = simulate(sys, rng.normal(size=sys.n_x), rng.uniform(-1, 1, size=(70, sys.n_u)))
    batch = run_batch(real, fresh.outputs)
    keep = batch.times < len(fresh)
    errors = np.abs(batch.estimates[keep] - fresh.inputs[batch.times[keep]]).max(axis=1)
    return errors[-8:].max()


def test_design_pipeline_over_random_plants():
    rng = np.random.default_rng(777)
    n_feasible = 0
    n_reported = 0
    for trial in range(15):
        sys = random_system(rng, n_x=int(rng.integers(2, 4)))
        n_init = sys.n_x + 1
        data = open_loop_record(sys, 90, seed=int(rng.integers(1 << 30)))
        n_est, _ = select_n_est(data, n_init, 4)
        if n_est is None:
            n_reported += 1
            continue
        if not is_persistently_exciting(data.inputs, n_init + n_est + sys.n_x):
            continue
        stack = build_design_stack(data, n_init, n_est)

        op_real, op_report = design_op_uie(stack)
        assert op_report.solver_status in ("feasible", "infeasible", "numerical-failure")
        if op_real is not None:
            assert op_report.solver_status == "feasible"
            assert op_real.spectral_radius < 1.0
            decades = -np.log10(max(_fresh_tail_error(op_real, sys, trial), 1e-300))
            # 60+ steps at the certified rate leave a small tail
            min_decades = min(12.0, -62 * np.log10(max(op_real.spectral_radius, 1e-2)))
            assert decades >= min(3.0, min_decades), (
                f"trial {trial}: op tail too large for radius {op_real.spectral_radius:.3f}"
            )
            n_feasible += 1
        else:
            n_reported += 1

        cl_real, cl_report, _ = design_cl_uie(stack)
        if cl_real is not None:
            assert cl_real.spectral_radius < 1.0
            tail = _fresh_tail_error(cl_real, sys, 1000 + trial)
            assert tail < 10 ** (-3.0) or cl_real.spectral_radius > 0.85
        else:
            assert cl_report.solver_status in ("infeasible", "numerical-failure")

    # the sweep must exercise both outcomes to mean anything
    assert n_feasible >= 3, f"only {n_feasible} feasible designs in the sweep"
    assert n_reported >= 1, "no infeasible case was exercised"
