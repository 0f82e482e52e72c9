"""Windows of fresh runs live in the column span of one informative record.

A depth-L block Hankel matrix built from a single persistently excited
input/output record spans every L-step window the plant can produce.  This
demo checks that span property directly and then uses the same idea to
predict outputs several steps ahead without ever identifying a model.
"""

import numpy as np

from uiekit import (
    LtiSystem,
    build_hankel,
    is_persistently_exciting,
    predict_outputs,
    simulate,
    stack_window,
    trajectory_membership,
)

rng = np.random.default_rng(7)

# a stable three-state plant, one input, two outputs
A = np.array([[0.6, 0.2, 0.0], [-0.1, 0.5, 0.3], [0.0, 0.2, 0.4]])
plant = LtiSystem(A, rng.normal(size=(3, 1)), rng.normal(size=(2, 3)), rng.normal(size=(2, 1)))

T, L = 80, 6
record = simulate(plant, np.zeros(3), rng.uniform(-1, 1, size=(T, 1)))
print(f"record: T = {T}, persistently exciting of order {L + 3}:",
      is_persistently_exciting(record.inputs, L + 3))

H_full = np.vstack([build_hankel(record.inputs, L), build_hankel(record.outputs, L)])

fresh = simulate(plant, rng.normal(size=3), rng.uniform(-1, 1, size=(L, 1)))
window = stack_window(fresh.inputs, fresh.outputs)
residual, member = trajectory_membership(H_full, window)
print(f"fresh window membership: residual = {residual:.2e}, member = {member}")

foreign = simulate(
    LtiSystem(0.5 * np.eye(3), np.ones((3, 1)), np.ones((2, 3)), np.zeros((2, 1))),
    rng.normal(size=3),
    rng.uniform(-1, 1, size=(L, 1)),
)
residual, member = trajectory_membership(
    H_full, stack_window(foreign.inputs, foreign.outputs)
)
print(f"foreign window:          residual = {residual:.2e}, member = {member}")

# multi-step prediction: feed a past window plus planned inputs
n_init, n_pred = 3, 10
run = simulate(plant, rng.normal(size=3), rng.uniform(-1, 1, size=(n_init + n_pred, 1)))
predicted = predict_outputs(
    record, n_init,
    run.inputs[:n_init], run.outputs[:n_init], run.inputs[n_init:],
)
err = np.abs(predicted - run.outputs[n_init:]).max()
print(f"{n_pred}-step output prediction error: {err:.2e}")
