"""Runtime state machine driving a realization over an output stream.

The estimator holds the stacked estimate vector z and a sliding window of the
last N_init + N_est outputs.  Once the window is full, every new output y_tau
triggers one update z <- A z + B d and yields the estimate for time step
tau - N_est + 1: estimates lag the newest measurement by N_est - 1 samples.
"""

from __future__ import annotations

import csv
import warnings
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .op_uie import UieRealization


class Estimate(NamedTuple):
    """One emitted estimate, labeled with its target time step."""

    t: int
    u_hat: np.ndarray


@dataclass
class EstimatorState:
    """Mutable runtime state; single-writer, freely movable between calls."""

    realization: UieRealization
    z: np.ndarray
    window: deque = field(default_factory=deque)
    pushed: int = 0
    clamp: Optional[Callable[[int], bool]] = None

    @property
    def warm(self) -> bool:
        return len(self.window) == self.realization.N_init + self.realization.N_est

    @property
    def u_hat(self) -> np.ndarray:
        """Read-out of the newest stacked estimate (last n_u entries of z)."""
        return self.z[-self.realization.n_u :]


def init(real: UieRealization, z0=None) -> EstimatorState:
    """Fresh cold state at time 0; z0 defaults to zeros (dimension N_init*n_u)."""
    if z0 is None:
        z0 = np.zeros(real.n_z)
    z0 = np.asarray(z0, dtype=float).reshape(-1)
    if z0.shape[0] != real.n_z:
        raise ValueError(f"z0 must have dimension {real.n_z}, got {z0.shape[0]}")
    return EstimatorState(realization=real, z=z0.copy())


def clamp_hook(state: EstimatorState, mask: Optional[Callable[[int], bool]]) -> None:
    """Install a predicate on time steps whose estimates are forced to zero.

    After each update, every block of z whose time step satisfies the mask is
    overwritten with zeros before the next step (and before emission).  Pass
    None to remove the hook.
    """
    state.clamp = mask


def push_output(state: EstimatorState, y) -> Optional[Estimate]:
    """Feed one output sample; returns an estimate once the window is warm.

    The estimate emitted upon pushing the output with stream index tau
    (0-based) targets time step tau - N_est + 1.
    """
    real = state.realization
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape[0] != real.n_y:
        raise ValueError(f"output must have dimension {real.n_y}, got {y.shape[0]}")
    L = real.N_init + real.N_est
    state.window.append(y)
    if len(state.window) > L:
        state.window.popleft()
    tau = state.pushed
    state.pushed += 1
    if len(state.window) < L:
        return None
    d = np.concatenate(state.window)
    state.z = real.A_uie @ state.z + real.B_uie @ d
    target = tau - real.N_est + 1
    if state.clamp is not None:
        for j in range(real.N_init):
            step = target - (real.N_init - 1) + j
            if state.clamp(step):
                state.z[j * real.n_u : (j + 1) * real.n_u] = 0.0
    return Estimate(target, state.u_hat.copy())


@dataclass(frozen=True)
class BatchResult:
    """Time-aligned estimates from a batch run.

    times holds the target steps; each estimate became available N_est - 1
    samples later (measurement_lag), when the output at times + lag arrived.
    """

    times: np.ndarray
    estimates: np.ndarray
    measurement_lag: int

    @property
    def available_at(self) -> np.ndarray:
        return self.times + self.measurement_lag

    def __len__(self) -> int:
        return self.times.shape[0]


def run_batch(
    real: UieRealization,
    y_seq,
    z0=None,
    mask: Optional[Callable[[int], bool]] = None,
) -> BatchResult:
    """Fold push_output over an output sequence.

    Streams shorter than N_init + N_est produce an empty result with a
    warning.  Identical inputs give bit-identical outputs.
    """
    y_seq = np.atleast_2d(np.asarray(y_seq, dtype=float))
    state = init(real, z0)
    if mask is not None:
        clamp_hook(state, mask)
    lag = real.N_est - 1
    if y_seq.shape[0] < real.N_init + real.N_est:
        warnings.warn(
            f"stream of length {y_seq.shape[0]} is shorter than the window "
            f"{real.N_init + real.N_est}; no estimates produced",
            stacklevel=2,
        )
        return BatchResult(np.empty(0, dtype=int), np.empty((0, real.n_u)), lag)
    times, estimates = [], []
    for y in y_seq:
        out = push_output(state, y)
        if out is not None:
            times.append(out.t)
            estimates.append(out.u_hat)
    return BatchResult(np.array(times, dtype=int), np.vstack(estimates), lag)


def mae(estimates: np.ndarray, truth: np.ndarray) -> float:
    """Mean absolute error between aligned estimate and truth arrays."""
    estimates = np.asarray(estimates, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimates.shape != truth.shape:
        raise ValueError(f"shape mismatch: {estimates.shape} vs {truth.shape}")
    return float(np.mean(np.abs(estimates - truth)))


def write_estimates_csv(path, result: BatchResult, truth: Optional[np.ndarray] = None) -> None:
    """Write estimates as CSV: t, uhat_1..; with truth adds u_true_* and err_inf.

    `truth` is indexed by absolute time step (row t is u_t of the stream).
    """
    n_u = result.estimates.shape[1] if len(result) else 0
    header = ["t"] + [f"uhat_{i+1}" for i in range(n_u)]
    if truth is not None:
        truth = np.atleast_2d(np.asarray(truth, dtype=float))
        header += [f"u_true_{i+1}" for i in range(truth.shape[1])] + ["err_inf"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(len(result)):
            t = int(result.times[k])
            row = [t] + [f"{v:.16e}" for v in result.estimates[k]]
            if truth is not None:
                u_t = truth[t]
                err = float(np.abs(result.estimates[k] - u_t).max())
                row += [f"{v:.16e}" for v in u_t] + [f"{err:.16e}"]
            writer.writerow(row)
