"""Block Hankel construction, excitation checks, and the estimator design stack."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lti import IoTrajectory


def build_hankel(signal, depth: int) -> np.ndarray:
    """Depth-L block Hankel matrix of a vector-valued signal.

    Column j stacks the samples s_j, ..., s_{j+depth-1}; the result is
    (depth * n_s) x (T - depth + 1).

    Args:
        signal: (T, n_s) array or sequence of sample vectors.
        depth: window length L, 1 <= depth <= T.
    """
    sig = np.atleast_2d(np.asarray(signal, dtype=float))
    T, n_s = sig.shape
    if depth < 1:
        raise ValueError("depth must be at least 1")
    if depth > T:
        raise ValueError(f"depth {depth} exceeds signal length {T}")
    n_c = T - depth + 1
    H = np.empty((depth * n_s, n_c))
    for j in range(n_c):
        H[:, j] = sig[j : j + depth].reshape(-1)
    return H


def is_persistently_exciting(u, order: int, rank_tol: float = 1e-8) -> bool:
    """True iff the depth-`order` Hankel matrix of u has full row rank."""
    if order < 1:
        raise ValueError("order must be at least 1")
    H = build_hankel(u, order)
    if H.shape[0] > H.shape[1]:
        return False
    s = np.linalg.svd(H, compute_uv=False)
    return bool(s[0] > 0 and s[-1] > rank_tol * s[0])


@dataclass(frozen=True)
class HankelDesignStack:
    """Partitioned Hankel blocks shared by the open- and closed-loop designs.

    All four matrices come from one depth-L pass over the dataset with
    L = N_init + N_est and share the column count n_c = T - L + 1:

      H     = [H_init(u); H_init(y); H_est(y)]  -- the estimation-scheme stack
      H_u   = first n_u rows of H_est(u)        -- reads off the next input
      H_hat = [H_init(u); H_est(1)(u); H_init(y)] -- one-step predictor stack
      H_y   = first n_y rows of H_est(y)        -- reads off the next output
    """

    H: np.ndarray
    H_u: np.ndarray
    H_hat: np.ndarray
    H_y: np.ndarray
    N_init: int
    N_est: int
    n_u: int
    n_y: int
    n_c: int

    @property
    def depth(self) -> int:
        return self.N_init + self.N_est

    @property
    def n_z(self) -> int:
        """Dimension of the stacked input-estimate state."""
        return self.N_init * self.n_u

    @property
    def n_d(self) -> int:
        """Dimension of the output window d_t."""
        return (self.N_init + self.N_est) * self.n_y


def build_design_stack(data: IoTrajectory, N_init: int, N_est: int) -> HankelDesignStack:
    """Slice one depth-L Hankel pass into the four design blocks.

    Requires len(data) >= N_init + N_est.  Persistency of excitation is the
    caller's obligation and is checked separately.
    """
    if N_init < 1 or N_est < 1:
        raise ValueError("N_init and N_est must be at least 1")
    L = N_init + N_est
    if len(data) < L:
        raise ValueError(f"need at least {L} samples, dataset has {len(data)}")
    n_u, n_y = data.n_u, data.n_y
    Hu_full = build_hankel(data.inputs, L)
    Hy_full = build_hankel(data.outputs, L)
    Hu_init, Hu_est = Hu_full[: N_init * n_u], Hu_full[N_init * n_u :]
    Hy_init, Hy_est = Hy_full[: N_init * n_y], Hy_full[N_init * n_y :]
    return HankelDesignStack(
        H=np.vstack([Hu_init, Hy_init, Hy_est]),
        H_u=Hu_est[:n_u],
        H_hat=np.vstack([Hu_init, Hu_est[:n_u], Hy_init]),
        H_y=Hy_est[:n_y],
        N_init=N_init,
        N_est=N_est,
        n_u=n_u,
        n_y=n_y,
        n_c=Hu_full.shape[1],
    )


def trajectory_membership(stack_matrix: np.ndarray, traj, res_tol: float = 1e-8):
    """Least-squares residual of projecting a stacked window onto colspan.

    Args:
        stack_matrix: Hankel matrix whose column span encodes the behavior.
        traj: stacked window vector, length equal to the row count.
        res_tol: relative tolerance used for the membership verdict.

    Returns:
        (residual, is_member): residual is the 2-norm of the projection
        mismatch; membership holds when residual <= res_tol * norm(traj).
    """
    b = np.asarray(traj, dtype=float).reshape(-1)
    if b.shape[0] != stack_matrix.shape[0]:
        raise ValueError(
            f"trajectory length {b.shape[0]} does not match row count {stack_matrix.shape[0]}"
        )
    g, _, _, _ = np.linalg.lstsq(stack_matrix, b, rcond=None)
    residual = float(np.linalg.norm(stack_matrix @ g - b))
    return residual, residual <= res_tol * max(np.linalg.norm(b), np.finfo(float).tiny)


def stack_window(u_window: np.ndarray, y_window: np.ndarray) -> np.ndarray:
    """Vectorize an L-step I/O window as [u_1..u_L; y_1..y_L]."""
    return np.concatenate([np.asarray(u_window).reshape(-1), np.asarray(y_window).reshape(-1)])
