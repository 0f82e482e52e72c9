"""Closed-loop (Luenberger-style) estimator: one-step output predictor,
innovation gain synthesis, and assembly on top of an open-loop candidate.

The correction path predicts the next output from (z_t, d_t) through the
predictor stack H_hat, compares it with the measured value T_y d_t, and feeds
the innovation back through a gain L into the whole estimate stack.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import sdp
from .gen_inverse import (
    DEFAULT_RANK_TOL,
    GInverseParam,
    materialize_g,
    pseudo_inverse,
    svd_with_rank,
)
from .hankel import HankelDesignStack, build_hankel
from .lti import IoTrajectory
from .op_uie import (
    GINVERSE_RESIDUAL_TOL,
    DesignReport,
    UieRealization,
    assemble_op_candidate,
    schur_radius,
)


class GainDesignError(RuntimeError):
    """No stabilizing innovation gain was found for the given pair."""


@dataclass
class ClDesignBlocks:
    """Matrices of the closed-loop correction path.

    C_eff and D_eff split the one-step output prediction as
    y_pred = C_eff z + D_eff d; T_y reads the measured value of the same
    output directly out of the window d.
    """

    P_of_G: np.ndarray
    C_eff: np.ndarray
    D_eff: np.ndarray
    T_y: np.ndarray
    L_gain: Optional[np.ndarray] = None


def selector_t_y(stack: HankelDesignStack) -> np.ndarray:
    """Map reading y_{t+1} out of d_t: one identity block after the init window."""
    T_y = np.zeros((stack.n_y, stack.n_d))
    off = stack.N_init * stack.n_y
    T_y[:, off : off + stack.n_y] = np.eye(stack.n_y)
    return T_y


def _check_ginverse(M: np.ndarray, G: np.ndarray, name: str) -> None:
    resid = np.linalg.norm(M @ G @ M - M) / max(np.linalg.norm(M), np.finfo(float).tiny)
    if resid > GINVERSE_RESIDUAL_TOL:
        raise ValueError(f"{name} fails the generalized-inverse check: residual {resid:.3e}")


def _blocks_from_next_step(stack: HankelDesignStack, hu_gu, hu_gy, G_hat) -> ClDesignBlocks:
    n_z, n_u, n_y, n_d = stack.n_z, stack.n_u, stack.n_y, stack.n_d
    P = np.zeros((n_z + n_u + stack.N_init * n_y, n_z + n_d))
    P[:n_z, :n_z] = np.eye(n_z)
    P[n_z : n_z + n_u, :n_z] = hu_gu
    P[n_z : n_z + n_u, n_z:] = hu_gy
    P[n_z + n_u :, n_z : n_z + stack.N_init * n_y] = np.eye(stack.N_init * n_y)
    pred = stack.H_y @ G_hat @ P
    return ClDesignBlocks(
        P_of_G=P, C_eff=pred[:, :n_z], D_eff=pred[:, n_z:], T_y=selector_t_y(stack)
    )


def build_cl_blocks(stack: HankelDesignStack, G: np.ndarray, G_hat: np.ndarray) -> ClDesignBlocks:
    """Assemble P(G), C_eff, D_eff and T_y from generalized inverses of H and H_hat.

    On noiseless informative data with the true past inputs in place of z,
    C_eff u_past + D_eff d equals the next output exactly, and equals T_y d.
    """
    _check_ginverse(stack.H, G, "G")
    _check_ginverse(stack.H_hat, G_hat, "G_hat")
    n_z = stack.n_z
    hu_gu = stack.H_u @ G[:, :n_z]
    hu_gy = stack.H_u @ G[:, n_z:]
    return _blocks_from_next_step(stack, hu_gu, hu_gy, G_hat)


def build_cl_blocks_from_candidate(
    stack: HankelDesignStack, candidate: UieRealization, G_hat: np.ndarray
) -> ClDesignBlocks:
    """Same as build_cl_blocks but reusing an open-loop candidate's bottom rows.

    The one-step map only enters through H_u G_u and H_u G_y, which are the
    last n_u rows of the candidate's A and B.
    """
    _check_ginverse(stack.H_hat, G_hat, "G_hat")
    n_u = stack.n_u
    return _blocks_from_next_step(
        stack, candidate.A_uie[-n_u:], candidate.B_uie[-n_u:], G_hat
    )


def design_gain(
    A_hat: np.ndarray,
    C_eff: np.ndarray,
    eps: float = 1e-6,
    decay_rate: float = 1.0,
    min_gain_pass: bool = False,
    trace_cap: float = 1e6,
) -> np.ndarray:
    """Innovation gain L with spectral_radius(A_hat - L C_eff) < decay_rate.

    Solves the dual observer LMI over W > 0 and Y (= W L):
    [W, W A_hat - Y C_eff; (.)', W] >= eps*I, then L = W^-1 Y.  An optional
    second pass re-solves minimizing ||Y||_F at half the achieved margin,
    which keeps the gain (and hence its noise amplification) small.

    Raises GainDesignError when the LMI is infeasible (pair not detectable
    under this parametrization).
    """
    A_hat = np.atleast_2d(np.asarray(A_hat, dtype=float))
    C_eff = np.atleast_2d(np.asarray(C_eff, dtype=float))
    n = A_hat.shape[0]
    if A_hat.shape[1] != n:
        raise ValueError("A_hat must be square")
    if C_eff.shape[1] != n:
        raise ValueError(f"C_eff must have {n} columns, got {C_eff.shape}")
    if not 0 < decay_rate <= 1.0:
        raise ValueError("decay_rate must be in (0, 1]")
    n_y = C_eff.shape[0]
    As, Cs = A_hat / decay_rate, C_eff / decay_rate

    def observer_block(v):
        return sdp.sym_2x2(v["W"], v["W"] @ As - v["Y"] @ Cs)

    problem = sdp.LmiProblem(
        variables=[
            sdp.MatrixVar("W", (n, n), symmetric=True),
            sdp.MatrixVar("Y", (n, n_y)),
        ],
        psd_blocks=[("observer", observer_block)],
        trace_caps={"W": trace_cap},
        min_eig={"W": 1e-8},
    )
    result = sdp.solve_feasibility(problem, eps=eps)
    if not result.feasible:
        raise GainDesignError(
            f"no stabilizing gain found (solver status: {result.status}); "
            "the pair may not be detectable under this parametrization"
        )
    if min_gain_pass:
        refined = sdp.solve_feasibility(
            problem, eps=max(eps, result.margin / 2), minimize_fro="Y"
        )
        if refined.feasible:
            result = refined
    L = np.linalg.solve(result.assignment["W"], result.assignment["Y"])
    if schur_radius(A_hat - L @ C_eff) >= 1.0:
        raise GainDesignError("recovered gain failed the spectral-radius re-check")
    return L


def assemble_cl(
    stack: HankelDesignStack,
    A_hat: np.ndarray,
    B_hat: np.ndarray,
    blocks: ClDesignBlocks,
) -> UieRealization:
    """Fold the innovation path into closed-loop estimator matrices.

    A = A_hat - L C_eff and B = B_hat + L (T_y - D_eff); with L = 0 this
    reduces exactly to the open-loop candidate.
    """
    L = blocks.L_gain
    if L is None:
        L = np.zeros((stack.n_z, stack.n_y))
    L = np.asarray(L, dtype=float)
    A = np.asarray(A_hat, dtype=float) - L @ blocks.C_eff
    B = np.asarray(B_hat, dtype=float) + L @ (blocks.T_y - blocks.D_eff)
    return UieRealization(A, B, stack.N_init, stack.N_est, stack.n_u, stack.n_y, "closed-loop")


def design_cl_uie(
    stack: HankelDesignStack,
    rank_tol: float = DEFAULT_RANK_TOL,
    eps: float = 1e-6,
    decay_rate: float = 1.0,
    base_candidate: Optional[UieRealization] = None,
    pe_order_checked: Optional[int] = None,
):
    """Full closed-loop design: blocks, gain, assembly, report.

    By default the base open-loop candidate and the predictor inverse come
    from Moore-Penrose pseudoinverses of H and H_hat (no null-space
    construction, which keeps this route usable on noisy data); a designed
    candidate can be passed in instead.

    Returns (realization, report, blocks); realization is None on failure.
    """
    hat_factors = svd_with_rank(stack.H_hat, rank_tol)
    report = DesignReport(
        pe_order_checked=pe_order_checked,
        null_inclusion_ok=True,
        n_S=hat_factors.n_S,
        r=0,
        solver_status="infeasible",
        spectral_radius=None,
    )
    G_hat = materialize_g(GInverseParam(hat_factors))
    if base_candidate is None:
        G = pseudo_inverse(stack.H, rank_tol)
        base_candidate = assemble_op_candidate(stack, G)
        blocks = build_cl_blocks(stack, G, G_hat)
    else:
        blocks = build_cl_blocks_from_candidate(stack, base_candidate, G_hat)
    report.residuals["ginverse_hat"] = float(
        np.linalg.norm(stack.H_hat @ G_hat @ stack.H_hat - stack.H_hat)
        / np.linalg.norm(stack.H_hat)
    )
    try:
        L = design_gain(base_candidate.A_uie, blocks.C_eff, eps=eps, decay_rate=decay_rate)
    except GainDesignError as exc:
        report.solver_status = "infeasible"
        report.message = str(exc)
        return None, report, blocks
    blocks.L_gain = L
    real = assemble_cl(stack, base_candidate.A_uie, base_candidate.B_uie, blocks)
    rho = real.spectral_radius
    report.spectral_radius = rho
    report.residuals["gain_norm"] = float(np.linalg.norm(L))
    if rho >= 1.0:
        report.solver_status = "numerical-failure"
        return None, report, blocks
    report.solver_status = "feasible"
    return real, report, blocks


def predict_outputs(
    data: IoTrajectory,
    N_init: int,
    u_init,
    y_init,
    u_future,
    res_tol: float = 1e-6,
):
    """Multi-step output prediction from recorded data (no estimator involved).

    Solves [H_init(u); H_init(y); H_pred(u)] g = [u_init; y_init; u_future]
    in the least-squares sense and reads the prediction off H_pred(y) g.
    Requires the stacked right-hand side to be consistent with the data's
    column span to within res_tol (relative); N_init at least the system lag
    and excitation of order N_init + N_pred + n_x are the caller's obligation.

    Returns an (N_pred, n_y) array.
    """
    u_init = np.atleast_2d(np.asarray(u_init, dtype=float))
    y_init = np.atleast_2d(np.asarray(y_init, dtype=float))
    u_future = np.atleast_2d(np.asarray(u_future, dtype=float))
    if u_init.shape != (N_init, data.n_u):
        raise ValueError(f"u_init must be {N_init}x{data.n_u}, got {u_init.shape}")
    if y_init.shape != (N_init, data.n_y):
        raise ValueError(f"y_init must be {N_init}x{data.n_y}, got {y_init.shape}")
    N_pred = u_future.shape[0]
    if N_pred < 1 or u_future.shape[1] != data.n_u:
        raise ValueError("u_future must be a nonempty (N_pred, n_u) array")
    depth = N_init + N_pred
    Hu = build_hankel(data.inputs, depth)
    Hy = build_hankel(data.outputs, depth)
    n_u, n_y = data.n_u, data.n_y
    A_eq = np.vstack([Hu[: N_init * n_u], Hy[: N_init * n_y], Hu[N_init * n_u :]])
    rhs = np.concatenate([u_init.reshape(-1), y_init.reshape(-1), u_future.reshape(-1)])
    g, _, _, _ = np.linalg.lstsq(A_eq, rhs, rcond=None)
    resid = np.linalg.norm(A_eq @ g - rhs)
    if resid > res_tol * max(1.0, np.linalg.norm(rhs)):
        raise ValueError(
            f"window is inconsistent with the dataset (residual {resid:.3e}); "
            "data may not be informative enough or the trajectory is foreign"
        )
    return (Hy[N_init * n_y :] @ g).reshape(N_pred, n_y)
