"""Open-loop estimator synthesis from the Hankel design stack.

The candidate set is parametrized by a free matrix F through the SVD of H
(A = N1 + N2 F N3 on the non-shift rows); stability is certified by a
structured Lyapunov LMI in (W, M, N) with the recovery F = N M^-1 T2 T1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import sdp
from .gen_inverse import (
    DEFAULT_RANK_TOL,
    GInverseParam,
    SvdRank,
    materialize_g,
    null_inclusion,
    svd_with_rank,
)
from .hankel import HankelDesignStack

GINVERSE_RESIDUAL_TOL = 1e-6
M_CONDITION_LIMIT = 1e12


def schur_radius(A) -> float:
    """Largest eigenvalue modulus of a square matrix."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got {A.shape}")
    if A.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(A))))


@dataclass(frozen=True)
class UieRealization:
    """Recursive estimator matrices z+ = A_uie z + B_uie d, u_hat = last block of z."""

    A_uie: np.ndarray
    B_uie: np.ndarray
    N_init: int
    N_est: int
    n_u: int
    n_y: int
    kind: str  # "open-loop" | "closed-loop"

    def __post_init__(self):
        n_z = self.N_init * self.n_u
        n_d = (self.N_init + self.N_est) * self.n_y
        A = np.asarray(self.A_uie, dtype=float)
        B = np.asarray(self.B_uie, dtype=float)
        if A.shape != (n_z, n_z):
            raise ValueError(f"A_uie must be {n_z}x{n_z}, got {A.shape}")
        if B.shape != (n_z, n_d):
            raise ValueError(f"B_uie must be {n_z}x{n_d}, got {B.shape}")
        if self.kind not in ("open-loop", "closed-loop"):
            raise ValueError(f"unknown kind {self.kind!r}")
        object.__setattr__(self, "A_uie", A)
        object.__setattr__(self, "B_uie", B)

    @property
    def spectral_radius(self) -> float:
        return schur_radius(self.A_uie)

    @property
    def n_z(self) -> int:
        return self.N_init * self.n_u

    @property
    def n_d(self) -> int:
        return (self.N_init + self.N_est) * self.n_y


def save_realization(real: UieRealization, path, extra: Optional[dict] = None) -> None:
    """Write a realization to JSON; `extra` merges additional top-level keys."""
    payload = {
        "A_uie": real.A_uie.tolist(),
        "B_uie": real.B_uie.tolist(),
        "N_init": real.N_init,
        "N_est": real.N_est,
        "n_u": real.n_u,
        "n_y": real.n_y,
        "kind": real.kind,
        "spectral_radius": real.spectral_radius,
    }
    if extra:
        payload.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)


def load_realization(path) -> UieRealization:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    return UieRealization(
        A_uie=np.array(payload["A_uie"], dtype=float),
        B_uie=np.array(payload["B_uie"], dtype=float),
        N_init=int(payload["N_init"]),
        N_est=int(payload["N_est"]),
        n_u=int(payload["n_u"]),
        n_y=int(payload["n_y"]),
        kind=payload["kind"],
    )


def _shift_block(N_init: int, n_u: int) -> np.ndarray:
    """Top rows [0 I] advancing the stacked input-estimate window."""
    n_z = N_init * n_u
    top = np.zeros(((N_init - 1) * n_u, n_z))
    top[:, n_u:] = np.eye((N_init - 1) * n_u)
    return top


def assemble_op_candidate(stack: HankelDesignStack, G: np.ndarray) -> UieRealization:
    """Assemble (A_uie, B_uie) from a generalized inverse of the stack's H.

    G must satisfy H G H = H to within a 1e-6 relative residual; it splits as
    [G_u G_y] with N_init*n_u and (N_init+N_est)*n_y columns.  No stability is
    implied.
    """
    G = np.asarray(G, dtype=float)
    H = stack.H
    if G.shape != (H.shape[1], H.shape[0]):
        raise ValueError(f"G must be {H.shape[1]}x{H.shape[0]}, got {G.shape}")
    resid = np.linalg.norm(H @ G @ H - H) / max(np.linalg.norm(H), np.finfo(float).tiny)
    if resid > GINVERSE_RESIDUAL_TOL:
        raise ValueError(
            f"G fails the generalized-inverse check: |HGH - H|/|H| = {resid:.3e}"
        )
    n_z = stack.n_z
    G_u, G_y = G[:, :n_z], G[:, n_z:]
    A = np.vstack([_shift_block(stack.N_init, stack.n_u), stack.H_u @ G_u])
    B = np.vstack([np.zeros(((stack.N_init - 1) * stack.n_u, stack.n_d)), stack.H_u @ G_y])
    return UieRealization(A, B, stack.N_init, stack.N_est, stack.n_u, stack.n_y, "open-loop")


def _gauss_jordan(M: np.ndarray, tol: float = 1e-10):
    """Row-reduce M, returning the elementary-operation product E and the rank."""
    R = M.copy()
    m = R.shape[0]
    E = np.eye(m)
    row = 0
    scale = max(float(np.abs(R).max()) if R.size else 0.0, 1.0)
    for col in range(R.shape[1]):
        if row >= m:
            break
        piv = row + int(np.argmax(np.abs(R[row:, col])))
        if abs(R[piv, col]) <= tol * scale:
            continue
        if piv != row:
            R[[row, piv]] = R[[piv, row]]
            E[[row, piv]] = E[[piv, row]]
        f = R[row, col]
        R[row] /= f
        E[row] /= f
        for i in range(m):
            if i != row and R[i, col] != 0.0:
                g = R[i, col]
                R[i] -= g * R[row]
                E[i] -= g * E[row]
        row += 1
    return E, row


@dataclass(frozen=True)
class OpLmiData:
    """Pieces of the affine parametrization A(F) = N1 + N2 F N3 and its reduction."""

    svd: SvdRank
    N1: np.ndarray
    N2: np.ndarray
    N3: np.ndarray
    T1: np.ndarray
    T2: np.ndarray
    r: int
    lift: np.ndarray  # [0; I_{n_u}] mapping the new estimate into the state


def build_lmi_data(stack: HankelDesignStack, rank_tol: float = DEFAULT_RANK_TOL) -> OpLmiData:
    """SVD the stack and build N1, N2, N3, T1, T2 and r = rank(T1 N3).

    T2 = [I_r 0] E with E the Gauss-Jordan row reduction of T1 N3, so
    T2 T1 N3 has full row rank r; r = 0 (no design freedom) is legal.
    """
    f = svd_with_rank(stack.H, rank_tol)
    n_rows, n_S = f.n_rows, f.n_S
    n_z, n_u = stack.n_z, stack.n_u
    sel_top = np.zeros((n_rows, n_z))
    sel_top[:n_z] = np.eye(n_z)
    N3 = f.U.T @ sel_top
    lift = np.zeros((n_z, n_u))
    lift[-n_u:] = np.eye(n_u)
    N2 = lift @ stack.H_u @ f.V
    N1 = np.vstack([_shift_block(stack.N_init, n_u), np.zeros((n_u, n_z))]) + N2 @ f.sigma_plus() @ N3
    T1 = np.zeros((n_rows - n_S, n_rows))
    if n_rows > n_S:
        T1[:, n_S:] = np.eye(n_rows - n_S)
    E, r = _gauss_jordan(T1 @ N3)
    T2 = E[:r]
    return OpLmiData(svd=f, N1=N1, N2=N2, N3=N3, T1=T1, T2=T2, r=r, lift=lift)


@dataclass
class DesignReport:
    """Diagnostics from one design attempt."""

    pe_order_checked: Optional[int]
    null_inclusion_ok: bool
    n_S: int
    r: int
    solver_status: str  # "feasible" | "infeasible" | "numerical-failure"
    spectral_radius: Optional[float]
    residuals: dict = field(default_factory=dict)
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "pe_order_checked": self.pe_order_checked,
            "null_inclusion_ok": bool(self.null_inclusion_ok),
            "n_S": int(self.n_S),
            "r": int(self.r),
            "solver_status": self.solver_status,
            "spectral_radius": self.spectral_radius,
            "residuals": {k: float(v) for k, v in self.residuals.items()},
            "message": self.message,
        }


def candidate_radius_floor(data: OpLmiData, n_probes: int = 3, seed: int = 0) -> float:
    """Probe for eigenvalues shared by every candidate (design-invariant modes).

    Samples random admissible perturbations of the free block and keeps the
    eigenvalues common to all probes; returns the largest modulus among them
    (0.0 when nothing is pinned).  Purely diagnostic.
    """
    T1N3 = data.T1 @ data.N3
    if T1N3.shape[0] == 0:
        return schur_radius(data.N1)
    rng = np.random.default_rng(seed)
    n_u = data.lift.shape[1]
    eig_sets = [np.linalg.eigvals(data.N1)]
    for _ in range(n_probes):
        theta = rng.normal(size=(n_u, T1N3.shape[0]))
        eig_sets.append(np.linalg.eigvals(data.N1 + data.lift @ theta @ T1N3))
    fixed = []
    for lam in eig_sets[0]:
        if all(np.min(np.abs(es - lam)) < 1e-6 * max(1.0, abs(lam)) for es in eig_sets[1:]):
            fixed.append(abs(lam))
    return float(max(fixed)) if fixed else 0.0


def design_op_uie(
    stack: HankelDesignStack,
    rank_tol: float = DEFAULT_RANK_TOL,
    eps: float = 1e-6,
    decay_rate: float = 1.0,
    trace_cap: float = 1e6,
    pe_order_checked: Optional[int] = None,
):
    """Synthesize a Schur-stable open-loop estimator, if the LMI permits.

    Solves the structured feasibility problem in W (Lyapunov), M (r x r) and
    N (n_cols x r): the Lyapunov block of A(F) W with F = N M^-1 T2 T1, plus
    the invariance equality T2 T1 N3 W = M T2 T1 N3.  decay_rate < 1 designs
    on A/decay_rate and thereby certifies spectral radius < decay_rate.

    Returns (realization, report); realization is None unless the report's
    solver_status is "feasible".  Infeasibility of the tightened LMI is
    inconclusive about estimator existence and is reported as such.
    """
    if not 0 < decay_rate <= 1.0:
        raise ValueError("decay_rate must be in (0, 1]")
    incl_ok, incl_resid = null_inclusion(stack.H, stack.H_u, rank_tol)
    data = build_lmi_data(stack, rank_tol)
    n_z = stack.n_z
    report = DesignReport(
        pe_order_checked=pe_order_checked,
        null_inclusion_ok=incl_ok,
        n_S=data.svd.n_S,
        r=data.r,
        solver_status="infeasible",
        spectral_radius=None,
        residuals={"null_inclusion": incl_resid},
    )
    report.residuals["radius_floor_probe"] = candidate_radius_floor(data)
    if not incl_ok:
        return None, report

    T21N3 = data.T2 @ data.T1 @ data.N3
    N1s, N2s = data.N1 / decay_rate, data.N2 / decay_rate

    if data.r == 0:
        # No design freedom: the candidate is pinned at the F = 0 member.
        rho = schur_radius(data.N1)
        report.spectral_radius = rho
        if rho >= decay_rate:
            return None, report
        F = np.zeros((data.svd.n_cols, data.svd.n_rows))
        problem = sdp.LmiProblem(
            variables=[sdp.MatrixVar("W", (n_z, n_z), symmetric=True)],
            psd_blocks=[("lyapunov", lambda v: sdp.sym_2x2(v["W"], N1s @ v["W"]))],
            trace_caps={"W": trace_cap},
            min_eig={"W": 1e-8},
        )
        result = sdp.solve_feasibility(problem, eps=eps)
        report.solver_status = result.status
        if not result.feasible:
            return None, report
        report.residuals["lmi_margin"] = result.margin
    else:
        n_cols = data.svd.n_cols
        r = data.r

        def lyapunov_block(v):
            return sdp.sym_2x2(v["W"], N1s @ v["W"] + N2s @ v["N"] @ T21N3)

        problem = sdp.LmiProblem(
            variables=[
                sdp.MatrixVar("W", (n_z, n_z), symmetric=True),
                sdp.MatrixVar("M", (r, r)),
                sdp.MatrixVar("N", (n_cols, r)),
            ],
            psd_blocks=[("lyapunov", lyapunov_block)],
            equalities=[("invariance", lambda v: T21N3 @ v["W"] - v["M"] @ T21N3)],
            trace_caps={"W": trace_cap},
            min_eig={"W": 1e-8},
        )
        result = sdp.solve_feasibility(problem, eps=eps)
        report.solver_status = result.status
        if not result.feasible:
            return None, report
        report.residuals["lmi_margin"] = result.margin
        M = result.assignment["M"]
        cond_M = float(np.linalg.cond(M))
        report.residuals["cond_M"] = cond_M
        if not np.isfinite(cond_M) or cond_M > M_CONDITION_LIMIT:
            report.solver_status = "numerical-failure"
            return None, report
        F = result.assignment["N"] @ np.linalg.solve(M, data.T2 @ data.T1)

    report.residuals["f_zero_columns"] = float(
        np.abs(F[:, : data.svd.n_S]).max() if data.svd.n_S else 0.0
    )
    G = materialize_g(GInverseParam(data.svd, F))
    try:
        real = assemble_op_candidate(stack, G)
    except ValueError:
        report.solver_status = "numerical-failure"
        return None, report
    rho = real.spectral_radius
    report.spectral_radius = rho
    report.residuals["ginverse"] = float(
        np.linalg.norm(stack.H @ G @ stack.H - stack.H) / np.linalg.norm(stack.H)
    )
    if rho >= 1.0:
        report.solver_status = "numerical-failure"
        return None, report
    return real, report
