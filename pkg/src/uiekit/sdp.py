"""Thin semidefinite-feasibility layer used by the estimator designs.

Callers describe a problem as named matrix variables plus affine expressions
that must be positive semidefinite (with an explicit margin eps) or exactly
zero.  Expressions are given as builder callables over a {name: matrix} dict;
because they only use @, +, -, the same builder runs on cvxpy variables during
the solve and on numpy arrays during the independent post-verification.

Every returned assignment is re-checked here by direct eigenvalue and residual
computation; a point that fails the re-check is reported as a numerical
failure, never as feasible.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import cvxpy as cp
import numpy as np

SOLVER_ORDER = ("CLARABEL", "SCS")

#: scaled tolerance for equality-constraint residuals in the post-check
EQUALITY_RESIDUAL_TOL = 1e-7


@dataclass(frozen=True)
class MatrixVar:
    name: str
    shape: tuple
    symmetric: bool = False


@dataclass
class LmiProblem:
    """Feasibility problem: find variables with all PSD blocks >= eps*I.

    psd_blocks and equalities are (label, builder) pairs; a builder maps the
    assignment dict to a square matrix expression (PSD blocks) or to an
    arbitrary matrix expression required to vanish (equalities).

    trace_caps bounds trace(var) per variable name; min_eig puts var >= c*I
    (symmetric variables only).
    """

    variables: list
    psd_blocks: list
    equalities: list = field(default_factory=list)
    trace_caps: dict = field(default_factory=dict)
    min_eig: dict = field(default_factory=dict)


@dataclass(frozen=True)
class FeasibilityResult:
    status: str  # "feasible" | "infeasible" | "numerical-failure"
    assignment: Optional[dict]
    margin: Optional[float]
    checks: dict

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"


def _cvxpy_vars(problem: LmiProblem) -> dict:
    out = {}
    for v in problem.variables:
        out[v.name] = cp.Variable(v.shape, symmetric=v.symmetric)
    return out


def _assignment_scale(assignment: dict) -> float:
    values = [1.0]
    for v in assignment.values():
        arr = np.asarray(v)
        if arr.size:
            values.append(float(np.abs(arr).max()))
    return max(values)


def sym_2x2(W, off):
    """Symmetric block [[W, off], [off', W]] for numpy or cvxpy operands."""
    if isinstance(W, np.ndarray) and isinstance(off, np.ndarray):
        return np.block([[W, off], [off.T, W]])
    return cp.bmat([[W, off], [off.T, W]])


def verify_assignment(problem: LmiProblem, assignment: dict, eps: float) -> dict:
    """Independent numeric re-check of an assignment.

    Returns a dict with 'ok', the minimum eigenvalue per PSD block, and the
    scaled residual per equality.  Acceptance thresholds: block minimum
    eigenvalue >= eps/2 and equality residual <= 1e-7 (scaled by the
    assignment magnitude).
    """
    report = {"ok": True, "block_min_eig": {}, "equality_residual": {}}
    scale = _assignment_scale(assignment)
    for label, builder in problem.psd_blocks:
        val = np.asarray(builder(assignment), dtype=float)
        sym = 0.5 * (val + val.T)
        min_eig = float(np.linalg.eigvalsh(sym).min())
        asym = float(np.abs(val - val.T).max())
        report["block_min_eig"][label] = min_eig
        if min_eig < eps / 2 or asym > 1e-8 * max(1.0, float(np.abs(val).max())):
            report["ok"] = False
    for label, builder in problem.equalities:
        val = np.asarray(builder(assignment), dtype=float)
        resid = float(np.abs(val).max()) / scale
        report["equality_residual"][label] = resid
        if resid > EQUALITY_RESIDUAL_TOL:
            report["ok"] = False
    return report


def solve_feasibility(
    problem: LmiProblem,
    eps: float = 1e-6,
    slack_cap: float = 1.0,
    solvers: tuple = SOLVER_ORDER,
    minimize_fro: Optional[str] = None,
) -> FeasibilityResult:
    """Solve the feasibility problem with a maximized PSD margin.

    The strict inequalities of the underlying design conditions become
    blocks >= (eps + s)*I with the slack s maximized (capped at slack_cap);
    the problem is declared feasible when s >= 0 and the independent
    post-check passes at margin eps/2.

    When minimize_fro names a variable, the objective becomes minimizing that
    variable's Frobenius norm at the fixed margin eps (s pinned to 0), which
    callers use for a low-gain second pass after a plain feasibility solve.
    """
    cvars = _cvxpy_vars(problem)
    s = cp.Variable()
    constraints = [s <= slack_cap] if minimize_fro is None else [s == 0]
    for label, builder in problem.psd_blocks:
        expr = builder(cvars)
        constraints.append(expr >> (eps + s) * np.eye(expr.shape[0]))
    for label, builder in problem.equalities:
        constraints.append(builder(cvars) == 0)
    for name, cap in problem.trace_caps.items():
        constraints.append(cp.trace(cvars[name]) <= cap)
    for name, c in problem.min_eig.items():
        constraints.append(cvars[name] >> c * np.eye(cvars[name].shape[0]))

    if minimize_fro is None:
        objective = cp.Maximize(s)
    else:
        objective = cp.Minimize(cp.norm(cvars[minimize_fro], "fro"))
    prob = cp.Problem(objective, constraints)
    last_error = None
    for solver in solvers:
        try:
            with warnings.catch_warnings():
                # inaccurate-solution warnings are expected near infeasibility;
                # the post-check below is what decides acceptance
                warnings.simplefilter("ignore", UserWarning)
                prob.solve(solver=solver)
        except (cp.error.SolverError, ValueError) as exc:
            last_error = str(exc)
            continue
        if prob.status in ("optimal", "optimal_inaccurate"):
            break
        if prob.status in ("infeasible", "infeasible_inaccurate"):
            return FeasibilityResult("infeasible", None, None, {"solver_status": prob.status})
    else:
        return FeasibilityResult(
            "numerical-failure", None, None, {"solver_error": last_error or prob.status}
        )

    slack = s.value
    if slack is None or any(cvars[v.name].value is None for v in problem.variables):
        return FeasibilityResult("numerical-failure", None, None, {"solver_status": prob.status})
    if slack < -1e-9:
        return FeasibilityResult(
            "infeasible", None, float(slack), {"solver_status": prob.status}
        )
    slack = max(slack, 0.0)
    assignment = {v.name: np.asarray(cvars[v.name].value, dtype=float) for v in problem.variables}
    report = verify_assignment(problem, assignment, eps)
    report["solver_status"] = prob.status
    if not report["ok"]:
        # distinguish marginal infeasibility from solver junk: a PSD
        # shortfall at solver-tolerance level relative to the variable scale
        # means the margin eps is simply not attainable
        scale = _assignment_scale(assignment)
        shortfall = max(
            (max(0.0, -m) for m in report["block_min_eig"].values()), default=0.0
        )
        equalities_ok = all(
            r <= EQUALITY_RESIDUAL_TOL for r in report["equality_residual"].values()
        )
        status = (
            "infeasible" if equalities_ok and shortfall / scale <= 1e-6 else "numerical-failure"
        )
        return FeasibilityResult(status, None, float(slack), report)
    return FeasibilityResult("feasible", assignment, float(eps + slack), report)


def dump_problem(problem: LmiProblem, assignment: dict, path) -> None:
    """Write each block and equality at the given assignment as plain text."""
    with open(path, "w", encoding="utf-8") as fh:
        for v in problem.variables:
            fh.write(f"# variable {v.name} shape={v.shape} symmetric={v.symmetric}\n")
            np.savetxt(fh, np.atleast_2d(assignment[v.name]), fmt="%.16e")
        for label, builder in problem.psd_blocks:
            fh.write(f"# psd_block {label}\n")
            np.savetxt(fh, np.asarray(builder(assignment), dtype=float), fmt="%.16e")
        for label, builder in problem.equalities:
            fh.write(f"# equality {label}\n")
            np.savetxt(fh, np.asarray(builder(assignment), dtype=float), fmt="%.16e")
