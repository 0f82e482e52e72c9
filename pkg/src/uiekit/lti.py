"""Discrete-time LTI systems: simulation, observability lag, excitation signals.

This module is the ground-truth side of the toolkit.  Everything here works
with explicit state-space matrices and is used to generate datasets and to
cross-check the data-driven machinery; the design modules themselves never
see a state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


class UnobservableError(ValueError):
    """Raised when the observability matrix never reaches full rank."""


def _as_matrix(M, name: str) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2:
        raise ValueError(f"{name} must be a 2-D matrix, got ndim={M.ndim}")
    return M


@dataclass(frozen=True)
class LtiSystem:
    """State-space system x+ = A x + B u, y = C x + D u."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        B = _as_matrix(self.B, "B")
        C = _as_matrix(self.C, "C")
        D = _as_matrix(self.D, "D")
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise ValueError(f"B must have {A.shape[0]} rows, got {B.shape}")
        if C.shape[1] != A.shape[0]:
            raise ValueError(f"C must have {A.shape[0]} columns, got {C.shape}")
        if D.shape != (C.shape[0], B.shape[1]):
            raise ValueError(f"D must be {C.shape[0]}x{B.shape[1]}, got {D.shape}")
        if min(A.shape[0], B.shape[1], C.shape[0]) < 1:
            raise ValueError("system dimensions must all be at least 1")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)

    @property
    def n_x(self) -> int:
        return self.A.shape[0]

    @property
    def n_u(self) -> int:
        return self.B.shape[1]

    @property
    def n_y(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True)
class IoTrajectory:
    """Time-aligned input/output record of one run.

    inputs has shape (T, n_u) and outputs shape (T, n_y); row t holds the
    sample pair (u_t, y_t).
    """

    inputs: np.ndarray
    outputs: np.ndarray

    def __post_init__(self):
        u = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        y = np.atleast_2d(np.asarray(self.outputs, dtype=float))
        if u.shape[0] != y.shape[0]:
            raise ValueError(
                f"inputs and outputs must have equal length, got {u.shape[0]} and {y.shape[0]}"
            )
        if u.shape[0] < 1:
            raise ValueError("trajectory must contain at least one sample")
        object.__setattr__(self, "inputs", u)
        object.__setattr__(self, "outputs", y)

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def n_u(self) -> int:
        return self.inputs.shape[1]

    @property
    def n_y(self) -> int:
        return self.outputs.shape[1]


def simulate(sys: LtiSystem, x0, u_seq) -> IoTrajectory:
    """Run the state recursion over an input sequence.

    Args:
        sys: system to simulate.
        x0: initial state, length n_x.
        u_seq: (T, n_u) array (or sequence of input vectors).

    Returns:
        IoTrajectory pairing the given inputs with the computed outputs.
    """
    x = np.asarray(x0, dtype=float).reshape(-1)
    if x.shape[0] != sys.n_x:
        raise ValueError(f"x0 must have dimension {sys.n_x}, got {x.shape[0]}")
    u_seq = np.atleast_2d(np.asarray(u_seq, dtype=float))
    if u_seq.shape[1] != sys.n_u:
        raise ValueError(f"inputs must have dimension {sys.n_u}, got {u_seq.shape[1]}")
    T = u_seq.shape[0]
    y_seq = np.empty((T, sys.n_y))
    for t in range(T):
        y_seq[t] = sys.C @ x + sys.D @ u_seq[t]
        x = sys.A @ x + sys.B @ u_seq[t]
    return IoTrajectory(u_seq.copy(), y_seq)


def observability_matrix(sys: LtiSystem, depth: int) -> np.ndarray:
    """Stack C, CA, ..., CA^(depth-1)."""
    blocks = []
    Ak = np.eye(sys.n_x)
    for _ in range(depth):
        blocks.append(sys.C @ Ak)
        Ak = Ak @ sys.A
    return np.vstack(blocks)


def lag(sys: LtiSystem, rank_tol: float = 1e-9) -> int:
    """Smallest depth at which the observability matrix has full state rank.

    Rank is judged by singular values above rank_tol times the largest one.
    Raises UnobservableError if full rank is not reached by depth n_x.
    """
    if rank_tol <= 0:
        raise ValueError("rank_tol must be positive")
    for ell in range(1, sys.n_x + 1):
        O = observability_matrix(sys, ell)
        s = np.linalg.svd(O, compute_uv=False)
        if s[0] > 0 and np.sum(s > rank_tol * s[0]) == sys.n_x:
            return ell
    raise UnobservableError(
        f"system unobservable: rank never reaches {sys.n_x} up to depth {sys.n_x}"
    )


def random_excitation(T: int, n_u: int, seed: int, scale: float = 1.0) -> np.ndarray:
    """Seeded excitation signal: (T, n_u) i.i.d. uniform on [-scale, scale].

    Uses numpy's PCG64 generator (np.random.default_rng) so datasets are
    reproducible from the seed alone.
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    if n_u < 1:
        raise ValueError("n_u must be at least 1")
    if scale <= 0:
        raise ValueError("scale must be positive (degenerate excitation)")
    rng = np.random.default_rng(seed)
    return rng.uniform(-scale, scale, size=(T, n_u))


def save_system(sys: LtiSystem, path) -> None:
    """Write the system matrices to JSON with keys A, B, C, D."""
    payload = {k: getattr(sys, k).tolist() for k in ("A", "B", "C", "D")}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)


def load_system(path) -> LtiSystem:
    """Read a system from a JSON file with keys A, B, C, D (row-major arrays)."""
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    try:
        return LtiSystem(
            np.array(payload["A"], dtype=float),
            np.array(payload["B"], dtype=float),
            np.array(payload["C"], dtype=float),
            np.array(payload["D"], dtype=float),
        )
    except KeyError as exc:
        raise ValueError(f"system file missing key {exc}") from exc
