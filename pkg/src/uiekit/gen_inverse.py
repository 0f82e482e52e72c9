"""Numerical rank, null spaces, and the SVD parametrization of generalized inverses.

For a matrix H with SVD H = U [S 0; 0 0] V', every G with H G H = H can be
written G(F) = V ([S^-1 0; 0 0] + F) U' where F has the shape of G and a zero
upper-left n_S x n_S block.  F = 0 recovers the Moore-Penrose pseudoinverse.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_RANK_TOL = 1e-8


@dataclass(frozen=True)
class SvdRank:
    """Full SVD factors of a matrix plus its numerical rank."""

    U: np.ndarray
    s: np.ndarray
    V: np.ndarray
    n_S: int

    @property
    def n_rows(self) -> int:
        return self.U.shape[0]

    @property
    def n_cols(self) -> int:
        return self.V.shape[0]

    def sigma_plus(self) -> np.ndarray:
        """The (n_cols x n_rows) matrix [S^-1 0; 0 0]."""
        out = np.zeros((self.n_cols, self.n_rows))
        if self.n_S:
            out[: self.n_S, : self.n_S] = np.diag(1.0 / self.s[: self.n_S])
        return out

    def reconstruct(self) -> np.ndarray:
        sigma = np.zeros((self.n_rows, self.n_cols))
        k = min(self.n_rows, self.n_cols)
        sigma[:k, :k] = np.diag(self.s[:k])
        return self.U @ sigma @ self.V.T


def svd_with_rank(M, rank_tol: float = DEFAULT_RANK_TOL) -> SvdRank:
    """Full SVD with the numerical rank under a relative tolerance.

    n_S counts singular values above rank_tol * sigma_max; a zero matrix has
    n_S = 0.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        raise ValueError("matrix must be nonempty")
    U, s, Vt = np.linalg.svd(M, full_matrices=True)
    n_S = int(np.sum(s > rank_tol * s[0])) if s.size and s[0] > 0 else 0
    return SvdRank(U=U, s=s, V=Vt.T, n_S=n_S)


@dataclass(frozen=True)
class GInverseParam:
    """One generalized inverse G(F), stored through its SVD factors.

    F must be (n_cols x n_rows) with a zero upper-left n_S x n_S block; the
    block is re-zeroed structurally on construction so the admissibility
    invariant holds exactly.
    """

    svd: SvdRank
    F: np.ndarray = field(default=None)

    def __post_init__(self):
        n_rows, n_cols, n_S = self.svd.n_rows, self.svd.n_cols, self.svd.n_S
        F = self.F
        if F is None:
            F = np.zeros((n_cols, n_rows))
        F = np.asarray(F, dtype=float).copy()
        if F.shape != (n_cols, n_rows):
            raise ValueError(f"F must be {n_cols}x{n_rows}, got {F.shape}")
        F[:n_S, :n_S] = 0.0
        object.__setattr__(self, "F", F)


def materialize_g(p: GInverseParam) -> np.ndarray:
    """Evaluate G(F) = V ([S^-1 0; 0 0] + F) U'."""
    return p.svd.V @ (p.svd.sigma_plus() + p.F) @ p.svd.U.T


def pseudo_inverse(M, rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Moore-Penrose pseudoinverse under this module's rank policy (F = 0)."""
    return materialize_g(GInverseParam(svd_with_rank(M, rank_tol)))


def null_space_basis(M, rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Orthonormal basis of the numerical null space, one column per direction.

    Returns an (n_cols x (n_cols - n_S)) matrix; zero columns for full
    column rank.
    """
    f = svd_with_rank(M, rank_tol)
    return f.V[:, f.n_S :]


def null_inclusion(H, H_u, rank_tol: float = DEFAULT_RANK_TOL):
    """Test Null(H) subseteq Null(H_u) via the image norm of a null basis.

    Returns (ok, residual) where residual = ||H_u Z||_2 for an orthonormal
    basis Z of Null(H); inclusion holds when the residual is at most
    rank_tol * max(1, ||H_u||_2).
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    H_u = np.atleast_2d(np.asarray(H_u, dtype=float))
    if H.shape[1] != H_u.shape[1]:
        raise ValueError(
            f"column counts differ: H has {H.shape[1]}, H_u has {H_u.shape[1]}"
        )
    Z = null_space_basis(H, rank_tol)
    if Z.shape[1] == 0:
        return True, 0.0
    residual = float(np.linalg.norm(H_u @ Z, 2))
    ok = residual <= rank_tol * max(1.0, float(np.linalg.norm(H_u, 2)))
    return ok, residual


def random_admissible_f(svd: SvdRank, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """Draw a dense admissible F (zero upper-left block) for tests and probes."""
    F = rng.normal(0.0, scale, size=(svd.n_cols, svd.n_rows))
    F[: svd.n_S, : svd.n_S] = 0.0
    return F
