"""Dense matrix primitives: vectorisation, norms and proximal maps.

Matrices are plain 2-D ``float64`` numpy arrays. The semantic vec convention is
column-major, so that ``vec(A @ X @ B) == kron(B.T, A) @ vec(X)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

#: singular values at or below ``RANK_RTOL * s_max`` count as zero
RANK_RTOL = 1e-12


def as_mat(M, name="matrix") -> np.ndarray:
    """Validate and convert ``M`` to a finite 2-D float64 array."""
    A = np.asarray(M, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise InvalidInputError(f"{name} must be a non-empty 2-D array, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return A


def _check_tau(tau):
    tau = float(tau)
    if not tau >= 0 or not np.isfinite(tau):
        raise InvalidInputError(f"threshold must be a finite non-negative number, got {tau}")
    return tau


def vec(M) -> np.ndarray:
    """Stack the columns of ``M`` into one vector (entry ``i + p*j`` is ``M[i, j]``)."""
    return as_mat(M).ravel(order="F")


def unvec(v, p: int, q: int) -> np.ndarray:
    """Inverse of :func:`vec`."""
    v = np.asarray(v, dtype=np.float64)
    if v.size != p * q:
        raise InvalidInputError(f"vector of length {v.size} cannot be reshaped to {p}x{q}")
    return v.reshape((p, q), order="F")


def inner(M, N) -> float:
    """Trace inner product ``tr(M^T N)``."""
    M, N = as_mat(M), as_mat(N)
    if M.shape != N.shape:
        raise InvalidInputError(f"shape mismatch {M.shape} vs {N.shape}")
    return float(np.vdot(M, N))


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD ``M = left @ diag(singulars) @ right.T``."""

    left: np.ndarray
    singulars: np.ndarray
    right: np.ndarray

    @property
    def rank(self) -> int:
        return numerical_rank(self.singulars)

    def reconstruct(self) -> np.ndarray:
        return (self.left * self.singulars) @ self.right.T


def svd_factors(M) -> SvdFactors:
    U, s, Vt = np.linalg.svd(as_mat(M), full_matrices=False)
    return SvdFactors(U, s, Vt.T)


def numerical_rank(singulars) -> int:
    """Number of singular values above ``RANK_RTOL`` times the largest one."""
    s = np.asarray(singulars, dtype=np.float64)
    if s.size == 0:
        return 0
    smax = float(s.max())
    if smax <= 0.0:
        return 0
    return int(np.count_nonzero(s > RANK_RTOL * smax))


def nuclear_norm(M) -> float:
    """Sum of singular values."""
    return float(np.linalg.svd(as_mat(M), compute_uv=False).sum())


def svt_with_singulars(M, tau):
    """Singular value thresholding, also returning the shrunken singular values.

    Returns ``(B, s)`` where ``s`` holds the nonzero thresholded singular
    values in nonincreasing order, so ``nuclear_norm(B) == s.sum()``.
    """
    M = as_mat(M)
    tau = _check_tau(tau)
    if tau == 0.0:
        s = np.linalg.svd(M, compute_uv=False)
        return M.copy(), s[s > 0]
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    shrunk = s - tau
    k = int(np.count_nonzero(shrunk > 0))
    if k == 0:
        return np.zeros_like(M), shrunk[:0]
    shrunk = shrunk[:k]
    return (U[:, :k] * shrunk) @ Vt[:k], shrunk


def svt(M, tau) -> np.ndarray:
    """Proximal map of ``tau * ||.||_*``: keep singular vectors, shrink values by ``tau``."""
    return svt_with_singulars(M, tau)[0]


def soft_threshold(M, tau) -> np.ndarray:
    """Entrywise ``sign(m) * max(|m| - tau, 0)``; proximal map of ``tau * ||.||_{1,1}``."""
    M = as_mat(M)
    tau = _check_tau(tau)
    return np.sign(M) * np.maximum(np.abs(M) - tau, 0.0)


def spectral_norm(M, rtol: float = 1e-10, max_iter: int = 10000) -> float:
    """Largest singular value by power iteration on ``M^T M``."""
    M = as_mat(M)
    if not np.any(M):
        return 0.0
    # fixed start vector keeps the function deterministic
    v = np.random.default_rng(0x5EED).standard_normal(M.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = M.T @ (M @ v)
        lam_new = float(v @ w)
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            return 0.0
        v = w / norm_w
        if abs(lam_new - lam) <= rtol * lam_new:
            lam = lam_new
            break
        lam = lam_new
    # one more Rayleigh quotient at the converged vector
    Mv = M @ v
    return float(np.sqrt(max(lam, float(Mv @ Mv))))
