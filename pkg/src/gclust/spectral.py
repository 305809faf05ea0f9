"""Singular value machinery: truncated SVD, rank thresholding, spectral embedding.

All decompositions go through LAPACK via numpy and share one sign convention
(largest-magnitude entry of each left singular vector is positive), so
repeated runs on the same input are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .util import format_float, save_matrix_csv, load_matrix_csv  # noqa: F401  (CSV in/out re-exported)


@dataclass
class SvdTriple:
    """Top-k singular triple: U (n x k), S (k,), V (m x k), S non-increasing."""

    U: np.ndarray
    S: np.ndarray
    V: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.S) @ self.V.T


@dataclass
class SvtResult:
    """Denoised matrix from (iterated) rank truncation."""

    estimate: np.ndarray
    rank_used: int
    iterations: int
    residual_trace: list = field(default_factory=list)
    converged: bool = True


def _signed_svd(M):
    """Full thin SVD with deterministic signs (U, S, Vt)."""
    U, S, Vt = np.linalg.svd(np.asarray(M, dtype=float), full_matrices=False)
    for k in range(U.shape[1]):
        idx = np.argmax(np.abs(U[:, k]))
        if U[idx, k] < 0:
            U[:, k] = -U[:, k]
            Vt[k, :] = -Vt[k, :]
    return U, S, Vt


def truncated_svd(M, k) -> SvdTriple:
    """Top-k singular triple of a dense matrix.

    The reconstruction U_k S_k V_k^T is the Frobenius-optimal rank-k
    approximation of M.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ValueError("M must be a matrix")
    if not 1 <= k <= min(M.shape):
        raise ValueError(f"k={k} out of range for shape {M.shape}")
    U, S, Vt = _signed_svd(M)
    return SvdTriple(U[:, :k].copy(), S[:k].copy(), Vt[:k, :].T.copy())


def singular_values(M) -> np.ndarray:
    return np.linalg.svd(np.asarray(M, dtype=float), compute_uv=False)


def svt(M, r) -> SvtResult:
    """Rank-r singular value thresholding: keep the top r singular directions."""
    M = np.asarray(M, dtype=float)
    if not 0 <= r <= min(M.shape):
        raise ValueError(f"r={r} out of range for shape {M.shape}")
    if r == 0:
        est = np.zeros_like(M)
        return SvtResult(est, 0, 1, [float(np.linalg.norm(M))])
    triple = truncated_svd(M, r)
    est = triple.reconstruct()
    return SvtResult(est, r, 1, [float(np.linalg.norm(M - est))])


def clip(M, C) -> np.ndarray:
    """Entrywise min(M, C); bounds heavy-tailed counts before thresholding."""
    if C <= 0:
        raise ValueError("clip constant must be positive")
    return np.minimum(np.asarray(M, dtype=float), float(C))


def usvt_rank(M, c=2.02) -> int:
    """Universal threshold rank: count singular values above sqrt(c * min(dims)).

    The constant c may be any number greater than 2; 2.02 is the default.
    The input is expected to be clipped/bounded beforehand.
    """
    M = np.asarray(M, dtype=float)
    if M.size == 0 or not np.any(M):
        return 0
    thresh = np.sqrt(c * min(M.shape))
    return int(np.sum(singular_values(M) > thresh))


def usvt(M, c=2.02, clip_value=None, clip_q=99.9) -> SvtResult:
    """Clip, pick the rank by the universal threshold, then apply SVT.

    clip_value defaults to the clip_q-th percentile of the entries of M.
    """
    M = np.asarray(M, dtype=float)
    if clip_value is None:
        clip_value = float(np.percentile(M, clip_q))
    if clip_value <= 0:
        clip_value = max(float(M.max()), 1.0)
    Y = clip(M, clip_value)
    r = usvt_rank(Y, c=c)
    return svt(Y, r)


def isvt(M, r, tol=None, max_iter=100) -> SvtResult:
    """Iterated SVT with a non-negativity clamp between iterations.

    Repeats ``M_{k+1} = max(0, svt(M_k, r))`` until two consecutive iterates
    differ by less than ``tol`` in Frobenius norm. ``tol`` defaults to
    1e-6 times the Frobenius norm of the input. A run that exhausts
    ``max_iter`` is returned with ``converged=False``; the caller decides.
    """
    M = np.asarray(M, dtype=float)
    if not 0 <= r <= min(M.shape):
        raise ValueError(f"r={r} out of range for shape {M.shape}")
    if tol is None:
        tol = 1e-6 * max(float(np.linalg.norm(M)), 1e-300)
    if tol <= 0:
        raise ValueError("tol must be positive")
    current = M
    trace = []
    for it in range(1, max_iter + 1):
        nxt = np.maximum(svt(current, r).estimate, 0.0)
        change = float(np.linalg.norm(nxt - current))
        trace.append(change)
        current = nxt
        if change < tol:
            return SvtResult(current, r, it, trace, converged=True)
    return SvtResult(current, r, max_iter, trace, converged=False)


def ase(A, d) -> np.ndarray:
    """Adjacency spectral embedding U_d S_d^{1/2} of a symmetric matrix.

    For positive semidefinite A the outer product of the embedding equals
    the rank-d SVT estimate.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    if not np.allclose(A, A.T, rtol=1e-8, atol=1e-10 * max(1.0, float(np.abs(A).max()))):
        raise ValueError("A must be symmetric")
    if not 1 <= d <= A.shape[0]:
        raise ValueError(f"d={d} out of range for n={A.shape[0]}")
    triple = truncated_svd(A, d)
    return triple.U * np.sqrt(triple.S)


def stfp_dim(A) -> int:
    """Count singular values above 3^{1/4} n^{3/4} log^{1/4}(n) (natural log)."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    n = A.shape[0]
    if n < 2:
        raise ValueError("need n >= 2")
    thresh = 3.0 ** 0.25 * n ** 0.75 * np.log(n) ** 0.25
    return int(np.sum(singular_values(A) > thresh))


def save_singular_values(path, values) -> None:
    """CSV dump (index, value) for scree plots."""
    values = np.asarray(values, dtype=float)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("index,value\n")
        for i, v in enumerate(values, start=1):
            fh.write(f"{i},{format_float(v)}\n")
