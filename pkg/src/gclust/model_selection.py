"""Cluster-count selection for graph sequences.

``gclust`` denoises the data matrix by iterated SVT, column-normalizes, and
factorizes with a multi-restart NMF; ``aicc`` scores a factorization by a
plug-in entropy loss plus a support-size penalty; ``get_gclust_model_dim``
scans inner dimensions and picks the smallest minimizer.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .ingest import DataMatrix
from .nmf import Factorization, best_of_restarts
from .spectral import isvt
from .util import derive_seed, format_float, write_json


@dataclass
class ModelScore:
    """One row of a model-selection table."""

    r: int
    loss: float
    penalty: float
    aicc: float
    restart_seed: int | None = None


@dataclass
class GclustResult:
    """Winning factorization for a fixed inner dimension, with column labels."""

    factorization: Factorization
    labels: np.ndarray
    score: ModelScore
    degenerate_columns: int = 0
    label_ties: int = 0

    @property
    def W(self):
        return self.factorization.W

    @property
    def H(self):
        return self.factorization.H


@dataclass
class ModelDimResult:
    r_hat: int
    table: list
    results: list

    @property
    def best(self) -> GclustResult:
        return self.results[[s.r for s in self.table].index(self.r_hat)]


def aicc(W, H, N, zero_tol=1e-8, r=None, restart_seed=None) -> ModelScore:
    """Entropy loss plus support penalty for a column-normalized factorization.

    loss    = -sum_{l,t} theta log(theta) with theta = (W H)_{l,t}, 0 log 0 = 0
    penalty = 1/2 sum_k (C_k - 1) / Q_k

    where C_k counts the entries of column k of W exceeding ``zero_tol``
    times that column's maximum, and Q_k = sum_t N_t H_{k,t} is the event
    mass attributed to cluster k. N comes from the raw (pre-normalization)
    data.
    """
    W = np.asarray(W, dtype=float)
    H = np.asarray(H, dtype=float)
    N = np.asarray(N, dtype=float)
    if W.ndim != 2 or H.ndim != 2 or W.shape[1] != H.shape[0]:
        raise ValueError("W and H have inconsistent shapes")
    if N.shape != (H.shape[1],):
        raise ValueError("N must have one entry per column of H")
    if np.any(N <= 0):
        raise ValueError("all column totals N_t must be positive")
    colsum = W.sum(axis=0)
    if np.any(np.abs(colsum - 1.0) > 1e-6):
        raise ValueError("W must be column-normalized (each column sums to 1)")

    theta = W @ H
    pos = theta > 0
    loss = -float(np.sum(theta[pos] * np.log(theta[pos])))

    thresholds = zero_tol * W.max(axis=0)
    C = (W > thresholds[None, :]).sum(axis=0).astype(float)
    Q = H @ N
    if np.any(Q <= 0):
        raise ValueError("empty cluster: some Q_k is not positive")
    penalty = 0.5 * float(np.sum((C - 1.0) / Q))
    return ModelScore(r=int(W.shape[1]) if r is None else int(r),
                      loss=loss, penalty=penalty, aicc=loss + penalty,
                      restart_seed=restart_seed)


def extract_labels(H, return_ties=False):
    """Cluster label of each column: 1-based argmax over rows of H.

    Ties go to the smallest cluster index; ``return_ties`` additionally
    reports how many columns were tied.
    """
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.size == 0:
        raise ValueError("H must be a non-empty matrix")
    if np.any(H.max(axis=0) <= 0):
        raise ValueError("H has an all-zero column; labels undefined")
    labels = np.argmax(H, axis=0) + 1
    ties = int(np.sum((H == H.max(axis=0)[None, :]).sum(axis=0) > 1))
    if return_ties:
        return labels, ties
    return labels


def _as_data_matrix(X) -> DataMatrix:
    if isinstance(X, DataMatrix):
        return X
    return DataMatrix(np.asarray(X, dtype=float))


def gclust(X, r, solver="ls", restarts=20, seed=0, alpha=0.0, beta=0.0,
           nmf_tol=1e-9, nmf_max_iter=2000, isvt_tol=None, isvt_max_iter=100,
           zero_tol=1e-8, N=None) -> GclustResult:
    """Cluster the columns of a graph-sequence matrix with a fixed cluster count.

    Pipeline: iterated SVT at rank r, column normalization, multi-restart
    NMF; labels are the argmax rows of H and the score is the AICc of the
    winning factorization with N taken from the raw input (or given
    explicitly).

    A denoised column whose entries sum to zero cannot be normalized; it is
    replaced by the uniform column and counted in ``degenerate_columns``.
    """
    dm = _as_data_matrix(X)
    Xraw = dm.X
    if not np.any(Xraw):
        raise ValueError("X is identically zero")
    if not 1 <= r <= min(Xraw.shape):
        raise ValueError(f"r={r} out of range for shape {Xraw.shape}")
    N = dm.N if N is None else np.asarray(N, dtype=float)

    denoised = isvt(Xraw, r, tol=isvt_tol, max_iter=isvt_max_iter).estimate
    colsum = denoised.sum(axis=0)
    degenerate = int(np.sum(colsum <= 0))
    if degenerate:
        denoised = denoised.copy()
        denoised[:, colsum <= 0] = 1.0 / denoised.shape[0]
        colsum = denoised.sum(axis=0)
    Xhat = denoised / colsum[None, :]

    fac = best_of_restarts(Xhat, r, solver=solver, restarts=restarts, base_seed=seed,
                           tol=nmf_tol, max_iter=nmf_max_iter,
                           **({"alpha": alpha, "beta": beta} if solver == "ls" else {}))
    labels, ties = extract_labels(fac.H, return_ties=True)
    score = aicc(fac.W, fac.H, N, zero_tol=zero_tol, r=r, restart_seed=fac.seed)
    return GclustResult(fac, labels, score, degenerate_columns=degenerate, label_ties=ties)


def get_gclust_model_dim(X, r_max=None, restarts=20, r_min=1, seed=0, **kwargs) -> ModelDimResult:
    """Score inner dimensions r_min..r_max and return the smallest AICc minimizer.

    Each r is scored through :func:`gclust` with its own derived seed, so
    the scan is reproducible and order-independent. The full score table is
    returned along with the per-r results.
    """
    dm = _as_data_matrix(X)
    if r_max is None:
        r_max = min(dm.T, 12, dm.n_rows)
    if not 1 <= r_min <= r_max <= min(dm.X.shape):
        raise ValueError(f"need 1 <= r_min <= r_max <= {min(dm.X.shape)}")
    table, results = [], []
    for r in range(r_min, r_max + 1):
        res = gclust(dm, r, seed=derive_seed(seed, r), restarts=restarts, **kwargs)
        table.append(res.score)
        results.append(res)
    best = min(table, key=lambda s: (s.aicc, s.r))
    return ModelDimResult(best.r, table, results)


def save_score_table(table, path) -> None:
    """CSV with columns r, loss, penalty, aicc — one row per inner dimension."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["r", "loss", "penalty", "aicc"])
        for s in table:
            writer.writerow([s.r, format_float(s.loss), format_float(s.penalty),
                             format_float(s.aicc)])


def save_labels(result: GclustResult, path) -> None:
    write_json(path, {
        "r": result.score.r,
        "labels": [int(x) for x in result.labels],
        "restart_seed": result.score.restart_seed,
        "label_ties": result.label_ties,
        "degenerate_columns": result.degenerate_columns,
    })
