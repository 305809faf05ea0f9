"""Vertex-contraction quality diagnostics.

After contracting a Poisson-weighted graph, the standardized residuals
(A - EA)/sqrt(EA) of a well-chosen contraction behave like independent
standard normals. These helpers build the residual matrix, sketch it down
to a p x p submatrix, and compare its singular values against Monte Carlo
baselines for an i.i.d. standard normal matrix.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .util import atomic_write_json, format_float, read_json, write_json

DEFAULT_CACHE_DIR = Path(os.environ.get("GCLUST_CACHE_DIR",
                                        Path.home() / ".cache" / "gclust"))


@dataclass
class ResidualMatrix:
    """Entrywise standardized residuals, tagged with the mean estimate used."""

    delta: np.ndarray
    source: str = "true_mean"


@dataclass
class GaussianBaseline:
    """Expected singular values of a p x p i.i.d. standard normal matrix."""

    p: int
    sigma_bar: np.ndarray
    reps: int
    seed: int
    stderr: np.ndarray


def residual_matrix(A, mean, source="true_mean") -> ResidualMatrix:
    """(A - mean) / sqrt(mean), entrywise; every mean entry must be positive."""
    A = np.asarray(A, dtype=float)
    mean = np.asarray(mean, dtype=float)
    if A.shape != mean.shape:
        raise ValueError("A and mean must have the same shape")
    if np.any(mean <= 0):
        raise ValueError("mean entries must all be positive")
    return ResidualMatrix((A - mean) / np.sqrt(mean), source=source)


def selection_matrix(indices, m) -> np.ndarray:
    """p x m row-selection matrix picking the given distinct indices."""
    indices = np.asarray(indices, dtype=np.int64)
    if indices.ndim != 1 or indices.size == 0:
        raise ValueError("need at least one index")
    if len(set(indices.tolist())) != indices.size:
        raise ValueError("selection indices must be distinct")
    if indices.min() < 0 or indices.max() >= m:
        raise ValueError("selection index out of range")
    S = np.zeros((indices.size, m))
    S[np.arange(indices.size), indices] = 1.0
    return S


def sketch(delta, S) -> np.ndarray:
    """Principal submatrix S delta S^T selected by standard-basis rows of S."""
    delta = np.asarray(delta, dtype=float)
    S = np.asarray(S, dtype=float)
    if delta.ndim != 2 or delta.shape[0] != delta.shape[1]:
        raise ValueError("delta must be square")
    if S.ndim != 2 or S.shape[1] != delta.shape[0]:
        raise ValueError("S must be p x m with m matching delta")
    ok = np.all(np.isin(S, (0.0, 1.0))) and np.all(S.sum(axis=1) == 1)
    if not ok:
        raise ValueError("rows of S must be standard basis vectors")
    cols = np.argmax(S, axis=1)
    if len(set(cols.tolist())) != cols.size:
        raise ValueError("rows of S must be distinct")
    return delta[np.ix_(cols, cols)]


def _baseline_cache_path(cache_dir, p, reps, seed) -> Path:
    return Path(cache_dir) / f"gaussian_baseline_p{p}_reps{reps}_seed{seed}.json"


def gaussian_singular_baseline(p, reps=100_000, seed=0, cache_dir=None,
                               use_cache=True) -> GaussianBaseline:
    """Monte Carlo expected singular values of a p x p standard normal matrix.

    Draws ``reps`` matrices, averages the sorted singular values, and
    reports the standard error of each mean. Results are cached on disk
    keyed by (p, reps, seed); the cache write is atomic so concurrent
    callers see either nothing or a complete file.
    """
    if p < 1:
        raise ValueError("p must be positive")
    if reps < 100:
        raise ValueError("need reps >= 100 for usable standard errors")
    cache_dir = DEFAULT_CACHE_DIR if cache_dir is None else Path(cache_dir)
    cache_path = _baseline_cache_path(cache_dir, p, reps, seed)
    if use_cache and cache_path.exists():
        data = read_json(cache_path)
        return GaussianBaseline(p=data["p"], sigma_bar=np.asarray(data["sigma_bar"]),
                                reps=data["reps"], seed=data["seed"],
                                stderr=np.asarray(data["stderr"]))
    rng = np.random.default_rng(seed)
    total = np.zeros(p)
    total_sq = np.zeros(p)
    chunk = max(1, min(reps, 200_000 // max(p * p, 1)))
    done = 0
    while done < reps:
        b = min(chunk, reps - done)
        sv = np.linalg.svd(rng.standard_normal((b, p, p)), compute_uv=False)
        total += sv.sum(axis=0)
        total_sq += (sv * sv).sum(axis=0)
        done += b
    sigma_bar = total / reps
    var = (total_sq - reps * sigma_bar**2) / (reps - 1)
    stderr = np.sqrt(np.maximum(var, 0.0) / reps)
    baseline = GaussianBaseline(p=int(p), sigma_bar=sigma_bar, reps=int(reps),
                                seed=int(seed), stderr=stderr)
    if use_cache:
        atomic_write_json(cache_path, {
            "p": baseline.p, "reps": baseline.reps, "seed": baseline.seed,
            "sigma_bar": [float(format_float(x)) for x in sigma_bar],
            "stderr": [float(format_float(x)) for x in stderr],
        })
    return baseline


def contraction_mse(delta_hat, baseline: GaussianBaseline) -> float:
    """Root mean squared gap between observed and expected singular values.

    Small values mean the sketched residuals look like i.i.d. standard
    normal noise, i.e. the contraction left no unexplained structure.
    """
    delta_hat = np.asarray(delta_hat, dtype=float)
    if delta_hat.ndim != 2 or delta_hat.shape[0] != delta_hat.shape[1]:
        raise ValueError("delta_hat must be square")
    p = delta_hat.shape[0]
    if p != baseline.p:
        raise ValueError(f"baseline is for p={baseline.p}, got p={p}")
    sv = np.linalg.svd(delta_hat, compute_uv=False)
    return float(np.sqrt(np.mean((sv - baseline.sigma_bar) ** 2)))


def svt_mse(estimate, true_mean) -> float:
    """Squared Frobenius error normalized by the number of entries."""
    estimate = np.asarray(estimate, dtype=float)
    true_mean = np.asarray(true_mean, dtype=float)
    if estimate.shape != true_mean.shape:
        raise ValueError("shape mismatch")
    diff = estimate - true_mean
    return float(np.sum(diff * diff) / diff.size)


def save_residual_report(path_csv, path_json, per_slice_sv, baseline: GaussianBaseline,
                         mse_by_slice) -> None:
    """CSV of (slice, index, observed, expected) singular values + MSE JSON."""
    with open(path_csv, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "l", "sigma_hat", "sigma_bar"])
        for t in sorted(per_slice_sv):
            for l, sv in enumerate(per_slice_sv[t], start=1):
                writer.writerow([t, l, format_float(sv),
                                 format_float(baseline.sigma_bar[l - 1])])
    write_json(path_json, {
        "p": baseline.p,
        "baseline_reps": baseline.reps,
        "baseline_seed": baseline.seed,
        "mse": {str(t): float(format_float(v)) for t, v in mse_by_slice.items()},
    })
