"""Non-negative matrix factorization by multiplicative updates.

Two solvers are provided: a squared-error ("ls", Lee-Seung style, with
optional Frobenius regularizers) and a KL-divergence solver ("kl",
Brunet style). Both share the initialization, normalization gauge and
restart protocol, so their convergence behaviour can be compared via the
fixed-point residuals below.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .util import derive_seed, format_float, write_json, save_matrix_csv

_EPS = 1e-12

SOLVERS = ("ls", "kl")


@dataclass
class Factorization:
    """One NMF solution X ~ W H with inner dimension r.

    W is column-normalized (each column sums to one) with H absorbing the
    scale, so the product is unchanged by the gauge fix. ``seed`` is the
    derived integer that seeded this run; ``trace`` holds optional
    (iteration, objective, eps_W, eps_H) checkpoints.
    """

    W: np.ndarray
    H: np.ndarray
    r: int
    objective: float
    seed: int
    iterations: int
    converged: bool
    solver: str = "ls"
    trace: list = field(default=None)

    def reconstruct(self) -> np.ndarray:
        return self.W @ self.H


@dataclass
class FixedPointError:
    """Frobenius norms of the two fixed-point residual maps."""

    eps_W: float
    eps_H: float
    rank_used: int


def _validate_input(X, r):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be a matrix")
    if X.min() < 0:
        raise ValueError("X must be non-negative")
    if not np.any(X):
        raise ValueError("X is identically zero; nothing to factorize")
    if not 1 <= r <= min(X.shape):
        raise ValueError(f"inner dimension r={r} out of range for shape {X.shape}")
    return X


def _init_factors(X, r, seed):
    """Uniform(0,1) entries rescaled so mean(WH) matches mean(X)."""
    rng = np.random.default_rng(seed)
    n, T = X.shape
    W = rng.uniform(size=(n, r))
    H = rng.uniform(size=(r, T))
    scale = np.sqrt(X.mean() / max((W @ H).mean(), _EPS))
    return W * scale, H * scale


def normalize_columns(W, H):
    """Gauge fix: scale so every column of W sums to one, H absorbs the scale.

    An exactly-zero column of W is replaced by the uniform column and its H
    row zeroed, which leaves the product WH unchanged.
    """
    W = np.array(W, dtype=float)
    H = np.array(H, dtype=float)
    s = W.sum(axis=0)
    dead = s <= 0.0
    if np.any(dead):
        W[:, dead] = 1.0 / W.shape[0]
        H[dead, :] = 0.0
        s = np.where(dead, 1.0, s)
    W /= s
    H *= s[:, None]
    return W, H


def _ls_objective(X, W, H, alpha, beta):
    R = X - W @ H
    obj = float(np.sum(R * R))
    if alpha:
        obj += alpha * float(np.sum(W * W))
    if beta:
        obj += beta * float(np.sum(H * H))
    return obj


def _kl_objective(X, W, H, xlogx_sum, x_sum):
    WH = np.maximum(W @ H, _EPS)
    return float(xlogx_sum - np.sum(X * np.log(WH)) - x_sum + WH.sum())


def _snapshot(trace, it, obj, W, H, ref, rank_tol):
    Wn, Hn = normalize_columns(W, H)
    fp = fixed_point_residuals(Wn, Hn, ref, rank_tol=rank_tol)
    trace.append((it, obj, fp.eps_W, fp.eps_H))


def _run_solver(kind, X, r, alpha, beta, seed, tol, max_iter, checkpoints, checkpoint_ref, rank_tol):
    X = _validate_input(X, r)
    W, H = _init_factors(X, r, seed)
    checkpoints = sorted(set(int(c) for c in checkpoints)) if checkpoints is not None else None
    trace = [] if checkpoints is not None else None
    ref = X if checkpoint_ref is None else np.asarray(checkpoint_ref, dtype=float)

    if kind == "ls":
        obj = _ls_objective(X, W, H, alpha, beta)
    else:
        xlogx_sum = float(np.sum(X[X > 0] * np.log(X[X > 0])))
        x_sum = float(X.sum())
        obj = _kl_objective(X, W, H, xlogx_sum, x_sum)
    if checkpoints is not None and 0 in checkpoints:
        _snapshot(trace, 0, obj, W, H, ref, rank_tol)

    stop_enabled = tol > 0  # tol=0 means: always spend the full iteration budget
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        if kind == "ls":
            W *= (X @ H.T) / (W @ (H @ H.T) + alpha * W + _EPS)
            H *= (W.T @ X) / ((W.T @ W) @ H + beta * H + _EPS)
            new_obj = _ls_objective(X, W, H, alpha, beta)
        else:
            WH = np.maximum(W @ H, _EPS)
            W *= ((X / WH) @ H.T) / (np.sum(H, axis=1)[None, :] + _EPS)
            WH = np.maximum(W @ H, _EPS)
            H *= (W.T @ (X / WH)) / (np.sum(W, axis=0)[:, None] + _EPS)
            new_obj = _kl_objective(X, W, H, xlogx_sum, x_sum)
        if checkpoints is not None and it in checkpoints:
            _snapshot(trace, it, new_obj, W, H, ref, rank_tol)
        done = stop_enabled and abs(obj - new_obj) <= tol * max(abs(obj), 1e-300)
        obj = new_obj
        if done:
            converged = True
            break
    W, H = normalize_columns(W, H)
    return Factorization(W, H, r, obj, int(seed), it, converged, solver=kind, trace=trace)


def nmf_ls(X, r, alpha=0.0, beta=0.0, seed=0, tol=1e-9, max_iter=2000,
           checkpoints=None, checkpoint_ref=None, rank_tol=1e-10) -> Factorization:
    """Squared-error NMF with optional squared-Frobenius regularizers.

    Minimizes ``||X - WH||_F^2 + alpha ||W||_F^2 + beta ||H||_F^2`` by the
    multiplicative updates

        W <- W * (X H^T) / (W H H^T + alpha W + eps)
        H <- H * (W^T X) / (W^T W H + beta H + eps)

    whose objective is non-increasing. Stops when the relative objective
    change drops below ``tol`` (pass 0 to always run ``max_iter`` updates,
    e.g. for iteration-budget comparisons).
    """
    if alpha < 0 or beta < 0:
        raise ValueError("regularizers must be non-negative")
    return _run_solver("ls", X, r, alpha, beta, seed, tol, max_iter,
                       checkpoints, checkpoint_ref, rank_tol)


def nmf_kl(X, r, seed=0, tol=1e-9, max_iter=2000,
           checkpoints=None, checkpoint_ref=None, rank_tol=1e-10) -> Factorization:
    """KL-divergence NMF (Brunet-style multiplicative updates)."""
    return _run_solver("kl", X, r, 0.0, 0.0, seed, tol, max_iter,
                       checkpoints, checkpoint_ref, rank_tol)


def best_of_restarts(X, r, solver="ls", restarts=20, base_seed=0, **kwargs) -> Factorization:
    """Best factorization over seeded restarts.

    Restart k runs with the seed derived from (base_seed, k); the winner has
    the smallest objective, ties broken by the smaller derived seed, so the
    result does not depend on execution order.
    """
    if solver not in SOLVERS:
        raise ValueError(f"unknown solver {solver!r}; expected one of {SOLVERS}")
    if restarts < 1:
        raise ValueError("need at least one restart")
    fn = nmf_ls if solver == "ls" else nmf_kl
    best = None
    for k in range(restarts):
        fac = fn(X, r, seed=derive_seed(base_seed, k), **kwargs)
        if best is None or (fac.objective, fac.seed) < (best.objective, best.seed):
            best = fac
    return best


def fixed_point_residuals(W, H, Xref, rank_tol=1e-10) -> FixedPointError:
    """Residuals of the stationarity maps that vanish only at exact factorizations.

    With Xref = U S V^T (truncated at the numerical rank) the two maps are

        F(W, H) = W   - Xref H^T W^T (U S^-2 U^T) W
        G(W, H) = H^T - Xref^T W H (V S^-2 V^T) H^T

    and the returned values are their Frobenius norms. When Xref = W H
    exactly and rank(Xref) equals the inner dimension, both vanish; the
    norms therefore measure how far (W, H) is from solving the fixed-point
    equations, separately for each factor.
    """
    W = np.asarray(W, dtype=float)
    H = np.asarray(H, dtype=float)
    Xref = np.asarray(Xref, dtype=float)
    if W.ndim != 2 or H.ndim != 2 or W.shape[1] != H.shape[0]:
        raise ValueError("W and H have inconsistent shapes")
    if Xref.shape != (W.shape[0], H.shape[1]):
        raise ValueError("Xref shape does not match W H")
    if not np.any(Xref):
        raise ValueError("Xref is identically zero")
    U, S, Vt = np.linalg.svd(Xref, full_matrices=False)
    keep = S > S[0] * rank_tol
    U, S, Vt = U[:, keep], S[keep], Vt[keep, :]
    inv_s2 = 1.0 / (S * S)

    A = U.T @ W                                    # k x r
    F = W - (Xref @ H.T) @ ((A * inv_s2[:, None]).T @ A)
    C = H @ Vt.T                                   # r x k
    G = H.T - (Xref.T @ W) @ ((C * inv_s2[None, :]) @ C.T)
    return FixedPointError(float(np.linalg.norm(F)), float(np.linalg.norm(G)), int(S.size))


@dataclass
class SolverTraceRow:
    solver: str
    iteration: int
    objective: float
    eps_W: float
    eps_H: float


def compare_solvers(X, r, restarts=20, iter_grid=(0, 10, 100, 1000), base_seed=0,
                    alpha=0.0, beta=0.0, ref=None, rank_tol=1e-10) -> list:
    """Median convergence traces of the two solvers at fixed iteration budgets.

    Runs both solvers from the same seeded restarts without early stopping
    and records, at every iteration in ``iter_grid``, the median over
    restarts of (objective, eps_W, eps_H) measured against ``ref``
    (default: X itself).
    """
    X = _validate_input(X, r)
    grid = sorted(set(int(c) for c in iter_grid))
    if not grid or grid[0] < 0:
        raise ValueError("iter_grid must hold non-negative iteration counts")
    rows = []
    for solver in SOLVERS:
        fn = nmf_ls if solver == "ls" else nmf_kl
        kwargs = {"alpha": alpha, "beta": beta} if solver == "ls" else {}
        traces = []
        for k in range(restarts):
            fac = fn(X, r, seed=derive_seed(base_seed, k), tol=0.0,
                     max_iter=grid[-1], checkpoints=grid, checkpoint_ref=ref,
                     rank_tol=rank_tol, **kwargs)
            traces.append(fac.trace)
        for j, it in enumerate(grid):
            objs = np.median([t[j][1] for t in traces])
            ews = np.median([t[j][2] for t in traces])
            ehs = np.median([t[j][3] for t in traces])
            rows.append(SolverTraceRow(solver, it, float(objs), float(ews), float(ehs)))
    return rows


def save_factorization(fac: Factorization, w_path, h_path, meta_path, eps=None) -> None:
    """W and H as CSV plus JSON metadata (r, seed, objective, residuals)."""
    save_matrix_csv(w_path, fac.W)
    save_matrix_csv(h_path, fac.H)
    meta = {
        "r": fac.r,
        "seed": fac.seed,
        "objective": float(format_float(fac.objective)),
        "iterations": fac.iterations,
        "converged": fac.converged,
        "solver": fac.solver,
    }
    if eps is not None:
        meta["eps_W"] = float(format_float(eps.eps_W))
        meta["eps_H"] = float(format_float(eps.eps_H))
    write_json(meta_path, meta)
