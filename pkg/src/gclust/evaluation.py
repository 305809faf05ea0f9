"""Benchmarks for graph-sequence clustering.

Holds the clustering quality metric (adjusted Rand index), two baseline
selectors (medoid clustering on pairwise graph distances, and a
Gaussian-mixture fit on a spectral projection), a block-structured Poisson
graph simulator, reference datasets (a two-pattern community fixture and
the swimmer image benchmark), and a seeded Monte Carlo driver that compares
the methods over an intensity-by-contraction grid.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .ingest import ContractionMap, DataMatrix, GraphSequence, contract_vertices, vectorize
from .model_selection import get_gclust_model_dim
from .util import derive_rng, derive_seed, format_float


# ---------------------------------------------------------------------------
# metrics

def adjusted_rand_index(a, b) -> float:
    """Chance-corrected agreement of two labelings of the same items.

    Computed from the contingency table; 1 means identical partitions up to
    relabeling, 0 is the chance level, negative values are worse than chance.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 1 or a.shape != b.shape:
        raise ValueError("labelings must be equal-length vectors")
    if a.size < 2:
        raise ValueError("need at least two items")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(table, (ai, bi), 1.0)

    def comb2(x):
        return x * (x - 1.0) / 2.0

    sum_cells = comb2(table).sum()
    sum_rows = comb2(table.sum(axis=1)).sum()
    sum_cols = comb2(table.sum(axis=0)).sum()
    expected = sum_rows * sum_cols / comb2(a.size)
    max_index = 0.5 * (sum_rows + sum_cols)
    if max_index == expected:
        return 1.0
    return float((sum_cells - expected) / (max_index - expected))


def pairwise_frobenius(g: GraphSequence) -> np.ndarray:
    """T x T matrix of Frobenius distances between graph slices."""
    if g.T < 2:
        raise ValueError("need at least two slices")
    flat = g.slices.reshape(g.T, -1)
    D = np.zeros((g.T, g.T))
    for i in range(g.T):
        for j in range(i + 1, g.T):
            D[i, j] = D[j, i] = float(np.linalg.norm(flat[i] - flat[j]))
    return D


# ---------------------------------------------------------------------------
# baseline 1: partition around medoids on a dissimilarity matrix

def _pam(D, k):
    """Classic PAM: greedy BUILD then steepest-descent SWAP. Deterministic."""
    T = D.shape[0]
    medoids = [int(np.argmin(D.sum(axis=1)))]
    while len(medoids) < k:
        nearest = D[:, medoids].min(axis=1)
        gains = np.array([-np.inf if j in medoids else
                          float(np.maximum(nearest - D[:, j], 0.0).sum())
                          for j in range(T)])
        medoids.append(int(np.argmax(gains)))

    def cost(meds):
        return float(D[:, meds].min(axis=1).sum())

    current = cost(medoids)
    while True:
        best = (current, None, None)
        for mi in range(k):
            for j in range(T):
                if j in medoids:
                    continue
                trial = list(medoids)
                trial[mi] = j
                c = cost(trial)
                if c < best[0] - 1e-12:
                    best = (c, mi, j)
        if best[1] is None:
            break
        medoids[best[1]] = best[2]
        current = best[0]
    labels = np.argmin(D[:, medoids], axis=1) + 1
    return medoids, labels


def silhouette_width(D, labels) -> float:
    """Mean silhouette of a labeling under a precomputed dissimilarity matrix."""
    labels = np.asarray(labels)
    uniq = np.unique(labels)
    if uniq.size < 2:
        raise ValueError("silhouette needs at least two clusters")
    T = labels.size
    widths = np.zeros(T)
    for i in range(T):
        own = labels == labels[i]
        if own.sum() == 1:
            widths[i] = 0.0
            continue
        a = D[i, own].sum() / (own.sum() - 1)
        b = min(D[i, labels == c].mean() for c in uniq if c != labels[i])
        denom = max(a, b)
        widths[i] = 0.0 if denom == 0 else (b - a) / denom
    return float(widths.mean())


def pamk(D, k_range=(2, 3, 4, 5)):
    """Medoid clustering with the cluster count picked by silhouette width.

    Returns (k_hat, labels). When even the best silhouette is below 0.25
    the data shows no grouping structure and a single cluster is reported.
    """
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValueError("D must be square")
    if np.any(D < 0) or not np.allclose(np.diag(D), 0.0):
        raise ValueError("D must be a dissimilarity matrix with zero diagonal")
    T = D.shape[0]
    k_range = sorted(set(int(k) for k in k_range))
    if not k_range or k_range[0] < 2 or k_range[-1] > T - 1:
        raise ValueError(f"k_range must lie within 2..{T - 1}")
    best_k, best_sil, best_labels = None, -np.inf, None
    for k in k_range:
        _, labels = _pam(D, k)
        if np.unique(labels).size < 2:
            continue  # duplicate medoids left a single effective cluster
        sil = silhouette_width(D, labels)
        if sil > best_sil:
            best_k, best_sil, best_labels = k, sil, labels
    if best_sil < 0.25:
        return 1, np.ones(T, dtype=np.int64)
    return best_k, best_labels


# ---------------------------------------------------------------------------
# baseline 2: spherical Gaussian mixture on a spectral projection

def zhu_ghodsi_elbow(values) -> int:
    """Profile-likelihood elbow of a non-increasing positive sequence.

    Each split point q models values[:q] and values[q:] as Gaussians with a
    common variance; the q with the highest profile log-likelihood wins. A
    constant sequence degenerates to 1.
    """
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size < 2:
        raise ValueError("need at least two values")
    if np.any(v <= 0):
        raise ValueError("values must be positive")
    if np.any(np.diff(v) > 1e-12 * v[0]):
        raise ValueError("values must be non-increasing")
    n = v.size
    best_q, best_ll = 1, -np.inf
    for q in range(1, n):
        ss = np.sum((v[:q] - v[:q].mean()) ** 2) + np.sum((v[q:] - v[q:].mean()) ** 2)
        sigma2 = ss / n
        ll = np.inf if sigma2 <= 0 else -0.5 * n * (np.log(2 * np.pi * sigma2) + 1.0)
        if ll > best_ll:
            best_q, best_ll = q, ll
    return best_q


class _DegenerateMixture(Exception):
    pass


def _fit_spherical_gmm(points, k, rng, max_iter=300, tol=1e-8):
    """EM for a k-component spherical Gaussian mixture; returns (loglik, bic, labels).

    Raises _DegenerateMixture when a component collapses onto a single point
    or its variance hits the regularization floor, since such fits have an
    unbounded likelihood and no meaningful BIC.
    """
    T, d = points.shape
    if k > T:
        raise ValueError("more components than points")
    reg = 1e-6 * max(float(points.var()), 1e-12)
    means = points[rng.choice(T, size=k, replace=False)].copy()
    var = np.full(k, max(float(points.var()), 1e-8))
    weights = np.full(k, 1.0 / k)
    loglik = -np.inf
    for _ in range(max_iter):
        sq = ((points[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)
        log_joint = (np.log(weights)[None, :]
                     - 0.5 * (sq / var[None, :] + d * np.log(2 * np.pi * var[None, :])))
        m = log_joint.max(axis=1, keepdims=True)
        log_norm = m + np.log(np.exp(log_joint - m).sum(axis=1, keepdims=True))
        resp = np.exp(log_joint - log_norm)
        new_loglik = float(log_norm.sum())
        nk = resp.sum(axis=0)
        if np.any(nk < 1e-8):
            raise _DegenerateMixture(f"empty component (sizes {nk})")
        weights = nk / T
        means = (resp.T @ points) / nk[:, None]
        sq = ((points[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)
        var = (resp * sq).sum(axis=0) / (nk * d) + reg
        if abs(new_loglik - loglik) < tol * max(1.0, abs(new_loglik)):
            loglik = new_loglik
            break
        loglik = new_loglik
    if k > 1 and (np.any(nk <= 1.0 + 1e-9) or np.any(var <= 2.0 * reg)):
        raise _DegenerateMixture("singleton or variance-collapsed component")
    n_params = (k - 1) + k * d + k
    bic = -2.0 * loglik + n_params * np.log(T)
    labels = np.argmax(resp, axis=1) + 1
    return loglik, bic, labels


def gmm_pca_cluster(X, k_range=(1, 2, 3, 4, 5), seed=0, max_restarts=5):
    """Cluster columns of X: spectral projection, then BIC-selected mixture.

    The projection dimension comes from the profile-likelihood elbow of the
    singular values; spherical Gaussian mixtures are fit by EM for each k
    and the best BIC wins. A degenerate EM run is retried with a fresh seed
    up to ``max_restarts`` times; a k that stays degenerate drops out of the
    comparison, and only when every candidate fails does the call error.
    """
    dm = X if isinstance(X, DataMatrix) else DataMatrix(np.asarray(X, dtype=float))
    if dm.T < 2:
        raise ValueError("need at least two columns")
    U, S, _ = np.linalg.svd(dm.X, full_matrices=False)
    positive = S > S[0] * 1e-12 if S[0] > 0 else np.zeros_like(S, dtype=bool)
    if not np.any(positive):
        raise ValueError("X is identically zero")
    sv = S[positive]
    d_hat = 1 if sv.size < 2 else zhu_ghodsi_elbow(sv)
    points = (U[:, :d_hat].T @ dm.X).T

    k_range = sorted(set(int(k) for k in k_range))
    if not k_range or k_range[0] < 1:
        raise ValueError("k_range must hold positive integers")
    best = None
    for k in k_range:
        fitted = None
        for attempt in range(max_restarts):
            rng = derive_rng(seed, k, attempt)
            try:
                fitted = _fit_spherical_gmm(points, k, rng)
                break
            except _DegenerateMixture:
                continue
        if fitted is None:
            continue
        _, bic, labels = fitted
        if best is None or bic < best[0] - 1e-12:
            best = (bic, k, labels)
    if best is None:
        raise RuntimeError(f"EM degenerate for every k in {k_range} "
                           f"after {max_restarts} restarts each")
    return best[1], best[2]


# ---------------------------------------------------------------------------
# block-structured Poisson simulator

def permutation_from_cycles(n, cycles):
    """0-based image array of a permutation given in 1-based cycle notation."""
    sigma = np.arange(n)
    for cyc in cycles:
        for a, b in zip(cyc, list(cyc[1:]) + [cyc[0]]):
            sigma[a - 1] = b - 1
    return sigma


def permute_matrix(B, row_cycles=(), col_cycles=()):
    """Apply cycle permutations: row/column i moves to position sigma(i)."""
    B = np.asarray(B, dtype=float)
    out = B
    if row_cycles:
        sigma = permutation_from_cycles(B.shape[0], row_cycles)
        out = out[np.argsort(sigma), :]
    if col_cycles:
        sigma = permutation_from_cycles(B.shape[1], col_cycles)
        out = out[:, np.argsort(sigma)]
    return out


def default_block_patterns():
    """The two 5 x 5 block mean patterns used by the benchmark simulations.

    The second pattern is the first with rows permuted by the cycle (4152)
    and columns by the transposition (43), so both share the same total
    intensity but differ in structure.
    """
    B1 = np.array([
        [0.1,   0.045, 0.015, 0.19,  0.001],
        [0.045, 0.05,  0.035, 0.14,  0.03],
        [0.015, 0.035, 0.08,  0.105, 0.04],
        [0.19,  0.14,  0.105, 0.29,  0.13],
        [0.001, 0.03,  0.04,  0.13,  0.09],
    ])
    B2 = permute_matrix(B1, row_cycles=[(4, 1, 5, 2)], col_cycles=[(4, 3)])
    return B1, B2


@dataclass
class BlockModelSpec:
    """Dynamic block model: T graphs, each drawn around one of a few patterns.

    Vertex i belongs to block ceil(i/m); slice t has independent Poisson
    entries with mean rho * B^{(schedule[t])}_{block(i), block(j)}.
    """

    patterns: list
    m: int = 5
    schedule: np.ndarray = field(default=None)
    rho: float = 1.0

    def __post_init__(self):
        self.patterns = [np.asarray(B, dtype=float) for B in self.patterns]
        K = self.patterns[0].shape[0]
        for B in self.patterns:
            if B.shape != (K, K) or np.any(B < 0):
                raise ValueError("patterns must be square, non-negative, equal-sized")
        if self.m < 1:
            raise ValueError("m must be positive")
        if not 0 < self.rho <= 1:
            raise ValueError("rho must lie in (0, 1]")
        if self.schedule is None:
            self.schedule = np.array([1 + t % len(self.patterns) for t in range(10)])
        self.schedule = np.asarray(self.schedule, dtype=np.int64)
        if self.schedule.min() < 1 or self.schedule.max() > len(self.patterns):
            raise ValueError("schedule entries must index the pattern list (1-based)")

    @property
    def n(self) -> int:
        return int(self.patterns[0].shape[0] * self.m)

    @property
    def T(self) -> int:
        return int(self.schedule.size)

    def mean_slice(self, t) -> np.ndarray:
        B = self.patterns[self.schedule[t] - 1]
        return self.rho * np.kron(B, np.ones((self.m, self.m)))


def simulate_block_poisson(spec: BlockModelSpec, seed=0) -> GraphSequence:
    """Independent Poisson edge counts around the scheduled block patterns."""
    rng = np.random.default_rng(seed)
    slices = np.empty((spec.T, spec.n, spec.n))
    for t in range(spec.T):
        slices[t] = rng.poisson(spec.mean_slice(t)).astype(float)
    return GraphSequence(slices)


def block_contraction(spec: BlockModelSpec) -> ContractionMap:
    """Within-block contraction: each block collapses to one super-vertex."""
    return ContractionMap(np.repeat(np.arange(spec.patterns[0].shape[0]), spec.m))


# ---------------------------------------------------------------------------
# reference datasets

def community_factors(kappa=0.1):
    """The 6 x 3 factor L (and R = L^T) behind the two community patterns."""
    if not 0 <= kappa <= 1:
        raise ValueError("kappa must lie in [0, 1]")
    R = np.array([
        [kappa, 1.0,   1.0,   kappa, 0.0,   0.0],
        [1.0,   kappa, 0.0,   0.0,   kappa, 1.0],
        [0.0,   0.0,   kappa, 1.0,   1.0,   kappa],
    ]) / (1.0 + kappa)
    return R.T.copy(), R


def community_pair(kappa=0.1):
    """Two 6-vertex weighted graphs that differ only by a vertex relabeling.

    The first has communities {1,6}, {2,3}, {4,5}; relabeling by the cycle
    (2 6 4) yields the second, whose communities are {1,2}, {3,4}, {5,6}.
    Aggregating the two hides the first structure, which is what makes the
    pair a good clustering test case.
    """
    L, R = community_factors(kappa)
    M_tilde = L @ R
    sigma = permutation_from_cycles(6, [(2, 6, 4)])
    M_bar = M_tilde[np.ix_(sigma, sigma)]
    return M_tilde, M_bar


def two_pattern_matrix(kappa=0.1, copies=5):
    """Stack vectorized copies of the community pair into a 36 x 2*copies matrix.

    Returns (DataMatrix, labels) where labels mark which pattern each column
    came from. The matrix has rank 2 and an exact non-negative factorization
    with inner dimension 2.
    """
    M_tilde, M_bar = community_pair(kappa)
    gs = GraphSequence(np.array([M_tilde] * copies + [M_bar] * copies))
    labels = np.array([1] * copies + [2] * copies, dtype=np.int64)
    return vectorize(gs), labels


def two_pattern_exact_factors(kappa=0.1, copies=5):
    """Exact (W, H) with column-normalized W for the two-pattern matrix."""
    M_tilde, M_bar = community_pair(kappa)
    w1 = M_tilde.ravel()
    w2 = M_bar.ravel()
    W = np.stack([w1 / w1.sum(), w2 / w2.sum()], axis=1)
    H = np.zeros((2, 2 * copies))
    H[0, :copies] = w1.sum()
    H[1, copies:] = w2.sum()
    return W, H


# swimmer geometry: a 6-pixel torso plus four limbs of 4 pixels, each limb in
# one of four positions, on a height x width canvas (default 20 x 11). All 16
# limb-position supports and the torso are pairwise disjoint, which pins the
# matrix rank at 13 while the natural parts decomposition has 16 components.
_TORSO = [(8, 5), (9, 5), (10, 5), (11, 5), (12, 5), (13, 5)]
_LEFT_ARM = [
    [(7, 4), (6, 4), (5, 4), (4, 4)],
    [(7, 3), (6, 2), (5, 1), (4, 0)],
    [(8, 4), (8, 3), (8, 2), (8, 1)],
    [(9, 4), (10, 3), (11, 2), (12, 1)],
]
_LEFT_LEG = [
    [(14, 4), (15, 4), (16, 4), (17, 4)],
    [(14, 3), (15, 2), (16, 1), (17, 0)],
    [(13, 4), (13, 3), (13, 2), (13, 1)],
    [(12, 4), (11, 3), (10, 2), (9, 1)],
]


def _mirror(pixels, width=11):
    return [(r, width - 1 - c) for r, c in pixels]


def swimmer_parts(width=11, height=20):
    """Pixel coordinates of the torso and the 4 x 4 limb positions."""
    if width < 11 or height < 18:
        raise ValueError("canvas too small for the swimmer geometry")
    limbs = [
        _LEFT_ARM,
        [_mirror(p) for p in _LEFT_ARM],
        _LEFT_LEG,
        [_mirror(p) for p in _LEFT_LEG],
    ]
    return {"torso": list(_TORSO), "limbs": limbs}


def generate_swimmer(width=11, height=20) -> DataMatrix:
    """All 256 binary swimmer images as the columns of a (width*height) x 256 matrix.

    Each image shows the fixed torso plus one position for each of the four
    limbs; columns enumerate the 4^4 position combinations in lexicographic
    order.
    """
    parts = swimmer_parts(width, height)

    def flat(pixels):
        return np.array([r * width + c for r, c in pixels], dtype=np.int64)

    torso = flat(parts["torso"])
    limbs = [[flat(p) for p in limb] for limb in parts["limbs"]]
    n_rows = width * height
    X = np.zeros((n_rows, 256))
    col = 0
    for pa in range(4):
        for pb in range(4):
            for pc in range(4):
                for pd in range(4):
                    X[torso, col] = 1.0
                    for limb, pos in zip(limbs, (pa, pb, pc, pd)):
                        X[limb[pos], col] = 1.0
                    col += 1
    return DataMatrix(X)


# ---------------------------------------------------------------------------
# Monte Carlo driver

@dataclass
class MonteCarloConfig:
    """Grid, replicate budget and method settings for the benchmark driver."""

    rho_grid: tuple = (0.25, 0.5, 1.0)
    contraction_levels: tuple = ("none", "blocks")
    replicates: int = 50
    methods: tuple = ("aicc_nmf", "pamk_dist", "gmm_pca")
    seed: int = 0
    m: int = 5
    schedule: tuple = tuple([1, 2] * 5)
    r_max: int = 5
    restarts: int = 5
    solver: str = "ls"
    nmf_max_iter: int = 300
    nmf_tol: float = 1e-7
    pamk_ks: tuple = (2, 3, 4, 5)
    gmm_ks: tuple = (1, 2, 3, 4, 5)

    def to_json(self, path) -> None:
        from .util import write_json
        write_json(path, {k: (list(v) if isinstance(v, tuple) else v)
                          for k, v in self.__dict__.items()})

    @classmethod
    def from_json(cls, path):
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        kwargs = {}
        for f_ in cls.__dataclass_fields__:
            if f_ in raw:
                val = raw[f_]
                kwargs[f_] = tuple(val) if isinstance(val, list) else val
        return cls(**kwargs)


@dataclass
class CellStats:
    rho: float
    contraction: str
    method: str
    mean_ari: float
    stderr: float
    reps: int
    failures: int = 0


@dataclass
class ExperimentReport:
    rows: list

    def cell(self, rho, contraction, method) -> CellStats:
        for row in self.rows:
            if (row.rho, row.contraction, row.method) == (rho, contraction, method):
                return row
        raise KeyError((rho, contraction, method))


def _method_labels(method, gs, X, cfg: MonteCarloConfig, seed):
    if method == "aicc_nmf":
        res = get_gclust_model_dim(
            X, r_max=min(cfg.r_max, X.T), restarts=cfg.restarts, seed=seed,
            solver=cfg.solver, nmf_tol=cfg.nmf_tol, nmf_max_iter=cfg.nmf_max_iter)
        return res.best.labels
    if method == "pamk_dist":
        ks = [k for k in cfg.pamk_ks if 2 <= k <= gs.T - 1]
        _, labels = pamk(pairwise_frobenius(gs), ks)
        return labels
    if method == "gmm_pca":
        _, labels = gmm_pca_cluster(X, cfg.gmm_ks, seed=seed)
        return labels
    raise ValueError(f"unknown method {method!r}")


def run_monte_carlo(config: MonteCarloConfig) -> ExperimentReport:
    """Replicate the simulation grid and score every method by mean ARI.

    Each (rho, contraction, replicate) triple gets its own derived seed, so
    cells can be recomputed independently and the report is reproducible
    bit-for-bit. A method failure on a replicate (e.g. a degenerate draw)
    scores ARI 0 for that replicate and is counted in ``failures``.
    """
    B1, B2 = default_block_patterns()
    rows = []
    for ci, contraction in enumerate(config.contraction_levels):
        if contraction not in ("none", "blocks"):
            raise ValueError(f"unknown contraction level {contraction!r}")
    cell_index = 0
    for rho in config.rho_grid:
        for contraction in config.contraction_levels:
            spec = BlockModelSpec([B1, B2], m=config.m,
                                  schedule=np.asarray(config.schedule), rho=rho)
            truth = spec.schedule
            aris = {mth: [] for mth in config.methods}
            failures = {mth: 0 for mth in config.methods}
            for rep in range(config.replicates):
                rep_seed = derive_seed(config.seed, cell_index, rep)
                gs = simulate_block_poisson(spec, seed=rep_seed)
                if contraction == "blocks":
                    gs = contract_vertices(gs, block_contraction(spec))
                X = vectorize(gs)
                for mi, method in enumerate(config.methods):
                    try:
                        labels = _method_labels(method, gs, X, config,
                                                derive_seed(rep_seed, mi))
                        aris[method].append(adjusted_rand_index(truth, labels))
                    except (ValueError, RuntimeError):
                        aris[method].append(0.0)
                        failures[method] += 1
            for method in config.methods:
                vals = np.asarray(aris[method])
                stderr = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else 0.0
                rows.append(CellStats(float(rho), contraction, method,
                                      float(vals.mean()), stderr, int(vals.size),
                                      failures[method]))
            cell_index += 1
    return ExperimentReport(rows)


def save_report(report: ExperimentReport, path) -> None:
    """Long-format CSV: rho, contraction, method, mean_ari, stderr, reps."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rho", "contraction", "method", "mean_ari", "stderr", "reps"])
        for row in report.rows:
            writer.writerow([format_float(row.rho), row.contraction, row.method,
                             format_float(row.mean_ari), format_float(row.stderr),
                             row.reps])
