"""Turn timestamped interaction records into a vectorized graph-sequence matrix.

The pipeline is: parse event records, count them into time bins to get a
sequence of weighted adjacency matrices, optionally merge vertices into
super-vertices, and stack the vectorized slices as columns of a single
non-negative matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .util import format_float, load_matrix_csv, read_json, save_matrix_csv, write_json

INDEXING_CONVENTION = "row-major ordered pairs, l = (i-1)*n + j, diagonal included"


class ParseError(ValueError):
    """Malformed event line under the strict parsing policy."""

    def __init__(self, message, line_number=None):
        super().__init__(message)
        self.line_number = line_number


@dataclass
class EventLog:
    """Timestamped interaction records over a horizon [0, tau].

    times, sources, targets are parallel arrays; actions is an optional list
    of category tags. ``skipped`` counts lines dropped by the skip policy.
    """

    times: np.ndarray
    sources: np.ndarray
    targets: np.ndarray
    actions: list | None = None
    horizon: float = 0.0
    skipped: int = 0

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.sources = np.asarray(self.sources, dtype=np.int64)
        self.targets = np.asarray(self.targets, dtype=np.int64)
        if not (self.times.shape == self.sources.shape == self.targets.shape):
            raise ValueError("times, sources and targets must have equal length")
        if self.times.size and self.horizon <= 0:
            self.horizon = float(self.times.max())
        if self.times.size:
            if self.times.min() < 0 or self.times.max() > self.horizon:
                raise ValueError("event times must lie in [0, horizon]")
            if self.sources.min() < 0 or self.targets.min() < 0:
                raise ValueError("vertex ids must be non-negative")

    def __len__(self):
        return int(self.times.size)

    @property
    def records(self) -> list:
        acts = self.actions if self.actions is not None else [None] * len(self)
        return [
            (float(s), int(i), int(j), a)
            for s, i, j, a in zip(self.times, self.sources, self.targets, acts)
        ]

    @classmethod
    def from_records(cls, records, horizon=0.0, skipped=0):
        times = [r[0] for r in records]
        sources = [r[1] for r in records]
        targets = [r[2] for r in records]
        actions = [r[3] if len(r) > 3 else None for r in records]
        if all(a is None for a in actions):
            actions = None
        return cls(np.asarray(times, dtype=float), np.asarray(sources), np.asarray(targets),
                   actions=actions, horizon=horizon, skipped=skipped)


@dataclass
class TemporalPartition:
    """Strictly increasing bin boundaries tau_0 < ... < tau_T with tau_0 = 0."""

    boundaries: np.ndarray

    def __post_init__(self):
        self.boundaries = np.asarray(self.boundaries, dtype=float)
        if self.boundaries.ndim != 1 or self.boundaries.size < 2:
            raise ValueError("need at least two boundaries (one bin)")
        if self.boundaries[0] != 0.0:
            raise ValueError("first boundary must be 0")
        if not np.all(np.diff(self.boundaries) > 0):
            raise ValueError("boundaries must be strictly increasing")

    @property
    def n_bins(self) -> int:
        return int(self.boundaries.size - 1)

    @classmethod
    def uniform(cls, n_bins, horizon):
        if n_bins < 1 or horizon <= 0:
            raise ValueError("need n_bins >= 1 and horizon > 0")
        return cls(np.linspace(0.0, float(horizon), n_bins + 1))


@dataclass
class ContractionMap:
    """Total map from n original vertices to m non-empty super-vertex groups."""

    assignment: np.ndarray

    def __post_init__(self):
        self.assignment = np.asarray(self.assignment, dtype=np.int64)
        if self.assignment.ndim != 1 or self.assignment.size == 0:
            raise ValueError("assignment must be a non-empty vector")
        if self.assignment.min() < 0:
            raise ValueError("group ids must be non-negative")
        m = int(self.assignment.max()) + 1
        counts = np.bincount(self.assignment, minlength=m)
        if np.any(counts == 0):
            raise ValueError("every group id in 0..max must be non-empty")

    @property
    def n(self) -> int:
        return int(self.assignment.size)

    @property
    def m(self) -> int:
        return int(self.assignment.max()) + 1

    @property
    def partition_matrix(self) -> np.ndarray:
        """The m-by-n 0/1 matrix J with J[g, v] = 1 iff vertex v maps to group g."""
        J = np.zeros((self.m, self.n))
        J[self.assignment, np.arange(self.n)] = 1.0
        return J

    @classmethod
    def identity(cls, n):
        return cls(np.arange(n))


@dataclass
class GraphSequence:
    """T weighted adjacency slices on a shared vertex set, plus per-slice totals."""

    slices: np.ndarray
    totals: np.ndarray = field(default=None)

    def __post_init__(self):
        self.slices = np.asarray(self.slices, dtype=float)
        if self.slices.ndim != 3 or self.slices.shape[1] != self.slices.shape[2]:
            raise ValueError("slices must be a T x n x n array")
        if self.slices.size and self.slices.min() < 0:
            raise ValueError("edge weights must be non-negative")
        recomputed = self.slices.sum(axis=(1, 2))
        if self.totals is None:
            self.totals = recomputed
        elif not np.allclose(self.totals, recomputed):
            raise ValueError("stored totals disagree with slice entry sums")
        self.totals = np.asarray(self.totals, dtype=float)

    @property
    def T(self) -> int:
        return int(self.slices.shape[0])

    @property
    def n(self) -> int:
        return int(self.slices.shape[1])


@dataclass
class DataMatrix:
    """Vectorized graph sequence: X has one column per time bin.

    For a graph sequence X is n^2 x T with column t the row-major
    vectorization of slice t. Image-style data (e.g. the swimmer benchmark)
    reuses the container with ``n`` unset. N holds the column totals.
    """

    X: np.ndarray
    N: np.ndarray = field(default=None)
    n: int | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim != 2:
            raise ValueError("X must be two-dimensional")
        if self.X.size and self.X.min() < 0:
            raise ValueError("X must be non-negative")
        colsums = self.X.sum(axis=0)
        if self.N is None:
            self.N = colsums
        else:
            self.N = np.asarray(self.N, dtype=float)
            if self.N.shape != (self.X.shape[1],):
                raise ValueError("N must have one entry per column of X")
        if self.n is not None and self.n * self.n != self.X.shape[0]:
            raise ValueError("row count must equal n^2")

    @property
    def T(self) -> int:
        return int(self.X.shape[1])

    @property
    def n_rows(self) -> int:
        return int(self.X.shape[0])


def parse_events(stream, delimiter="\t", has_header=False, strict=True, horizon=None):
    """Parse delimiter-separated event lines into an EventLog.

    Each line carries ``time, source, target[, action]``. Under the strict
    policy the first malformed line raises ParseError with its line number;
    under the skip policy malformed lines are dropped and counted.

    Parameters
    ----------
    stream : iterable of str or str
        Lines of text (a file handle works; a single string is split on
        newlines).
    delimiter : str
        Column separator, tab by default.
    has_header : bool
        Skip the first non-empty line.
    strict : bool
        Raise on the first malformed line instead of skipping it.
    horizon : float, optional
        Right end of the observation window; defaults to the largest time.
    """
    if isinstance(stream, str):
        stream = stream.splitlines()
    times, sources, targets, actions = [], [], [], []
    skipped = 0
    seen_header = not has_header
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line.strip():
            continue
        if not seen_header:
            seen_header = True
            continue
        parts = line.split(delimiter)
        try:
            if len(parts) < 3 or len(parts) > 4:
                raise ValueError(f"expected 3 or 4 columns, got {len(parts)}")
            t = float(parts[0])
            if not np.isfinite(t) or t < 0:
                raise ValueError(f"invalid time {parts[0]!r}")
            i = int(parts[1])
            j = int(parts[2])
            if i < 0 or j < 0:
                raise ValueError("vertex ids must be non-negative")
        except ValueError as exc:
            if strict:
                raise ParseError(f"line {lineno}: {exc}", line_number=lineno) from None
            skipped += 1
            continue
        times.append(t)
        sources.append(i)
        targets.append(j)
        actions.append(parts[3] if len(parts) == 4 else None)
    if all(a is None for a in actions):
        actions = None
    log = EventLog(np.asarray(times, dtype=float), np.asarray(sources, dtype=np.int64),
                   np.asarray(targets, dtype=np.int64), actions=actions,
                   horizon=0.0 if horizon is None else float(horizon), skipped=skipped)
    return log


def temporal_bin(log: EventLog, part: TemporalPartition, n=None, symmetrize=False) -> GraphSequence:
    """Count events into half-open time bins [tau_{t-1}, tau_t).

    An event at exactly the final boundary is rejected (the last bin is
    half-open like the others). Ordered pairs are kept distinct unless
    ``symmetrize`` also credits the reversed pair.
    """
    lo, hi = part.boundaries[0], part.boundaries[-1]
    if len(log):
        if log.times.min() < lo:
            raise ValueError("event time before the first boundary")
        if log.times.max() >= hi:
            raise ValueError("event time at or beyond the final boundary "
                             "(bins are half-open on the right)")
    max_id = int(max(log.sources.max(), log.targets.max())) + 1 if len(log) else 1
    if n is None:
        n = max_id
    elif max_id > n:
        raise ValueError(f"vertex id {max_id - 1} out of range for n={n}")
    T = part.n_bins
    bins = np.searchsorted(part.boundaries, log.times, side="right") - 1
    slices = np.zeros((T, n, n))
    np.add.at(slices, (bins, log.sources, log.targets), 1.0)
    if symmetrize:
        off = slices - np.einsum("tii->ti", slices)[:, :, None] * np.eye(n)
        slices = slices + np.transpose(off, (0, 2, 1))
    return GraphSequence(slices)


def contract_vertices(g: GraphSequence, cmap: ContractionMap) -> GraphSequence:
    """Merge vertex groups: every slice becomes J G J^T, summing edge weights."""
    if cmap.n != g.n:
        raise ValueError(f"contraction map covers {cmap.n} vertices, graphs have {g.n}")
    J = cmap.partition_matrix
    contracted = np.matmul(np.matmul(J, g.slices), J.T)
    return GraphSequence(contracted)


def vectorize(g: GraphSequence) -> DataMatrix:
    """Stack row-major vectorized slices as the columns of an n^2 x T matrix."""
    T, n, _ = g.slices.shape
    X = g.slices.reshape(T, n * n).T.copy()
    return DataMatrix(X, n=n)


def devectorize(dm: DataMatrix) -> GraphSequence:
    """Inverse of :func:`vectorize`; requires a square vertex count."""
    if dm.n is None:
        raise ValueError("data matrix carries no vertex count")
    n = dm.n
    slices = dm.X.T.reshape(dm.T, n, n).copy()
    return GraphSequence(slices)


def read_event_file(path, delimiter="\t", has_header=False, strict=True, horizon=None):
    with open(path, encoding="utf-8") as fh:
        return parse_events(fh, delimiter=delimiter, has_header=has_header,
                            strict=strict, horizon=horizon)


def read_contraction_map(path, delimiter=None) -> ContractionMap:
    """Two-column file: vertex_id, group_id (any whitespace/comma separated)."""
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.replace(",", " ").split() if delimiter is None else line.split(delimiter)
            if len(parts) != 2:
                raise ParseError(f"line {lineno}: expected vertex_id group_id", line_number=lineno)
            pairs.append((int(parts[0]), int(parts[1])))
    if not pairs:
        raise ValueError("empty contraction map file")
    n = max(v for v, _ in pairs) + 1
    assignment = np.full(n, -1, dtype=np.int64)
    for v, gid in pairs:
        assignment[v] = gid
    if np.any(assignment < 0):
        missing = int(np.flatnonzero(assignment < 0)[0])
        raise ValueError(f"vertex {missing} has no group assignment")
    return ContractionMap(assignment)


def save_data_matrix(dm: DataMatrix, csv_path, meta_path=None) -> None:
    """Dense CSV (rows = vertex pairs, columns = time bins) plus JSON sidecar."""
    csv_path = str(csv_path)
    if meta_path is None:
        meta_path = csv_path[:-4] + ".meta.json" if csv_path.endswith(".csv") else csv_path + ".meta.json"
    save_matrix_csv(csv_path, dm.X)
    write_json(meta_path, {
        "n": dm.n,
        "n_rows": dm.n_rows,
        "T": dm.T,
        "N": [float(format_float(x)) for x in dm.N],
        "indexing": INDEXING_CONVENTION,
    })


def load_data_matrix(csv_path, meta_path=None) -> DataMatrix:
    csv_path = str(csv_path)
    if meta_path is None:
        meta_path = csv_path[:-4] + ".meta.json" if csv_path.endswith(".csv") else csv_path + ".meta.json"
    X = load_matrix_csv(csv_path)
    meta = read_json(meta_path)
    N = np.asarray(meta["N"], dtype=float) if "N" in meta else None
    return DataMatrix(X, N=N, n=meta.get("n"))
