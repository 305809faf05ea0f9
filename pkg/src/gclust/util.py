"""Shared helpers: seeded RNG derivation and deterministic file I/O."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np


def derive_seed(*key) -> int:
    """Deterministic 64-bit seed from a tuple of integers.

    Used to give every (base seed, restart, replicate, ...) combination its
    own independent stream, so loops can run in any order.
    """
    ss = np.random.SeedSequence([int(k) for k in key])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def derive_rng(*key) -> np.random.Generator:
    return np.random.default_rng(derive_seed(*key))


def format_float(x) -> str:
    """Shortest round-trip decimal form; keeps CSV output byte-stable."""
    return repr(float(x))


def write_json(path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def atomic_write_json(path, obj) -> None:
    """Write JSON via a temp file + rename so readers never see partial data."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_matrix_csv(path, M) -> None:
    """Dense comma-separated dump, one matrix row per line."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for row in M:
            fh.write(",".join(format_float(x) for x in row))
            fh.write("\n")


def load_matrix_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
