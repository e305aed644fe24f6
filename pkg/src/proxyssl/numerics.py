"""Dense float64 matrix helpers and deterministic seeded random streams.

Matrices are plain 2-D C-contiguous ``numpy.float64`` arrays throughout the
package; this module provides the checked entry points other modules use.

Random streams are backed by NumPy's Philox4x64-10 counter-based generator,
keyed through ``numpy.random.SeedSequence(seed, spawn_key=path)``. The
(seed, path) pair fully determines the stream, so identical seeds reproduce
identical experiments bit-for-bit and child streams derived from distinct
stream ids never alias each other.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericError, ShapeError


def as_matrix(data, rows=None, cols=None):
    """Coerce ``data`` to a C-contiguous float64 2-D array, checking shape."""
    m = np.ascontiguousarray(data, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got ndim={m.ndim}")
    if rows is not None and m.shape[0] != rows:
        raise ShapeError(f"expected {rows} rows, got {m.shape[0]}")
    if cols is not None and m.shape[1] != cols:
        raise ShapeError(f"expected {cols} cols, got {m.shape[1]}")
    check_finite(m, "matrix")
    return m


def check_finite(arr, what="array"):
    """Raise NumericError if ``arr`` contains NaN or Inf."""
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values in {what}")
    return arr


def matmul(a, b):
    """Matrix product with explicit shape checking.

    Raises ShapeError naming both shapes when ``a.cols != b.rows``.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    out = a @ b
    check_finite(out, "matmul result")
    return out


class Rng:
    """Deterministic random stream: Philox4x64-10 under a (seed, path) key.

    ``child(stream_id)`` derives an independent, reproducible stream by
    appending ``stream_id`` to the spawn path; the parent's draw state is
    never consumed by derivation, so children can be created in any order.
    A stream instance is single-owner: share seeds, not instances.
    """

    def __init__(self, seed, _path=()):
        self.seed = int(seed)
        self.path = tuple(int(p) for p in _path)
        seq = np.random.SeedSequence(self.seed, spawn_key=self.path)
        self._gen = np.random.Generator(np.random.Philox(seq))

    def child(self, stream_id):
        return Rng(self.seed, self.path + (int(stream_id),))

    def uniform(self, lo, hi, n=None):
        """n draws (scalar count or shape tuple) in [lo, hi); requires lo < hi."""
        if not lo < hi:
            raise ValueError(f"uniform needs lo < hi, got lo={lo} hi={hi}")
        if n is None:
            return float(self._gen.uniform(lo, hi))
        return self._gen.uniform(lo, hi, n)

    def integers(self, lo, hi, n=None):
        """n draws from {lo, ..., hi-1}."""
        if not lo < hi:
            raise ValueError(f"integers needs lo < hi, got lo={lo} hi={hi}")
        return self._gen.integers(lo, hi, n)

    def raw64(self, n):
        """n raw 64-bit outputs, for stream-independence checks."""
        return self._gen.integers(0, 2**64, int(n), dtype=np.uint64)

    def normal(self, mu, sigma, n=None):
        return self._gen.normal(mu, sigma, n)

    def permutation(self, n):
        return self._gen.permutation(int(n))

    def choice(self, n, size, replace=True):
        return self._gen.choice(int(n), size=int(size), replace=replace)

    def __repr__(self):
        return f"Rng(seed={self.seed}, path={self.path})"
