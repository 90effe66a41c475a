"""Dense tensor contraction and truncated SVD.

Tensors are plain ``numpy.ndarray`` objects of dtype ``complex128`` stored
row-major over their shape. Every permutation of indices is explicit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import NumericalIntegrityError, ShapeError

DEFAULT_CUTOFF = 1e-12
# entries below this fraction of the largest one do not link blocks
BLOCK_ZERO_TOL = 1e-14
BLOCK_MIN_DIM = 2


def as_tensor(data) -> np.ndarray:
    """Return ``data`` as a finite complex128 array."""
    arr = np.asarray(data, dtype=np.complex128)
    if not np.all(np.isfinite(arr)):
        raise NumericalIntegrityError("tensor contains NaN or Inf")
    return arr


def contract(a: np.ndarray, b: np.ndarray, pairs: Sequence[tuple[int, int]]) -> np.ndarray:
    """Sum over the paired indices of ``a`` and ``b``.

    ``pairs`` lists ``(index_of_a, index_of_b)``. The result carries the unpaired
    indices of ``a`` followed by the unpaired indices of ``b``, each in their
    original order.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    ia = [p[0] for p in pairs]
    ib = [p[1] for p in pairs]
    for i, j in pairs:
        if not (0 <= i < a.ndim and 0 <= j < b.ndim):
            raise ShapeError(f"index pair ({i}, {j}) out of range for ranks {a.ndim}, {b.ndim}")
        if a.shape[i] != b.shape[j]:
            raise ShapeError(
                f"cannot pair index {i} (dim {a.shape[i]}) with index {j} (dim {b.shape[j]})"
            )
    if len(set(ia)) != len(ia) or len(set(ib)) != len(ib):
        raise ShapeError("an index appears in more than one pair")
    out = np.tensordot(a, b, axes=(ia, ib))
    return out.astype(np.complex128, copy=False)


@dataclass(frozen=True)
class TruncatedSVD:
    """Result of :func:`svd_truncate`; ``u @ diag(s) @ v`` approximates the input."""

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray
    discarded_weight: float

    @property
    def rank(self) -> int:
        return len(self.s)


def _svd(m: np.ndarray):
    try:
        return np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError:
        # gesdd occasionally fails to converge; gesvd is slower but robust
        return scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd")


def _blocks(m: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Row/column index sets of the independent blocks of ``m``.

    Number-conserving states give matrices that are block diagonal up to a
    permutation; each block is a connected component of the bipartite graph
    of nonzero entries, found by min-label propagation. Rows or columns
    without nonzero entries are skipped.
    """
    r, c = m.shape
    mag = np.abs(m)
    nz = mag > BLOCK_ZERO_TOL * mag.max()
    big = r + c
    row_lab = np.where(nz.any(axis=1), np.arange(r), big)
    while True:
        col_lab = np.where(nz, row_lab[:, None], big).min(axis=0)
        new = np.minimum(row_lab, np.where(nz, col_lab[None, :], big).min(axis=1))
        if np.array_equal(new, row_lab):
            break
        row_lab = new
    labels = np.unique(row_lab[row_lab < big])
    if labels.size <= 1:
        return [(np.arange(r), np.arange(c))]
    out = []
    for lab in labels:
        ri = np.flatnonzero(row_lab == lab)
        ci = np.flatnonzero(col_lab == lab)
        if ci.size:
            out.append((ri, ci))
    return out


def _block_svd(m: np.ndarray):
    """Thin SVD assembled from the blocks of ``m``; values sorted descending."""
    blocks = _blocks(m) if min(m.shape) >= BLOCK_MIN_DIM else None
    if not blocks or len(blocks) == 1:
        return _svd(m)
    parts = [(ri, ci, *_svd(m[np.ix_(ri, ci)])) for ri, ci in blocks]
    s = np.concatenate([p[3] for p in parts])
    order = np.argsort(-s, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    u = np.zeros((m.shape[0], s.size), dtype=np.complex128)
    vh = np.zeros((s.size, m.shape[1]), dtype=np.complex128)
    start = 0
    for ri, ci, bu, bs, bvh in parts:
        cols = rank[start : start + bs.size]
        u[np.ix_(ri, cols)] = bu
        vh[np.ix_(cols, ci)] = bvh
        start += bs.size
    return u, s[order], vh


def block_qr(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR that keeps the block structure of ``m``.

    ``q`` has orthonormal columns, each supported on the rows of one block,
    so later factorizations see the same structure. The inner dimension is
    the summed block rank bound, at most ``min(m.shape)``.
    """
    blocks = _blocks(m) if min(m.shape) >= BLOCK_MIN_DIM else None
    if not blocks or len(blocks) == 1:
        return np.linalg.qr(m)
    dims = [min(ri.size, ci.size) for ri, ci in blocks]
    q = np.zeros((m.shape[0], sum(dims)), dtype=np.complex128)
    r = np.zeros((sum(dims), m.shape[1]), dtype=np.complex128)
    start = 0
    for (ri, ci), d in zip(blocks, dims):
        bq, br = np.linalg.qr(m[np.ix_(ri, ci)])
        q[ri, start : start + d] = bq
        r[start : start + d, ci] = br
        start += d
    return q, r


def svd_truncate(m: np.ndarray, cap: int, cutoff: float = DEFAULT_CUTOFF) -> TruncatedSVD:
    """Singular value decomposition keeping at most ``cap`` values.

    Values below ``cutoff * max(s)`` are dropped as well. ``discarded_weight`` is
    the dropped share of the squared Frobenius norm.
    """
    if m.ndim != 2:
        raise ShapeError(f"svd_truncate expects a matrix, got rank {m.ndim}")
    if cap < 1:
        raise ValueError("cap must be a positive integer")
    u, s, vh = _block_svd(m)
    order = np.argsort(-s, kind="stable")
    u, s, vh = u[:, order], s[order], vh[order, :]
    total = float(np.dot(s, s))
    if total == 0.0 or not s.size:
        return TruncatedSVD(
            u=np.zeros((m.shape[0], 0), dtype=np.complex128),
            s=np.zeros(0),
            v=np.zeros((0, m.shape[1]), dtype=np.complex128),
            discarded_weight=0.0,
        )
    if not np.isfinite(total):
        raise NumericalIntegrityError("non-finite singular values")
    keep = int(np.count_nonzero(s > cutoff * s[0]))
    keep = max(1, min(keep, cap))
    discarded = float(np.dot(s[keep:], s[keep:])) / total
    return TruncatedSVD(
        u=u[:, :keep].astype(np.complex128, copy=False),
        s=s[:keep],
        v=vh[:keep, :].astype(np.complex128, copy=False),
        discarded_weight=discarded,
    )
