"""Exact integer sparse matrix products (row-by-row Gustavson merge)."""

from __future__ import annotations

import numpy as np

from hagnn.hetgraph import GraphError, SparseAdjacency

_INT64_SAFE = float(2**62)
_FLOAT_EXACT = float(2**53)


class DensificationError(GraphError):
    pass


class CountOverflowError(GraphError):
    pass


def spgemm(a: SparseAdjacency, b: SparseAdjacency) -> SparseAdjacency:
    """C = A @ B with int64 path counts; rows are merged one at a time and emitted sorted."""
    if a.cols != b.rows:
        raise GraphError(f"spgemm: inner dimensions differ, {a.shape} @ {b.shape}")
    if a.nnz == 0 or b.nnz == 0:
        return SparseAdjacency.empty(a.rows, b.cols)
    a_ptr, b_ptr = a.indptr, b.indptr
    b_len = np.diff(b_ptr)
    out_row, out_col, out_w = [], [], []
    for i in np.flatnonzero(np.diff(a_ptr)):
        lo, hi = a_ptr[i], a_ptr[i + 1]
        ks = a.col[lo:hi]
        lens = b_len[ks]
        total = int(lens.sum())
        if total == 0:
            continue
        # positions of every B entry reached from row i
        starts = np.repeat(b_ptr[ks], lens)
        within = np.arange(total) - np.repeat(np.cumsum(lens) - lens, lens)
        pos = starts + within
        cols = b.col[pos]
        wa = np.repeat(a.weight[lo:hi], lens)
        wb = b.weight[pos]
        bound = float(wa.max()) * float(wb.max())
        if bound >= _INT64_SAFE:
            raise CountOverflowError(f"path-instance count overflows int64 in row {i}")
        prods = wa * wb
        if bound * total < _FLOAT_EXACT and 4 * total >= b.cols:
            # dense accumulator; float64 sums are exact below 2**53
            acc = np.bincount(cols, weights=prods, minlength=b.cols)
            nz = np.flatnonzero(acc)
            out_row.append(np.full(len(nz), i, dtype=np.int64))
            out_col.append(nz)
            out_w.append(acc[nz].astype(np.int64))
            continue
        order = np.argsort(cols, kind="stable")
        cols, prods = cols[order], prods[order]
        heads = np.flatnonzero(np.concatenate([[True], cols[1:] != cols[:-1]]))
        sums = np.add.reduceat(prods, heads)
        if bound * total >= _INT64_SAFE:
            fsums = np.add.reduceat(prods.astype(float), heads)
            if np.any(fsums >= _INT64_SAFE):
                raise CountOverflowError(f"path-instance count overflows int64 in row {i}")
        out_row.append(np.full(len(heads), i, dtype=np.int64))
        out_col.append(cols[heads])
        out_w.append(sums)
    if not out_row:
        return SparseAdjacency.empty(a.rows, b.cols)
    return SparseAdjacency(
        a.rows, b.cols, np.concatenate(out_row), np.concatenate(out_col), np.concatenate(out_w), canonical=True
    )


def estimate_nnz(a_shape, a_nnz, b_shape, b_nnz) -> float:
    """Expected nnz of A @ B under independently placed entries."""
    n, k = a_shape
    m = b_shape[1]
    if n == 0 or k == 0 or m == 0:
        return 0.0
    da = a_nnz / (n * k)
    db = b_nnz / (k * m)
    p = -np.expm1(k * np.log1p(-min(da * db, 1 - 1e-15)))
    return float(n * m * p)


def chain_product(
    mats: list[SparseAdjacency], max_nnz: float | None = None, names: list[str] | None = None
) -> SparseAdjacency:
    """Multiply a chain of sparse matrices in a cost-minimising order (matrix-chain DP on estimated nnz).

    Raises DensificationError when an intermediate product is expected to exceed `max_nnz` entries.
    """
    n = len(mats)
    if n == 0:
        raise GraphError("empty matrix chain")
    names = names or [f"hop {i}" for i in range(n)]
    shape = {(i, i): mats[i].shape for i in range(n)}
    nnz = {(i, i): float(mats[i].nnz) for i in range(n)}
    cost = {(i, i): 0.0 for i in range(n)}
    split: dict[tuple[int, int], int] = {}
    for span in range(2, n + 1):
        for i in range(n - span + 1):
            j = i + span - 1
            best = None
            for k in range(i, j):
                out = estimate_nnz(shape[i, k], nnz[i, k], shape[k + 1, j], nnz[k + 1, j])
                # work ~ multiply-adds, approximated by the output plus the larger operand
                c = cost[i, k] + cost[k + 1, j] + out + max(nnz[i, k], nnz[k + 1, j])
                if best is None or c < best[0]:
                    best = (c, k, out)
            cost[i, j], split[i, j], nnz[i, j] = best[0], best[1], best[2]
            shape[i, j] = (shape[i, i][0], shape[j, j][1])

    def build(i, j):
        if i == j:
            return mats[i]
        k = split[i, j]
        left, right = build(i, k), build(k + 1, j)
        if max_nnz is not None:
            est = estimate_nnz(left.shape, left.nnz, right.shape, right.nnz)
            if est > max_nnz:
                raise DensificationError(
                    f"densification limit exceeded at {'-'.join(names[i:j + 1])}: "
                    f"~{est:.3g} entries > budget {max_nnz:.3g}"
                )
        return spgemm(left, right)

    return build(0, n - 1)
