"""Evaluation metrics: F1, ROC-AUC, MRR, and k-means clustering quality (NMI, ARI)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata


class MetricError(ValueError):
    pass


def f1_scores(pred, truth, num_classes: int | None = None) -> tuple[float, float]:
    """(macro, micro) F1.

    1-D integer inputs are single-label; 2-D inputs are multi-hot (scores above 0.5 count as
    positive). Single-label macro-F1 averages over the classes present in `truth` or `pred`,
    or over all `num_classes` when given.
    """
    pred, truth = np.asarray(pred), np.asarray(truth)
    if pred.size == 0 or truth.size == 0:
        raise MetricError("f1 of empty input")
    if pred.shape != truth.shape:
        raise MetricError(f"pred shape {pred.shape} != truth shape {truth.shape}")
    if pred.ndim == 1:
        labels = np.arange(num_classes) if num_classes else np.union1d(pred, truth)
        tp = np.array([np.sum((pred == c) & (truth == c)) for c in labels], dtype=float)
        fp = np.array([np.sum((pred == c) & (truth != c)) for c in labels], dtype=float)
        fn = np.array([np.sum((pred != c) & (truth == c)) for c in labels], dtype=float)
    else:
        p, t = pred > 0.5, truth > 0.5
        tp = (p & t).sum(axis=0).astype(float)
        fp = (p & ~t).sum(axis=0).astype(float)
        fn = (~p & t).sum(axis=0).astype(float)
    denom = 2 * tp + fp + fn
    per_class = np.divide(2 * tp, denom, out=np.zeros_like(tp), where=denom > 0)
    tot = 2 * tp.sum() + fp.sum() + fn.sum()
    micro = 2 * tp.sum() / tot if tot else 0.0
    return float(per_class.mean()), float(micro)


def roc_auc(scores, labels) -> float:
    """P(random positive outscores random negative), ties counting one half."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(bool)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricError("roc_auc needs at least one positive and one negative")
    ranks = rankdata(scores)  # average ranks resolve ties
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def mrr(scores, labels, groups) -> float:
    """Mean over groups of 1 / rank of the best-ranked positive.

    Negatives tied with that positive are ranked ahead of it.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(bool)
    groups = np.asarray(groups)
    if len(scores) == 0:
        raise MetricError("mrr of empty input")
    total, n = 0.0, 0
    for gid in np.unique(groups):
        m = groups == gid
        s, y = scores[m], labels[m]
        if not y.any():
            raise MetricError(f"group {gid} has no positive")
        best = s[y].max()
        rank = 1 + int(np.sum(s[~y] >= best))
        total += 1.0 / rank
        n += 1
    return total / n


# -- clustering -------------------------------------------------------------------------------


def _kmeans_pp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(x)
    centers = [x[rng.integers(n)]]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        idx = rng.integers(n) if total <= 0 else rng.choice(n, p=d2 / total)
        centers.append(x[idx])
        d2 = np.minimum(d2, ((x - x[idx]) ** 2).sum(axis=1))
    return np.array(centers)


def _sqdist(x, c):
    return (x**2).sum(1)[:, None] - 2 * x @ c.T + (c**2).sum(1)[None, :]


def kmeans(x, k: int, seed: int = 0, n_init: int = 10, max_iter: int = 300, tol: float = 1e-6):
    """Lloyd's algorithm with k-means++ seeding; best-inertia run of `n_init`. Returns (labels, inertia)."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if k < 1 or k > n:
        raise MetricError(f"k={k} must lie in [1, n={n}]")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        c = _kmeans_pp(x, k, rng)
        for _ in range(max_iter):
            assign = np.argmin(_sqdist(x, c), axis=1)
            new = np.array([x[assign == j].mean(axis=0) if np.any(assign == j) else c[j] for j in range(k)])
            shift = np.sqrt(((new - c) ** 2).sum(axis=1)).max()
            c = new
            if shift <= tol:
                break
        assign = np.argmin(_sqdist(x, c), axis=1)
        inertia = float(np.maximum(_sqdist(x, c)[np.arange(n), assign], 0).sum())
        if best is None or inertia < best[1]:
            best = (assign, inertia)
    return best


def contingency(a, b) -> np.ndarray:
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    return table


def nmi(a, b) -> float:
    """Normalized mutual information with arithmetic-mean normalisation."""
    table = contingency(a, b).astype(float)
    n = table.sum()
    pa, pb = table.sum(1) / n, table.sum(0) / n
    pab = table / n
    nz = pab > 0
    mi = float((pab[nz] * np.log(pab[nz] / np.outer(pa, pb)[nz])).sum())
    ha = -float((pa[pa > 0] * np.log(pa[pa > 0])).sum())
    hb = -float((pb[pb > 0] * np.log(pb[pb > 0])).sum())
    if ha == 0 and hb == 0:
        return 1.0
    denom = (ha + hb) / 2
    return max(mi, 0.0) / denom if denom > 0 else 0.0


def ari(a, b) -> float:
    table = contingency(a, b)
    n = table.sum()

    def comb2(x):
        x = np.asarray(x, dtype=float)
        return x * (x - 1) / 2

    sum_ij = comb2(table).sum()
    sum_a = comb2(table.sum(1)).sum()
    sum_b = comb2(table.sum(0)).sum()
    expected = sum_a * sum_b / comb2(n)
    max_index = (sum_a + sum_b) / 2
    if max_index == expected:
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))


def cluster_and_score(embeddings, labels, k: int, seed: int = 0) -> tuple[float, float]:
    emb = np.asarray(embeddings, dtype=float)
    if k > len(emb):
        raise MetricError(f"k={k} exceeds the number of points {len(emb)}")
    assign, _ = kmeans(emb, k, seed=seed)
    return nmi(labels, assign), ari(labels, assign)


@dataclass
class MetricReport:
    task: str
    runs: list[dict[str, float]] = field(default_factory=list)

    def add(self, values: dict[str, float]) -> None:
        self.runs.append(dict(values))

    @property
    def n_runs(self) -> int:
        return len(self.runs)

    def summary(self) -> dict[str, tuple[float, float]]:
        names = sorted({k for r in self.runs for k in r})
        return {
            k: (float(np.mean([r[k] for r in self.runs])), float(np.std([r[k] for r in self.runs])))
            for k in names
        }

    def table(self) -> str:
        rows = [f"{'metric':<12} {'mean':>8} {'std':>8}  (task={self.task}, runs={self.n_runs})"]
        for k, (m, s) in self.summary().items():
            rows.append(f"{k:<12} {m:>8.4f} {s:>8.4f}")
        return "\n".join(rows)
