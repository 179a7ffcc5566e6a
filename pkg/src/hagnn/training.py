"""Task losses, Adam, negative sampling, checkpoints and the full-batch training loop."""

from __future__ import annotations

import hashlib
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from hagnn import autodiff as ad
from hagnn.autodiff import Tensor
from hagnn.hetgraph import GraphError, HeterogeneousGraph, SparseAdjacency, node_offsets
from hagnn.metrics import f1_scores, mrr, roc_auc
from hagnn.model import (
    GraphStructure,
    ModelConfig,
    forward,
    init_params,
    link_logits,
    node_logits,
    param_shapes,
)
from hagnn.sparse import spgemm

TASKS = ("node_classification_single", "node_classification_multi", "link_prediction")


class NumericError(RuntimeError):
    pass


class CheckpointError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    task: str = "node_classification_single"
    learning_rate: float = 5e-4
    weight_decay: float = 1e-4
    max_epochs: int = 300
    patience: int = 30
    seed: int = 0
    beta: float = 0.3
    intra_layers: int = 2
    inter_layers: int = 2
    num_heads: int = 2
    hidden_dim: int = 64
    combine_mode: str = "concat"
    activation: str = "elu"
    negative_slope: float = 0.05
    dropout: float = 0.0
    negative_ratio: int = 1

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}; expected one of {TASKS}")
        if self.learning_rate < 0 or self.weight_decay < 0:
            raise ValueError("learning_rate and weight_decay must be non-negative")
        if self.max_epochs < 1 or self.patience < 1 or self.negative_ratio < 1:
            raise ValueError("max_epochs, patience and negative_ratio must be >= 1")
        self.model_config()  # validates the model fields

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            hidden_dim=self.hidden_dim,
            num_heads=self.num_heads,
            intra_layers=self.intra_layers,
            inter_layers=self.inter_layers,
            beta=self.beta,
            activation=self.activation,
            negative_slope=self.negative_slope,
            combine=self.combine_mode,
            dropout=self.dropout,
        )

    def replace(self, **changes) -> "TrainConfig":
        return TrainConfig(**{**asdict(self), **changes})

    @classmethod
    def from_mapping(cls, values: Mapping) -> "TrainConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(values) - names
        if unknown:
            raise ValueError(f"unknown training keys: {sorted(unknown)}")
        return cls(**values)


# -- losses -------------------------------------------------------------------------------------


def _mask_index(mask) -> np.ndarray:
    idx = np.flatnonzero(np.asarray(mask, dtype=bool))
    if len(idx) == 0:
        raise ValueError("empty mask")
    return idx


def loss_single_label(logits: Tensor, labels, mask) -> Tensor:
    """Mean cross-entropy over masked nodes; `labels` holds class ids (or one-hot rows)."""
    idx = _mask_index(mask)
    labels = np.asarray(labels)
    if labels.ndim == 2:
        labels = labels.argmax(axis=1)
    onehot = np.zeros((len(idx), logits.shape[1]))
    onehot[np.arange(len(idx)), labels[idx]] = 1.0
    logp = ad.log_softmax(ad.gather_rows(logits, idx), axis=1)
    return ad.scale(ad.sum(ad.mul(logp, Tensor(onehot))), -1.0 / len(idx))


def loss_multi_label(logits: Tensor, labels, mask) -> Tensor:
    """Mean over masked nodes of the per-class binary cross-entropy, summed over classes."""
    idx = _mask_index(mask)
    y = np.asarray(labels, dtype=float)[idx]
    x = ad.gather_rows(logits, idx)
    # -[y log s(x) + (1-y) log(1-s(x))] = softplus(x) - y x
    per = ad.sub(ad.softplus(x), ad.mul(x, Tensor(y)))
    return ad.scale(ad.sum(per), 1.0 / len(idx))


def loss_link(pos_logits: Tensor, neg_logits: Tensor) -> Tensor:
    """Binary cross-entropy on positive and negative pair logits, averaged over all pairs."""
    n = pos_logits.shape[0] + neg_logits.shape[0]
    pos = ad.sum(ad.softplus(ad.scale(pos_logits, -1.0)))
    neg = ad.sum(ad.softplus(neg_logits))
    return ad.scale(ad.add(pos, neg), 1.0 / n)


def score_link(z_u, z_v, w_r) -> float | np.ndarray:
    """sigmoid(z_v^T W_r z_u); rows of 2-D inputs are scored pairwise."""
    z_u, z_v, w_r = np.asarray(z_u, float), np.asarray(z_v, float), np.asarray(w_r, float)
    x = np.einsum("...i,ij,...j->...", z_v, w_r, z_u)
    return 1.0 / (1.0 + np.exp(-x))


# -- optimiser ----------------------------------------------------------------------------------


class Adam:
    """Adam with L2 weight decay folded into the gradient."""

    def __init__(self, params: Sequence[Tensor], lr: float, weight_decay: float = 0.0,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.lr, self.weight_decay, self.eps = lr, weight_decay, eps
        self.b1, self.b2 = betas
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.t = 0

    def step(self, grads: Sequence[np.ndarray]) -> None:
        self.t += 1
        c1 = 1 - self.b1**self.t
        c2 = 1 - self.b2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            if self.weight_decay:
                g = g + self.weight_decay * p.data
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            p.data = p.data - self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


# -- negative sampling and link splits ----------------------------------------------------------


def sample_negatives(
    num_src: int, num_dst: int, positives: tuple[np.ndarray, np.ndarray], ratio: int, seed: int,
    *, exclude: SparseAdjacency | None = None, max_rounds: int = 100,
) -> tuple[np.ndarray, np.ndarray]:
    """`ratio` corrupted tails per positive (u, v): (u, v') with v' uniform and (u, v') not positive."""
    if ratio < 1:
        raise ValueError("ratio must be >= 1")
    src, dst = (np.asarray(x, dtype=np.int64) for x in positives)
    known = np.unique(src * num_dst + dst)
    if exclude is not None:
        known = np.union1d(known, exclude.row * num_dst + exclude.col)
    rng = np.random.default_rng(seed)
    heads = np.repeat(src, ratio)
    tails = np.full(len(heads), -1, dtype=np.int64)
    todo = np.arange(len(heads))
    for _ in range(max_rounds):
        if len(todo) == 0:
            break
        cand = rng.integers(0, num_dst, size=len(todo))
        ok = ~np.isin(heads[todo] * num_dst + cand, known)
        tails[todo[ok]] = cand[ok]
        todo = todo[~ok]
    if len(todo):
        raise GraphError(f"graph too dense to sample negatives: {len(todo)} draws failed after {max_rounds} rounds")
    return heads, tails


def pooled_adjacency(g: HeterogeneousGraph) -> SparseAdjacency:
    """Undirected global adjacency (all relations, both directions), unit weights."""
    off = node_offsets(g)
    n = int(off[-1])
    rows, cols = [], []
    for e, a in zip(g.edge_types, g.adjacency):
        rows += [a.row + off[e.src_type], a.col + off[e.dst_type]]
        cols += [a.col + off[e.dst_type], a.row + off[e.src_type]]
    if not rows:
        return SparseAdjacency.empty(n, n)
    row, col = np.concatenate(rows), np.concatenate(cols)
    key = np.unique(row * n + col)
    return SparseAdjacency(n, n, key // n, key % n, np.ones(len(key), dtype=np.int64), canonical=True)


def two_hop_negatives(
    g: HeterogeneousGraph, relation: int, positives: tuple[np.ndarray, np.ndarray], seed: int,
    exclude: SparseAdjacency | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """One negative per positive (u, v): a dst-type node two hops from u that u does not link to.

    Sources without any such candidate fall back to a uniform corrupted tail.
    """
    et = g.edge_types[relation]
    off = node_offsets(g)
    n_dst = g.node_types[et.dst_type].count
    src, dst = (np.asarray(x, dtype=np.int64) for x in positives)
    linked = np.unique(src * n_dst + dst)
    if exclude is not None:
        linked = np.union1d(linked, exclude.row * n_dst + exclude.col)
    a = pooled_adjacency(g)
    sources = np.unique(src)
    sel = SparseAdjacency.from_entries(len(sources), a.rows, [(i, off[et.src_type] + s, 1) for i, s in enumerate(sources)])
    two = spgemm(spgemm(sel, a), a)
    lo, hi = off[et.dst_type], off[et.dst_type + 1]
    rng = np.random.default_rng(seed)
    cands = {}
    for i, s in enumerate(sources):
        seg = slice(two.indptr[i], two.indptr[i + 1])
        c = two.col[seg]
        c = c[(c >= lo) & (c < hi)] - lo
        c = c[~np.isin(s * n_dst + c, linked)]
        cands[int(s)] = c
    neg_dst = np.empty(len(src), dtype=np.int64)
    fallback = []
    for j, s in enumerate(src.tolist()):
        c = cands[s]
        if len(c):
            neg_dst[j] = c[rng.integers(len(c))]
        else:
            fallback.append(j)
    if fallback:
        fb = np.asarray(fallback)
        _, t = sample_negatives(g.node_types[et.src_type].count, n_dst, (src, dst), 1, seed + 1, exclude=exclude)
        neg_dst[fb] = t[fb]
    return src.copy(), neg_dst


@dataclass
class LinkSplit:
    relation: int
    train: tuple[np.ndarray, np.ndarray]
    val: tuple[np.ndarray, np.ndarray]
    test: tuple[np.ndarray, np.ndarray]
    val_neg: tuple[np.ndarray, np.ndarray]
    test_neg: tuple[np.ndarray, np.ndarray]
    all_positive: SparseAdjacency


def split_links(
    g: HeterogeneousGraph, relation: int, val_ratio: float = 0.1, test_ratio: float = 0.1, seed: int = 0
) -> tuple[HeterogeneousGraph, LinkSplit]:
    """Hold out val/test edges of `relation` (and their mirrors in inverse relations).

    Returns the message-passing graph without held-out edges and the split, whose test
    negatives are two-hop pairs.
    """
    a = g.adjacency[relation]
    et = g.edge_types[relation]
    rng = np.random.default_rng(seed)
    perm = rng.permutation(a.nnz)
    n_test = int(round(test_ratio * a.nnz))
    n_val = int(round(val_ratio * a.nnz))
    test_i, val_i, train_i = perm[:n_test], perm[n_test:n_test + n_val], perm[n_test + n_val:]
    pick = lambda ix: (a.row[np.sort(ix)], a.col[np.sort(ix)])  # noqa: E731
    held = np.concatenate([test_i, val_i])
    held_fwd = set(zip(a.row[held].tolist(), a.col[held].tolist()))
    adjacency = []
    for e, m in zip(g.edge_types, g.adjacency):
        if e.id == relation:
            keep = np.ones(m.nnz, dtype=bool)
            keep[held] = False
        elif e.src_type == et.dst_type and e.dst_type == et.src_type:
            keep = np.array([(c, r) not in held_fwd for r, c in zip(m.row.tolist(), m.col.tolist())], dtype=bool)
        else:
            keep = np.ones(m.nnz, dtype=bool)
        adjacency.append(SparseAdjacency(m.rows, m.cols, m.row[keep], m.col[keep], m.weight[keep], canonical=True))
    mp = HeterogeneousGraph(g.node_types, g.edge_types, adjacency, g.features, g.labels, g.splits)
    val, test = pick(val_i), pick(test_i)
    n_src, n_dst = a.rows, a.cols
    val_neg = sample_negatives(n_src, n_dst, val, 1, seed + 11, exclude=a)
    test_neg = two_hop_negatives(mp, relation, test, seed + 13, exclude=a)
    return mp, LinkSplit(relation, pick(train_i), val, test, val_neg, test_neg, a)


# -- checkpoints --------------------------------------------------------------------------------


def config_hash(payload: Mapping) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def save_checkpoint(path, params: Mapping[str, Tensor], meta: Mapping) -> None:
    """Single .npz file: one array per parameter block plus a JSON header with shapes and hash."""
    header = dict(meta)
    header["shapes"] = {k: list(v) for k, v in param_shapes(params).items()}
    header["config_hash"] = config_hash({k: header[k] for k in sorted(header) if k != "config_hash"})
    buf = io.BytesIO()
    np.savez(buf, __header__=np.frombuffer(json.dumps(header, sort_keys=True).encode(), dtype=np.uint8),
             **{f"param/{k}": v.data for k, v in params.items()})
    atomic_write_bytes(Path(path), buf.getvalue())


def load_checkpoint(path, expected_shapes: Mapping[str, Sequence[int]] | None = None):
    """Returns (params, header). Raises CheckpointError if shapes differ from `expected_shapes`."""
    with np.load(path) as z:
        header = json.loads(bytes(z["__header__"]).decode())
        params = {k[len("param/"):]: ad.parameter(z[k], k[len("param/"):]) for k in z.files if k.startswith("param/")}
    if expected_shapes is not None:
        got = {k: tuple(v.shape) for k, v in params.items()}
        want = {k: tuple(v) for k, v in expected_shapes.items()}
        if got != want:
            diff = sorted(set(got.items()) ^ set(want.items()))
            raise CheckpointError(f"checkpoint shape drift: {diff[:6]}")
    return params, header


def atomic_write_bytes(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(path)


def atomic_write_text(path: Path, text: str) -> None:
    atomic_write_bytes(Path(path), text.encode("utf-8"))


# -- tasks and the training loop ----------------------------------------------------------------


@dataclass
class NodeTask:
    target_type: int
    labels: np.ndarray  # class ids (single-label) or multi-hot rows
    train_mask: np.ndarray
    val_mask: np.ndarray
    test_mask: np.ndarray
    num_classes: int
    multi_label: bool = False


@dataclass
class LinkTask:
    split: LinkSplit

    @property
    def relation(self) -> int:
        return self.split.relation


@dataclass
class TrainResult:
    params: dict[str, Tensor]
    log: list[dict]
    timing: list[dict]
    best_epoch: int
    best_val: float
    config: TrainConfig

    def log_lines(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.log)


def _targets(g: HeterogeneousGraph, task) -> list[int]:
    if isinstance(task, NodeTask):
        return [task.target_type]
    et = g.edge_types[task.relation]
    return sorted({et.src_type, et.dst_type})


def relation_key(g: HeterogeneousGraph, relation: int) -> str:
    return g.edge_types[relation].name


def build_params(structure: GraphStructure, g: HeterogeneousGraph, task, config: TrainConfig) -> dict[str, Tensor]:
    if isinstance(task, NodeTask):
        return init_params(structure, config.model_config(), num_classes=task.num_classes, seed=config.seed)
    return init_params(structure, config.model_config(), link_relations=[relation_key(g, task.relation)], seed=config.seed)


def task_loss(g, structure, params, config: TrainConfig, task, rng, neg_seed: int):
    mc = config.model_config()
    res = forward(structure, params, mc, _targets(g, task), dropout_rng=rng)
    if isinstance(task, NodeTask):
        logits = node_logits(res.embeddings[task.target_type], params)
        if task.multi_label:
            return loss_multi_label(logits, task.labels, task.train_mask)
        return loss_single_label(logits, task.labels, task.train_mask)
    et = g.edge_types[task.relation]
    split = task.split
    a = split.all_positive
    neg = sample_negatives(a.rows, a.cols, split.train, config.negative_ratio, neg_seed, exclude=a)
    w_r = params[f"head.lp.{relation_key(g, task.relation)}"]
    zs, zd = res.embeddings[et.src_type], res.embeddings[et.dst_type]
    return loss_link(link_logits(zs, zd, w_r, *split.train), link_logits(zs, zd, w_r, *neg))


def predict(g, structure, params, config: TrainConfig, task) -> dict:
    """Evaluation-mode outputs: node scores or link logits for val/test pairs."""
    mc = config.model_config()
    res = forward(structure, params, mc, _targets(g, task))
    if isinstance(task, NodeTask):
        logits = node_logits(res.embeddings[task.target_type], params).data
        return {"logits": logits, "embeddings": res.embeddings[task.target_type].data}
    et = g.edge_types[task.relation]
    w_r = params[f"head.lp.{relation_key(g, task.relation)}"]
    zs, zd = res.embeddings[et.src_type], res.embeddings[et.dst_type]
    s = task.split
    out = {name: link_logits(zs, zd, w_r, *pairs).data
           for name, pairs in [("val", s.val), ("val_neg", s.val_neg), ("test", s.test), ("test_neg", s.test_neg)]}
    out["embeddings"] = {t: res.embeddings[t].data for t in res.embeddings}
    return out


def node_predictions(logits: np.ndarray, multi_label: bool) -> np.ndarray:
    if multi_label:
        return (logits > 0).astype(int)  # sigmoid(x) > 0.5
    return logits.argmax(axis=1)


def evaluate(g, structure, params, config: TrainConfig, task, split: str = "val") -> dict[str, float]:
    return score_outputs(predict(g, structure, params, config, task), task, split)


def score_outputs(out: dict, task, split: str) -> dict[str, float]:
    """Metrics of `predict` outputs on one split."""
    if isinstance(task, NodeTask):
        mask = {"train": task.train_mask, "val": task.val_mask, "test": task.test_mask}[split]
        idx = np.flatnonzero(mask)
        pred = node_predictions(out["logits"][idx], task.multi_label)
        truth = task.labels[idx]
        macro, micro = f1_scores(pred, truth, None if task.multi_label else task.num_classes)
        return {"macro_f1": macro, "micro_f1": micro}
    pos, neg = out[split], out[f"{split}_neg"]
    scores = np.concatenate([pos, neg])
    labels = np.concatenate([np.ones(len(pos)), np.zeros(len(neg))])
    result = {"roc_auc": roc_auc(scores, labels)}
    pairs = getattr(task.split, split)
    negs = getattr(task.split, f"{split}_neg")
    groups = np.concatenate([pairs[0], negs[0]])
    result["mrr"] = mrr(scores, labels, groups)
    return result


def validation_metric(metrics: Mapping[str, float]) -> float:
    return metrics["macro_f1"] if "macro_f1" in metrics else metrics["roc_auc"]


def train(
    g: HeterogeneousGraph,
    structure: GraphStructure,
    task,
    config: TrainConfig,
    params: dict[str, Tensor] | None = None,
) -> TrainResult:
    """Full-batch Adam with early stopping on the validation metric; keeps the best-validation parameters."""
    params = params if params is not None else build_params(structure, g, task, config)
    names = list(params)
    opt = Adam([params[n] for n in names], config.learning_rate, config.weight_decay)
    rng = np.random.default_rng([config.seed, 1]) if config.dropout > 0 else None
    log, timing = [], []
    best_val, best_epoch = -math.inf, 0
    best = {n: p.data.copy() for n, p in params.items()}
    bad = 0
    for epoch in range(1, config.max_epochs + 1):
        t0 = time.perf_counter()
        # overflow surfaces as a NumericError below, so numpy's warnings add nothing
        with np.errstate(over="ignore", invalid="ignore"):
            loss = task_loss(g, structure, params, config, task, rng, neg_seed=config.seed * 100_003 + epoch)
            if not np.isfinite(loss.data):
                raise NumericError(f"training diverged at epoch {epoch}: loss={float(loss.data)}")
            grads = ad.grad(loss, [params[n] for n in names])
            if not all(np.all(np.isfinite(gr)) for gr in grads):
                raise NumericError(f"non-finite gradient at epoch {epoch}")
            opt.step(grads)
            out = predict(g, structure, params, config, task)
            val = validation_metric(score_outputs(out, task, "val"))
        record = {"epoch": epoch, "train_loss": float(loss.data), "val_metric": val}
        if isinstance(task, NodeTask):
            # single-label micro-F1 is accuracy
            record["train_micro_f1"] = score_outputs(out, task, "train")["micro_f1"]
        log.append(record)
        timing.append({"epoch": epoch, "wall_ms": round(1000 * (time.perf_counter() - t0), 3)})
        if val > best_val:
            best_val, best_epoch, bad = val, epoch, 0
            best = {n: p.data.copy() for n, p in params.items()}
        else:
            bad += 1
            if bad >= config.patience:
                break
    final = {n: ad.parameter(best[n], n) for n in names}
    return TrainResult(final, log, timing, best_epoch, best_val, config)
