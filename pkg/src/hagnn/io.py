"""Reading and writing HGB-style datasets and the toolkit's TSV artifacts."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from hagnn.hetgraph import EdgeType, GraphError, HeterogeneousGraph, NodeType, SparseAdjacency


class DataError(GraphError):
    pass


@dataclass
class NodeMap:
    """Global dataset ids <-> (type id, per-type local id)."""

    global_ids: list[np.ndarray]  # per type: global id of each local id
    names: list[list[str]]

    def to_local(self) -> dict[int, tuple[int, int]]:
        return {int(gid): (t, i) for t, ids in enumerate(self.global_ids) for i, gid in enumerate(ids)}

    def to_tsv(self, type_names: list[str]) -> str:
        lines = ["global_id\tnode_type\tlocal_id\tnode_name\n"]
        for t, ids in enumerate(self.global_ids):
            for i, gid in enumerate(ids):
                lines.append(f"{gid}\t{type_names[t]}\t{i}\t{self.names[t][i]}\n")
        return "".join(lines)


def _fmt(x: float) -> str:
    return repr(float(x))


def _read_lines(path: Path):
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n").rstrip("\r")
            if line.strip():
                yield lineno, line.split("\t")


def load_hgb(
    path,
    node_type_names: Mapping[int, str] | None = None,
    edge_type_names: Mapping[int, str] | None = None,
    *,
    val_ratio: float = 0.2,
    split_seed: int = 0,
) -> tuple[HeterogeneousGraph, NodeMap]:
    """Load `node.dat`, `link.dat` and optional `label.dat` / `label.dat.test` from a directory.

    Per-type local ids follow ascending global id. `label.dat` is divided into train and
    validation (`val_ratio`, seeded); `label.dat.test` becomes the test split.
    """
    path = Path(path)
    if not (path / "node.dat").exists():
        raise DataError(f"{path}/node.dat not found")
    raw_nodes: dict[int, list[tuple[int, str, list[float] | None]]] = defaultdict(list)
    for lineno, cols in _read_lines(path / "node.dat"):
        if len(cols) < 3:
            raise DataError(f"node.dat:{lineno}: expected at least 3 tab-separated fields")
        try:
            gid, ntype = int(cols[0]), int(cols[2])
            feats = [float(v) for v in cols[3].split(",")] if len(cols) > 3 and cols[3] != "" else None
        except ValueError as exc:
            raise DataError(f"node.dat:{lineno}: {exc}") from None
        raw_nodes[ntype].append((gid, cols[1], feats))
    type_ids = sorted(raw_nodes)
    if type_ids != list(range(len(type_ids))):
        raise DataError(f"node type ids must be contiguous from 0, got {type_ids}")
    node_types, features, global_ids, names = [], [], [], []
    for t in type_ids:
        rows = sorted(raw_nodes[t], key=lambda r: r[0])
        has = [r[2] is not None for r in rows]
        if any(has) and not all(has):
            raise DataError(f"node type {t}: some nodes have features and some do not")
        dim = len(rows[0][2]) if has[0] else 0
        if dim and any(len(r[2]) != dim for r in rows):
            raise DataError(f"node type {t}: inconsistent feature widths")
        name = (node_type_names or {}).get(t, f"t{t}")
        node_types.append(NodeType(t, name, len(rows), dim))
        features.append(np.array([r[2] for r in rows], dtype=np.float64) if dim else None)
        global_ids.append(np.array([r[0] for r in rows], dtype=np.int64))
        names.append([r[1] for r in rows])
    node_map = NodeMap(global_ids, names)
    lookup = node_map.to_local()
    if len(lookup) != sum(len(x) for x in global_ids):
        raise DataError("duplicate global node ids in node.dat")

    links: dict[int, list[tuple[int, int, int]]] = defaultdict(list)
    ends: dict[int, tuple[int, int]] = {}
    if (path / "link.dat").exists():
        for lineno, cols in _read_lines(path / "link.dat"):
            if len(cols) < 3:
                raise DataError(f"link.dat:{lineno}: expected at least 3 tab-separated fields")
            try:
                s, d, r = int(cols[0]), int(cols[1]), int(cols[2])
                w = float(cols[3]) if len(cols) > 3 and cols[3] != "" else 1.0
            except ValueError as exc:
                raise DataError(f"link.dat:{lineno}: {exc}") from None
            if s not in lookup or d not in lookup:
                raise DataError(f"link.dat:{lineno}: unknown node id")
            (st, sl), (dt, dl) = lookup[s], lookup[d]
            if ends.setdefault(r, (st, dt)) != (st, dt):
                raise DataError(f"link.dat:{lineno}: edge type {r} joins inconsistent node types")
            links[r].append((sl, dl, max(1, int(round(w)))))
    edge_ids = sorted(links)
    if edge_ids != list(range(len(edge_ids))):
        raise DataError(f"edge type ids must be contiguous from 0, got {edge_ids}")
    edge_types, adjacency = [], []
    for r in edge_ids:
        st, dt = ends[r]
        default = f"{node_types[st].name}-{node_types[dt].name}"
        if sum(1 for x in edge_ids if ends[x] == (st, dt)) > 1:
            default = f"{default}#{r}"
        edge_types.append(EdgeType(r, (edge_type_names or {}).get(r, default), st, dt))
        adjacency.append(SparseAdjacency.from_entries(node_types[st].count, node_types[dt].count, links[r]))

    labels, splits = {}, {}
    label_rows = {name: _read_labels(path / name, lookup) for name in ("label.dat", "label.dat.test")
                  if (path / name).exists()}
    if label_rows:
        all_rows = [row for rows in label_rows.values() for row in rows]
        label_types = {t for t, _, _ in all_rows}
        num_classes = 1 + max(c for _, _, cs in all_rows for c in cs)
        for t in sorted(label_types):
            y = np.zeros((node_types[t].count, num_classes), dtype=np.int64)
            masks = {k: np.zeros(node_types[t].count, dtype=bool) for k in ("train", "val", "test")}
            train_ids = []
            for fname, rows in label_rows.items():
                for tt, i, cs in rows:
                    if tt != t:
                        continue
                    y[i, cs] = 1
                    if fname == "label.dat":
                        train_ids.append(i)
                    else:
                        masks["test"][i] = True
            train_ids = np.array(sorted(set(train_ids)), dtype=np.int64)
            rng = np.random.default_rng(split_seed)
            perm = rng.permutation(len(train_ids))
            n_val = int(round(val_ratio * len(train_ids)))
            masks["val"][train_ids[perm[:n_val]]] = True
            masks["train"][train_ids[perm[n_val:]]] = True
            labels[t] = y
            splits[t] = masks
    g = HeterogeneousGraph(node_types, edge_types, adjacency, features, labels, splits)
    return g, node_map


def _read_labels(path: Path, lookup) -> list[tuple[int, int, list[int]]]:
    rows = []
    for lineno, cols in _read_lines(path):
        if len(cols) < 4:
            raise DataError(f"{path.name}:{lineno}: expected 4 tab-separated fields")
        gid = int(cols[0])
        if gid not in lookup:
            raise DataError(f"{path.name}:{lineno}: unknown node id {gid}")
        t, i = lookup[gid]
        rows.append((t, i, sorted(int(c) for c in cols[3].split(",") if c != "")))
    return rows


def is_multi_label(y: np.ndarray) -> bool:
    return bool(np.any(y.sum(axis=1) > 1))


def write_hgb(g: HeterogeneousGraph, path, node_map: NodeMap | None = None) -> None:
    """Serialise in canonical order: nodes by (type, local id), links by (edge type, row, col)."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    if node_map is None:
        start, gids, names = 0, [], []
        for t in g.node_types:
            gids.append(np.arange(start, start + t.count))
            names.append([f"{t.name}{i}" for i in range(t.count)])
            start += t.count
        node_map = NodeMap(gids, names)
    node_lines = []
    for t, x in zip(g.node_types, g.features):
        for i in range(t.count):
            base = f"{node_map.global_ids[t.id][i]}\t{node_map.names[t.id][i]}\t{t.id}"
            if t.feature_kind == "raw" and x is not None:
                base += "\t" + ",".join(_fmt(v) for v in x[i])
            node_lines.append(base + "\n")
    _write(path / "node.dat", "".join(node_lines))
    link_lines = []
    for e, a in zip(g.edge_types, g.adjacency):
        sg, dg = node_map.global_ids[e.src_type], node_map.global_ids[e.dst_type]
        for r, c, w in zip(a.row.tolist(), a.col.tolist(), a.weight.tolist()):
            link_lines.append(f"{sg[r]}\t{dg[c]}\t{e.id}\t{_fmt(w)}\n")
    _write(path / "link.dat", "".join(link_lines))
    if g.labels:
        train_lines, test_lines = [], []
        for t, y in sorted(g.labels.items()):
            masks = g.splits.get(t, {})
            in_train = masks.get("train", np.zeros(len(y), bool)) | masks.get("val", np.zeros(len(y), bool))
            in_test = masks.get("test", np.zeros(len(y), bool))
            for i in range(len(y)):
                cs = np.flatnonzero(y[i])
                if not len(cs):
                    continue
                line = (f"{node_map.global_ids[t][i]}\t{node_map.names[t][i]}\t{t}\t"
                        + ",".join(str(c) for c in cs) + "\n")
                if in_test[i]:
                    test_lines.append(line)
                elif in_train[i]:
                    train_lines.append(line)
        _write(path / "label.dat", "".join(train_lines))
        _write(path / "label.dat.test", "".join(test_lines))


def _write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)


def adjacency_tsv(a: SparseAdjacency) -> str:
    return "".join(f"{r}\t{c}\t{w}\n" for r, c, w in zip(a.row.tolist(), a.col.tolist(), a.weight.tolist()))


def structural_weights_tsv(sw) -> str:
    return "".join(
        f"{s}\t{d}\t{r}\t{_fmt(w)}\n" for s, d, r, w in zip(sw.src.tolist(), sw.dst.tolist(), sw.raw.tolist(), sw.weights.tolist())
    )


def read_adjacency_tsv(path, rows: int, cols: int) -> SparseAdjacency:
    entries = [(int(c[0]), int(c[1]), int(c[2])) for _, c in _read_lines(Path(path))]
    return SparseAdjacency.from_entries(rows, cols, entries)
