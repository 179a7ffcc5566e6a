"""Command-line entry point: build-graphs, train, eval, embed, cluster, sweep-beta.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from hagnn import io as hio
from hagnn.hetgraph import GraphError, HeterogeneousGraph, add_reverse_relations, average_degree, ensure_features
from hagnn.metapath import (
    DEFAULT_MAX_NNZ,
    DEFAULT_THRESHOLD,
    FusedMetaPathGraph,
    build_metapath_graph,
    describe,
    fuse_metapath_graphs,
    information_redundancy,
    reduction_report,
    relation_strength,
    resolve_catalog,
    select_types,
)
from hagnn.metrics import MetricError, cluster_and_score
from hagnn.model import param_shapes, prepare_structure
from hagnn.structsem import MODES, PER_TARGET, normalize_structural_weights
from hagnn.training import (
    CheckpointError,
    LinkTask,
    NodeTask,
    NumericError,
    TrainConfig,
    atomic_write_text,
    build_params,
    config_hash,
    evaluate,
    load_checkpoint,
    predict,
    save_checkpoint,
    split_links,
    train,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    dataset: str
    output_dir: str = "runs/default"
    node_type_names: list[str] = field(default_factory=list)
    edge_type_names: list[str] = field(default_factory=list)
    target_node_type: str | None = None
    target_edge_type: str | None = None
    metapaths: dict[str, list[str]] = field(default_factory=dict)
    threshold: float = DEFAULT_THRESHOLD
    reverse_relations: bool = False
    include_diagonal: bool = True
    normalization: str = PER_TARGET
    max_nnz: int = DEFAULT_MAX_NNZ
    identity_cap: int = 10_000
    random_dim: int = 64
    val_ratio: float = 0.2
    split_seed: int = 0
    link_val_ratio: float = 0.1
    link_test_ratio: float = 0.1
    train: TrainConfig = field(default_factory=TrainConfig)

    def flat(self) -> dict[str, Any]:
        """Inverse of `from_flat`: the resolved config as flat dotted keys."""
        out: dict[str, Any] = {"dataset": self.dataset, "output_dir": self.output_dir}
        if self.node_type_names:
            out["schema.node_types"] = list(self.node_type_names)
        if self.edge_type_names:
            out["schema.edge_types"] = list(self.edge_type_names)
        if self.target_node_type is not None:
            out["target.node_type"] = self.target_node_type
        if self.target_edge_type is not None:
            out["target.edge_type"] = self.target_edge_type
        for t, paths in self.metapaths.items():
            out[f"metapaths.{t}"] = list(paths)
        for key, attr in _GRAPH_KEYS.items():
            out[key] = getattr(self, attr)
        for k, v in asdict(self.train).items():
            out[f"train.{k}"] = v
        return out


_GRAPH_KEYS = {
    "graph.threshold": "threshold",
    "graph.reverse_relations": "reverse_relations",
    "graph.include_diagonal": "include_diagonal",
    "graph.normalization": "normalization",
    "graph.max_nnz": "max_nnz",
    "features.identity_cap": "identity_cap",
    "features.random_dim": "random_dim",
    "split.val_ratio": "val_ratio",
    "split.seed": "split_seed",
    "split.link_val_ratio": "link_val_ratio",
    "split.link_test_ratio": "link_test_ratio",
}
_EXPERIMENT_DEFAULTS = {f.name: f.default for f in fields(ExperimentConfig)}
_TRAIN_DEFAULTS = asdict(TrainConfig())


def flatten(d: dict, prefix: str = "") -> dict[str, Any]:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict) and not key.startswith("metapaths"):
            out.update(flatten(v, key + "."))
        elif isinstance(v, dict):
            out.update({f"{key}.{t}": p for t, p in v.items()})
        else:
            out[key] = v
    return out


def _coerce(key: str, value: Any, default: Any) -> Any:
    """Check a scalar against the type of its default; ints are accepted where floats are expected."""
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        if isinstance(value, str):  # YAML 1.1 reads "1e-3" as a string
            try:
                value = float(value)
            except ValueError:
                pass
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif isinstance(default, str):
        ok = isinstance(value, str)
    else:
        ok = True
    if not ok:
        raise ConfigError(f"{key} expects {type(default).__name__}, got {value!r}")
    return value


def from_flat(values: dict[str, Any], base_dir: Path | None = None) -> ExperimentConfig:
    values = dict(values)
    if "dataset" not in values:
        raise ConfigError("config is missing 'dataset'")
    kw: dict[str, Any] = {"dataset": str(values.pop("dataset"))}
    if "output_dir" in values:
        kw["output_dir"] = str(values.pop("output_dir"))
    simple = {"schema.node_types": "node_type_names", "schema.edge_types": "edge_type_names",
              "target.node_type": "target_node_type", "target.edge_type": "target_edge_type"}
    for key, attr in simple.items():
        if key in values:
            kw[attr] = values.pop(key)
    for key, attr in _GRAPH_KEYS.items():
        if key in values:
            kw[attr] = _coerce(key, values.pop(key), _EXPERIMENT_DEFAULTS[attr])
    metapaths = {}
    train_kw = {}
    for key in sorted(values):
        if key.startswith("metapaths."):
            paths = values[key]
            metapaths[key[len("metapaths."):]] = [paths] if isinstance(paths, str) else list(paths)
        elif key.startswith("train."):
            name = key[len("train."):]
            train_kw[name] = _coerce(key, values[key], _TRAIN_DEFAULTS[name]) if name in _TRAIN_DEFAULTS else values[key]
        else:
            raise ConfigError(f"unknown config key {key!r}")
    kw["metapaths"] = metapaths
    try:
        kw["train"] = TrainConfig.from_mapping(train_kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    cfg = ExperimentConfig(**kw)
    if cfg.normalization not in MODES:
        raise ConfigError(f"graph.normalization must be one of {MODES}")
    if not 0 <= cfg.threshold < 1:
        raise ConfigError("graph.threshold must lie in [0, 1)")
    if (cfg.train.task == "link_prediction") != (cfg.target_edge_type is not None):
        raise ConfigError("link_prediction needs target.edge_type (and other tasks must not set it)")
    if cfg.train.task != "link_prediction" and cfg.target_node_type is None:
        raise ConfigError("node classification needs target.node_type")
    cfg.dataset = str(resolve_dataset_path(cfg.dataset, base_dir))
    return cfg


def resolve_dataset_path(path: str, base_dir: Path | None) -> Path:
    p = Path(os.path.expanduser(path))
    if p.is_absolute():
        return p
    data_dir = os.environ.get("HAGNN_DATA_DIR")
    if data_dir and (Path(data_dir) / p).exists():
        return Path(data_dir) / p
    return ((base_dir or Path.cwd()) / p).resolve()


def shipped_configs() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files("hagnn.configs").iterdir() if p.name.endswith(".yaml"))


def locate_config(ref: str) -> Path:
    p = Path(ref)
    if p.exists():
        return p
    if ref in shipped_configs():
        with resources.as_file(resources.files("hagnn.configs") / f"{ref}.yaml") as q:
            return Path(q)
    raise ConfigError(f"config {ref!r} not found (shipped configs: {', '.join(shipped_configs())})")


def parse_override(text: str) -> tuple[str, Any]:
    if "=" not in text:
        raise ConfigError(f"--set expects key=value, got {text!r}")
    key, raw = text.split("=", 1)
    return key.strip(), yaml.safe_load(raw)


def load_config(ref: str, overrides: dict[str, Any] | None = None) -> ExperimentConfig:
    path = locate_config(ref)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a mapping of keys to values")
    values = flatten(raw)
    values.update(overrides or {})
    return from_flat(values, path.parent)


# -- experiment preparation -------------------------------------------------------------------------


@dataclass
class Prepared:
    cfg: ExperimentConfig
    graph: HeterogeneousGraph
    node_map: hio.NodeMap
    task: Any
    catalog: dict
    fused: dict[int, FusedMetaPathGraph]
    members: dict
    structure: Any


def dataset_fingerprint(path: Path) -> str:
    h = hashlib.sha256()
    for name in ("node.dat", "link.dat", "label.dat", "label.dat.test"):
        f = path / name
        if f.exists():
            h.update(name.encode())
            with open(f, "rb") as fh:
                for chunk in iter(lambda: fh.read(1 << 20), b""):
                    h.update(chunk)
    return h.hexdigest()[:16]


def load_graph(cfg: ExperimentConfig) -> tuple[HeterogeneousGraph, hio.NodeMap]:
    g, node_map = hio.load_hgb(
        cfg.dataset,
        dict(enumerate(cfg.node_type_names)) or None,
        dict(enumerate(cfg.edge_type_names)) or None,
        val_ratio=cfg.val_ratio,
        split_seed=cfg.split_seed,
    )
    if cfg.reverse_relations:
        g = add_reverse_relations(g)
    g = ensure_features(g, cfg.identity_cap, cfg.random_dim, seed=cfg.split_seed)
    return g, node_map


def make_task(g: HeterogeneousGraph, cfg: ExperimentConfig):
    """Returns (message-passing graph, task)."""
    tc = cfg.train
    if tc.task == "link_prediction":
        try:
            rel = g.edge_type_by_name(cfg.target_edge_type).id
        except GraphError as exc:
            raise ConfigError(str(exc)) from None
        mp, split = split_links(g, rel, cfg.link_val_ratio, cfg.link_test_ratio, seed=cfg.split_seed)
        return mp, LinkTask(split)
    try:
        t = g.node_type_by_name(cfg.target_node_type).id
    except GraphError as exc:
        raise ConfigError(str(exc)) from None
    if t not in g.labels:
        raise hio.DataError(f"node type {cfg.target_node_type!r} has no labels in {cfg.dataset}")
    y = g.labels[t]
    multi = tc.task == "node_classification_multi"
    if not multi and hio.is_multi_label(y):
        raise ConfigError("labels are multi-hot; use task node_classification_multi")
    labels = y if multi else y.argmax(axis=1)
    m = g.splits[t]
    return g, NodeTask(t, labels, m["train"], m["val"], m["test"], y.shape[1], multi)


def graph_cache_key(cfg: ExperimentConfig) -> str:
    payload = {k: v for k, v in cfg.flat().items() if not k.startswith("train.") and k != "output_dir"}
    payload["dataset"] = dataset_fingerprint(Path(cfg.dataset))
    return config_hash(payload)


def prepare(cfg: ExperimentConfig, *, use_cache: bool = True, build_members: bool = False) -> Prepared:
    g, node_map = load_graph(cfg)
    mp, task = make_task(g, cfg)
    try:
        catalog = resolve_catalog(mp, cfg.metapaths)
    except GraphError as exc:
        raise ConfigError(str(exc)) from None
    fused, members = {}, {}
    cache_dir = Path(cfg.output_dir) / "graphs"
    key = graph_cache_key(cfg)
    selected = sorted(select_types(mp, cfg.threshold, catalog))
    for t in selected:
        name = mp.node_types[t].name
        cached = _read_cached_fused(cache_dir, name, key, mp, t, catalog[t]) if use_cache and not build_members else None
        if cached is not None:
            fused[t] = cached
            continue
        graphs = [build_metapath_graph(mp, p, max_nnz=cfg.max_nnz, include_diagonal=cfg.include_diagonal)
                  for p in catalog[t]]
        members[t] = graphs
        fused[t] = fuse_metapath_graphs(graphs)
    structure = prepare_structure(mp, fused, mode=cfg.normalization)
    return Prepared(cfg, mp, node_map, task, catalog, fused, members, structure)


def _read_cached_fused(cache_dir: Path, name: str, key: str, g, t, paths):
    tsv, sidecar = cache_dir / f"fused_{name}.tsv", cache_dir / f"fused_{name}.stats.json"
    if not (tsv.exists() and sidecar.exists()):
        return None
    meta = json.loads(sidecar.read_text())
    if meta.get("cache_key") != key:
        return None
    n = g.node_types[t].count
    adj = hio.read_adjacency_tsv(tsv, n, n)
    return FusedMetaPathGraph(t, tuple(sorted(paths, key=lambda p: p.edge_type_sequence)), adj)


# -- commands --------------------------------------------------------------------------------------


class Reporter:
    def __init__(self, as_json: bool, stream=None):
        self.as_json = as_json
        self.stream = stream or sys.stdout

    def record(self, kind: str, payload: dict, human: str | None = None) -> None:
        if self.as_json:
            self.stream.write(json.dumps({"record": kind, **payload}, sort_keys=True) + "\n")
        elif human is not None:
            self.stream.write(human + "\n")


def echo_config(cfg: ExperimentConfig, out: Path) -> None:
    atomic_write_text(out / "config.resolved.yaml", yaml.safe_dump(cfg.flat(), sort_keys=True))


def cmd_build_graphs(cfg: ExperimentConfig, rep: Reporter) -> int:
    out = Path(cfg.output_dir)
    gdir = out / "graphs"
    prep = prepare(cfg, build_members=True)
    g = prep.graph
    key = graph_cache_key(cfg)
    atomic_write_text(out / "node_map.tsv", prep.node_map.to_tsv([t.name for t in g.node_types]))
    report: dict[str, Any] = {"selected_types": [g.node_types[t].name for t in sorted(prep.fused)], "types": {}}
    for t, fused in sorted(prep.fused.items()):
        name = g.node_types[t].name
        members = prep.members[t]
        stats = reduction_report(members, fused)
        paths = {}
        for m in members:
            pname = describe(g, m.meta_path)
            atomic_write_text(gdir / f"metapath_{name}_{_slug(pname)}.tsv", hio.adjacency_tsv(m.adjacency))
            paths[pname] = {
                "edges": m.num_edges,
                "average_degree": round(float(average_degree(m.adjacency)), 2),
                "strength": relation_strength(m),
                "symmetric": m.adjacency.is_symmetric(),
            }
        redundancy = []
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                try:
                    jac, con = information_redundancy(members[i], members[j])
                except GraphError:
                    continue
                redundancy.append({
                    "a": describe(g, members[i].meta_path), "b": describe(g, members[j].meta_path),
                    "jaccard": jac, "containment": con,
                    "jaccard_percent": round(100 * jac, 2), "containment_percent": round(100 * con, 2),
                })
        sw = normalize_structural_weights(fused, cfg.normalization)
        atomic_write_text(gdir / f"fused_{name}.tsv", hio.adjacency_tsv(fused.adjacency))
        atomic_write_text(gdir / f"structweights_{name}.tsv", hio.structural_weights_tsv(sw))
        entry = {"metapaths": paths, **stats.as_dict(), "redundancy": redundancy}
        sidecar = {"cache_key": key, "node_type": name, "metapaths": list(paths), **stats.as_dict()}
        atomic_write_text(gdir / f"fused_{name}.stats.json", json.dumps(sidecar, sort_keys=True, indent=1) + "\n")
        report["types"][name] = entry
        rep.record("fused_graph", {"node_type": name, **stats.as_dict()},
                   f"{name}: {stats.member_edges} member edges -> {stats.fused_edges} fused "
                   f"({stats.as_dict()['reduction_percent']:.2f}% reduction)")
        for pname, info in paths.items():
            rep.record("metapath_graph", {"node_type": name, "metapath": pname, **info},
                       f"  {pname}: {info['edges']} edges, avg degree {info['average_degree']}, {info['strength']}")
        for r in redundancy:
            rep.record("redundancy", {"node_type": name, **r},
                       f"  {r['a']} vs {r['b']}: jaccard {r['jaccard_percent']:.2f}%, containment {r['containment_percent']:.2f}%")
    if not prep.fused:
        rep.record("fused_graph", {"node_type": None}, "no node type selected for intra-type aggregation")
    atomic_write_text(out / "stats.json", json.dumps(report, sort_keys=True, indent=1) + "\n")
    echo_config(cfg, out)
    return EXIT_OK


def _slug(text: str) -> str:
    return "".join(c if c.isalnum() else "_" for c in text).strip("_")


def _checkpoint_meta(prep: Prepared) -> dict:
    return {"train_config": asdict(prep.cfg.train), "dataset": dataset_fingerprint(Path(prep.cfg.dataset))}


def _run_training(prep: Prepared, out: Path, rep: Reporter, label: str | None = None) -> dict:
    cfg = prep.cfg
    result = train(prep.graph, prep.structure, prep.task, cfg.train)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out / "train_log.jsonl", result.log_lines())
    atomic_write_text(out / "timing.jsonl", "".join(json.dumps(r, sort_keys=True) + "\n" for r in result.timing))
    save_checkpoint(out / "checkpoint.npz", result.params, _checkpoint_meta(prep))
    metrics = {
        "best_epoch": result.best_epoch,
        "epochs_run": len(result.log),
        "val": evaluate(prep.graph, prep.structure, result.params, cfg.train, prep.task, "val"),
        "test": evaluate(prep.graph, prep.structure, result.params, cfg.train, prep.task, "test"),
    }
    atomic_write_text(out / "metrics.json", json.dumps(metrics, sort_keys=True, indent=1) + "\n")
    test = " ".join(f"{k}={v:.4f}" for k, v in metrics["test"].items())
    rep.record("train", {"label": label, **metrics},
               f"{label + ': ' if label else ''}best epoch {result.best_epoch}/{len(result.log)}, test {test}")
    return metrics


def cmd_train(cfg: ExperimentConfig, rep: Reporter) -> int:
    out = Path(cfg.output_dir)
    prep = prepare(cfg)
    _run_training(prep, out, rep)
    echo_config(cfg, out)
    return EXIT_OK


def _load_for_checkpoint(cfg: ExperimentConfig, checkpoint: str):
    prep = prepare(cfg)
    expected = param_shapes(build_params(prep.structure, prep.graph, prep.task, cfg.train))
    if not Path(checkpoint).exists():
        raise hio.DataError(f"checkpoint {checkpoint} not found")
    params, _ = load_checkpoint(checkpoint, expected)
    return prep, params


def cmd_eval(cfg: ExperimentConfig, checkpoint: str, rep: Reporter) -> int:
    prep, params = _load_for_checkpoint(cfg, checkpoint)
    for split in ("val", "test"):
        m = evaluate(prep.graph, prep.structure, params, cfg.train, prep.task, split)
        rep.record("metrics", {"split": split, **m}, f"{split}: " + " ".join(f"{k}={v:.4f}" for k, v in m.items()))
    return EXIT_OK


def _target_type(prep: Prepared) -> int:
    if isinstance(prep.task, NodeTask):
        return prep.task.target_type
    return prep.graph.edge_types[prep.task.relation].src_type


def embeddings_tsv(ids, emb: np.ndarray) -> str:
    return "".join(f"{i}\t" + ",".join(repr(float(v)) for v in row) + "\n" for i, row in zip(ids, emb))


def read_embeddings_tsv(path) -> tuple[np.ndarray, np.ndarray]:
    ids, rows = [], []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            i, vals = line.split("\t")
            ids.append(int(i))
            rows.append([float(v) for v in vals.split(",")])
    return np.array(ids, dtype=np.int64), np.array(rows, dtype=float)


def cmd_embed(cfg: ExperimentConfig, checkpoint: str, rep: Reporter, output: str | None) -> int:
    prep, params = _load_for_checkpoint(cfg, checkpoint)
    t = _target_type(prep)
    out = predict(prep.graph, prep.structure, params, cfg.train, prep.task)["embeddings"]
    emb = out[t] if isinstance(out, dict) else out
    name = prep.graph.node_types[t].name
    path = Path(output) if output else Path(cfg.output_dir) / f"embeddings_{name}.tsv"
    atomic_write_text(path, embeddings_tsv(prep.node_map.global_ids[t], emb))
    rep.record("embed", {"node_type": name, "rows": int(emb.shape[0]), "width": int(emb.shape[1]), "path": str(path)},
               f"wrote {emb.shape[0]} x {emb.shape[1]} embeddings to {path}")
    return EXIT_OK


def cmd_cluster(cfg: ExperimentConfig, checkpoint: str, rep: Reporter, embeddings: str | None, seed: int) -> int:
    if cfg.train.task != "node_classification_single":
        raise ConfigError("cluster needs single-label node classification labels")
    if embeddings:
        prep = prepare(cfg)
        ids, emb = read_embeddings_tsv(embeddings)
        t = prep.task.target_type
        lookup = {int(g): i for i, g in enumerate(prep.node_map.global_ids[t])}
        try:
            local = np.array([lookup[int(i)] for i in ids], dtype=np.int64)
        except KeyError as exc:
            raise hio.DataError(f"embedding id {exc} is not a node of the target type") from None
        full = np.zeros((prep.graph.node_types[t].count, emb.shape[1]))
        full[local] = emb
        have = np.zeros(len(full), dtype=bool)
        have[local] = True
    else:
        prep, params = _load_for_checkpoint(cfg, checkpoint)
        t = prep.task.target_type
        full = predict(prep.graph, prep.structure, params, cfg.train, prep.task)["embeddings"]
        have = np.ones(len(full), dtype=bool)
    task = prep.task
    labeled = (task.train_mask | task.val_mask | task.test_mask) & have
    idx = np.flatnonzero(labeled)
    nmi_v, ari_v = cluster_and_score(full[idx], task.labels[idx], task.num_classes, seed=seed)
    rep.record("cluster", {"nmi": nmi_v, "ari": ari_v, "k": task.num_classes, "n": len(idx)},
               f"k-means (k={task.num_classes}, n={len(idx)}): NMI={nmi_v:.4f} ARI={ari_v:.4f}")
    return EXIT_OK


def cmd_sweep_beta(cfg: ExperimentConfig, rep: Reporter, values: list[float]) -> int:
    out = Path(cfg.output_dir)
    prep = prepare(cfg)
    rows = []
    for beta in values:
        run_cfg = ExperimentConfig(**{**{f.name: getattr(cfg, f.name) for f in fields(cfg)},
                                      "train": cfg.train.replace(beta=beta)})
        sub = Prepared(run_cfg, prep.graph, prep.node_map, prep.task, prep.catalog, prep.fused, prep.members, prep.structure)
        metrics = _run_training(sub, out / f"beta_{beta:g}", rep, label=f"beta={beta:g}")
        rows.append((beta, metrics["test"]))
    names = sorted(rows[0][1]) if rows else []
    table = "beta\t" + "\t".join(names) + "\n" + "".join(
        f"{b:g}\t" + "\t".join(f"{m[k]:.6f}" for k in names) + "\n" for b, m in rows)
    atomic_write_text(out / "sweep_beta.tsv", table)
    for b, m in rows:
        rep.record("sweep_row", {"beta": b, **m}, None)
    if not rep.as_json:
        rep.stream.write(table)
    echo_config(cfg, out)
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hagnn", description="Heterogeneous graph attention toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("config", help="config file, or the name of a shipped config")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
        p.add_argument("--dataset", help="dataset directory (overrides 'dataset')")
        p.add_argument("--output-dir", help="output directory (overrides 'output_dir')")
        p.add_argument("--seed", type=int, help="training seed (train.seed)")
        p.add_argument("--beta", type=float, help="edge residual weight (train.beta)")
        p.add_argument("--epochs", type=int, help="train.max_epochs")
        p.add_argument("--json", action="store_true", help="line-delimited JSON records on stdout")

    p = sub.add_parser("build-graphs", help="build meta-path and fused graphs, write statistics")
    common(p)
    p = sub.add_parser("train", help="train and write checkpoint, log and test metrics")
    common(p)
    for name, hlp in [("eval", "score a checkpoint"), ("embed", "export target-type embeddings"),
                      ("cluster", "k-means on embeddings, report NMI and ARI")]:
        p = sub.add_parser(name, help=hlp)
        p.add_argument("checkpoint")
        common(p)
        if name == "embed":
            p.add_argument("--output", help="embedding TSV path")
        if name == "cluster":
            p.add_argument("--embeddings", help="cluster this embedding TSV instead of the checkpoint's")
            p.add_argument("--kmeans-seed", type=int, default=0)
    p = sub.add_parser("sweep-beta", help="train once per beta value")
    common(p)
    p.add_argument("--values", default="0.1,0.2,0.3,0.4,0.5")
    return parser


def _overrides(args) -> dict[str, Any]:
    out = dict(parse_override(s) for s in args.set)
    if args.dataset is not None:
        out["dataset"] = str(Path(args.dataset).resolve())
    if args.output_dir is not None:
        out["output_dir"] = args.output_dir
    if args.seed is not None:
        out["train.seed"] = args.seed
    if args.beta is not None:
        out["train.beta"] = args.beta
    if args.epochs is not None:
        out["train.max_epochs"] = args.epochs
    return out


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    rep = Reporter(args.json)
    try:
        cfg = load_config(args.config, _overrides(args))
        if args.command == "build-graphs":
            return cmd_build_graphs(cfg, rep)
        if args.command == "train":
            return cmd_train(cfg, rep)
        if args.command == "eval":
            return cmd_eval(cfg, args.checkpoint, rep)
        if args.command == "embed":
            return cmd_embed(cfg, args.checkpoint, rep, args.output)
        if args.command == "cluster":
            return cmd_cluster(cfg, args.checkpoint, rep, args.embeddings, args.kmeans_seed)
        if args.command == "sweep-beta":
            try:
                values = [float(v) for v in args.values.split(",") if v.strip()]
            except ValueError:
                raise ConfigError(f"--values must be comma-separated numbers, got {args.values!r}") from None
            return cmd_sweep_beta(cfg, rep, values)
    except ConfigError as exc:
        print(f"hagnn: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"hagnn: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (GraphError, CheckpointError, MetricError, OSError) as exc:
        print(f"hagnn: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_USAGE


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
