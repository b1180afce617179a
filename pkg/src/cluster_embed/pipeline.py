"""Cluster -> embed -> align, driven by a JSON config."""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from . import cluster as cl
from . import dissim, embed, metrics
from .align import AlignmentConfig, align, alpha_heuristic, cluster_geometry, save_transforms_json
from .data import load_csv
from .errors import ClusterEmbedError, StageError
from .persist import dump_json, save_embedding_csv

logger = logging.getLogger(__name__)


class ConfigError(ClusterEmbedError, ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _get(cfg: dict, key: str, path: str, kind, required=False, default=None, check=None, what=""):
    if key not in cfg:
        if required:
            raise ConfigError(f"{path}.{key}" if path else key, "required field is missing")
        return default
    val = cfg[key]
    where = f"{path}.{key}" if path else key
    if kind is int and (isinstance(val, bool) or not isinstance(val, int)):
        raise ConfigError(where, f"expected an integer, got {val!r}")
    if kind is float and (isinstance(val, bool) or not isinstance(val, (int, float))):
        raise ConfigError(where, f"expected a number, got {val!r}")
    if kind is str and not isinstance(val, str):
        raise ConfigError(where, f"expected a string, got {val!r}")
    if check is not None and not check(val):
        raise ConfigError(where, f"must be {what}, got {val!r}")
    return float(val) if kind is float else val


@dataclass
class PipelineConfig:
    input: str
    label_column: Any = None
    dissimilarity: dict = field(default_factory=lambda: {"kind": "euclidean"})
    clustering: dict = field(default_factory=lambda: {"method": "kmeans", "k": 2})
    embedding: dict = field(default_factory=lambda: {"method": "pca"})
    alpha: Any = 1.0
    theta_grid: int = 64
    sweeps: int = 50
    tol: float = 1e-6
    seeds: list = field(default_factory=lambda: [0])
    k_list: list = field(default_factory=lambda: [5, 10, 20])
    output_dir: str = "."


def parse_config(raw: dict, base_dir: str = ".") -> PipelineConfig:
    """Validate a pipeline config dict, raising :class:`ConfigError` with the field path."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    inp = _get(raw, "input", "", str, required=True)
    label_column = raw.get("label_column")
    if label_column is not None and not isinstance(label_column, (str, int)):
        raise ConfigError("label_column", "expected a column name or index")

    dis = raw.get("dissimilarity", {"kind": "euclidean"})
    if not isinstance(dis, dict):
        raise ConfigError("dissimilarity", "expected an object")
    kind = _get(dis, "kind", "dissimilarity", str, default="euclidean",
                check=lambda v: v in ("euclidean", "geodesic"), what="'euclidean' or 'geodesic'")
    dissimilarity = {"kind": kind}
    if kind == "geodesic":
        dissimilarity["k"] = _get(dis, "k", "dissimilarity", int, default=10,
                                  check=lambda v: v >= 1, what="a positive integer")

    clu = raw.get("clustering")
    if not isinstance(clu, dict):
        raise ConfigError("clustering", "required object is missing")
    method = _get(clu, "method", "clustering", str, required=True,
                  check=lambda v: v in ("kmeans", "dbscan"), what="'kmeans' or 'dbscan'")
    if method == "kmeans":
        clu = {"method": method,
               "k": _get(clu, "k", "clustering", int, required=True, check=lambda v: v >= 1,
                         what="a positive integer"),
               "seed": _get(clu, "seed", "clustering", int, default=None)}
    else:
        clu = {"method": method,
               "eps": _get(clu, "eps", "clustering", float, required=True, check=lambda v: v > 0,
                           what="positive"),
               "min_pts": _get(clu, "min_pts", "clustering", int, required=True, check=lambda v: v >= 1,
                               what="a positive integer")}

    emb = raw.get("embedding", {"method": "pca"})
    if not isinstance(emb, dict):
        raise ConfigError("embedding", "expected an object")
    em = _get(emb, "method", "embedding", str, default="pca",
              check=lambda v: v in ("pca", "isomap", "classical_scaling", "loe"),
              what="'pca', 'isomap', 'classical_scaling' or 'loe'")
    embedding = {"method": em}
    if em == "loe":
        embedding["k"] = _get(emb, "k", "embedding", int, default=10, check=lambda v: v >= 1,
                              what="a positive integer")
        embedding["nu"] = _get(emb, "nu", "embedding", float, default=1e-6, check=lambda v: v > 0,
                               what="positive")
        embedding["epochs"] = _get(emb, "epochs", "embedding", int, default=500, check=lambda v: v >= 1,
                                   what="a positive integer")
        embedding["learning_rate"] = _get(emb, "learning_rate", "embedding", float, default=1e-2,
                                          check=lambda v: v > 0, what="positive")

    ali = raw.get("alignment", {})
    if not isinstance(ali, dict):
        raise ConfigError("alignment", "expected an object")
    alpha = ali.get("alpha", 1.0)
    if alpha != "auto":
        alpha = _get(ali, "alpha", "alignment", float, default=1.0, check=lambda v: v >= 1,
                     what="'auto' or a number >= 1")
    theta_grid = _get(ali, "theta_grid", "alignment", int, default=64, check=lambda v: v >= 4, what=">= 4")
    sweeps = _get(ali, "sweeps", "alignment", int, default=50, check=lambda v: v >= 1, what=">= 1")
    tol = _get(ali, "tol", "alignment", float, default=1e-6, check=lambda v: v > 0, what="positive")

    seeds = raw.get("seeds", [0])
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds):
        raise ConfigError("seeds", "expected a non-empty list of integers")
    met = raw.get("metrics", {})
    k_list = met.get("k_list", [5, 10, 20]) if isinstance(met, dict) else None
    if not isinstance(k_list, list) or not all(isinstance(k, int) and k >= 1 for k in k_list):
        raise ConfigError("metrics.k_list", "expected a list of positive integers")
    out = _get(raw, "output_dir", "", str, default=".")

    if not os.path.isabs(inp):
        inp = os.path.join(base_dir, inp)
    if not os.path.isabs(out):
        out = os.path.join(base_dir, out)
    return PipelineConfig(inp, label_column, dissimilarity, clu, embedding, alpha, theta_grid, sweeps, tol,
                          seeds, k_list, out)


@dataclass
class RunResult:
    seed: int
    embedding: Any
    report: metrics.MetricsReport
    kept: np.ndarray
    assignment: cl.ClusterAssignment


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except ClusterEmbedError as exc:
        raise StageError(name, exc) from exc


def compute_dissimilarity(data: dissim.DataMatrix, spec: dict) -> dissim.DissimilarityMatrix:
    if spec["kind"] == "geodesic":
        k = min(spec["k"], data.n - 1)
        return dissim.geodesic_pairwise(dissim.build_knn_graph(data, k))
    return dissim.euclidean_pairwise(data)


def run_once(data: dissim.DataMatrix, delta: dissim.DissimilarityMatrix, cfg: PipelineConfig,
             seed: int) -> RunResult:
    c = cfg.clustering
    if c["method"] == "kmeans":
        ks = c["seed"] if c.get("seed") is not None else seed
        assignment = _stage("cluster", cl.kmeans, data, c["k"], ks)
    else:
        assignment = _stage("cluster", cl.dbscan, data, c["eps"], c["min_pts"])
    kept = assignment.kept_indices
    sub_data, sub_delta, sub_assign = _stage("cluster", cl.restrict, data, delta, assignment)

    e = cfg.embedding
    loe_cfg = None
    if e["method"] == "loe":
        loe_cfg = embed.LoeConfig(k=e["k"], nu=e["nu"], epochs=e["epochs"],
                                  learning_rate=e["learning_rate"], seed=seed)
    ce = _stage("embed", embed.embed_all_clusters, sub_data, sub_delta, sub_assign, e["method"], loe_cfg)

    if cfg.alpha == "auto":
        alpha = alpha_heuristic(_stage("align", cluster_geometry, sub_delta, sub_assign, ce))
    else:
        alpha = float(cfg.alpha)
    acfg = AlignmentConfig(alpha=alpha, theta_grid=cfg.theta_grid, sweeps=cfg.sweeps, tol=cfg.tol, seed=seed)
    ge = _stage("align", align, sub_delta, sub_assign, ce, acfg)

    labels = sub_data.labels
    report = _stage("metrics", metrics.evaluate, sub_delta, ge.coords, labels, cfg.k_list,
                    sub_assign if labels is not None else None, alpha)
    return RunResult(seed, ge, report, kept, sub_assign)


def aggregate(reports) -> dict:
    """Mean and (population) standard deviation of every numeric metric across runs."""
    rows = [r.to_dict() for r in reports]
    out = {}
    for key in rows[0]:
        if key == "knn_recall":
            out[key] = {}
            for k in rows[0][key]:
                vals = np.array([r[key][k] for r in rows])
                out[key][k] = {"mean": float(vals.mean()), "std": float(vals.std())}
            continue
        vals = [r[key] for r in rows]
        if any(v is None for v in vals):
            out[key] = None
            continue
        vals = np.asarray(vals, dtype=float)
        out[key] = {"mean": float(vals.mean()), "std": float(vals.std())}
    out["n_runs"] = len(rows)
    return out


def run_pipeline(cfg: PipelineConfig) -> list:
    data = _stage("load", load_csv, cfg.input, cfg.label_column)
    delta = _stage("dissimilarity", compute_dissimilarity, data, cfg.dissimilarity)
    os.makedirs(cfg.output_dir, exist_ok=True)
    results = []
    for seed in cfg.seeds:
        res = run_once(data, delta, cfg, seed)
        stem = os.path.join(cfg.output_dir, f"seed{seed}")
        save_embedding_csv(stem + "_embedding.csv", res.embedding.coords, res.kept, res.embedding.cluster)
        save_transforms_json(res.embedding.transforms, stem + "_transforms.json")
        with open(stem + "_metrics.json", "w") as fh:
            fh.write(res.report.to_json())
        logger.info("seed %d: alpha %.4g, final stress %.6g", seed, res.embedding.alpha_used,
                    res.embedding.final_stress)
        results.append(res)
    dump_json(aggregate([r.report for r in results]), os.path.join(cfg.output_dir, "aggregate.json"))
    return results
