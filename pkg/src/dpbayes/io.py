"""Loaders for the network, dataset, grid, and regression file formats.

Network files are JSON:

    {"nodes": 3,
     "parents": [[], [0], [0]],
     "priors": {"default": [1.0, 1.0],
                "overrides": [[1, 0, 2.0, 3.0]]}}

overrides rows are (node, parent-configuration, alpha, beta). Binary
datasets are headerless CSV of 0/1 values, one record per row.
Regression data is numeric CSV with the target in the last column.
Grid files are numeric CSV rows of (parameter components..., prior mass).
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .expmech import GridSpec
from .graph import BayesNetGraph, BetaParams, Dataset, PriorMap, validate_graph


def load_network(path: str | Path) -> tuple[BayesNetGraph, PriorMap]:
    try:
        spec = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read network file {path}: {exc}") from exc
    try:
        nodes = int(spec["nodes"])
        parents = tuple(tuple(int(p) for p in row) for row in spec["parents"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed network file {path}: {exc}") from exc
    if len(parents) != nodes:
        raise ConfigError(f"{path}: expected {nodes} parent lists, got {len(parents)}")
    graph = BayesNetGraph(node_count=nodes, parents=parents)
    validate_graph(graph)

    priors_spec = spec.get("priors", {})
    default = priors_spec.get("default", [1.0, 1.0])
    try:
        base = BetaParams(float(default[0]), float(default[1]))
    except (TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"{path}: bad default prior: {exc}") from exc
    priors: PriorMap = {key: base for key in graph.entry_keys()}
    for row in priors_spec.get("overrides", []):
        try:
            node, cfg, alpha, beta = int(row[0]), int(row[1]), float(row[2]), float(row[3])
        except (TypeError, ValueError, IndexError) as exc:
            raise ConfigError(f"{path}: bad prior override {row!r}: {exc}") from exc
        if (node, cfg) not in priors:
            raise ConfigError(f"{path}: override {row!r} names a nonexistent entry")
        priors[(node, cfg)] = BetaParams(alpha, beta)
    return graph, priors


def load_dataset(path: str | Path) -> Dataset:
    rows = []
    try:
        with open(path, newline="") as fh:
            for line_no, row in enumerate(csv.reader(fh), start=1):
                if not row:
                    continue
                try:
                    rows.append([int(v) for v in row])
                except ValueError as exc:
                    raise ConfigError(f"{path}:{line_no}: non-integer cell: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read dataset {path}: {exc}") from exc
    if not rows:
        raise ConfigError(f"dataset {path} is empty")
    try:
        return Dataset.from_records(rows)
    except ValueError as exc:
        raise ConfigError(f"dataset {path}: {exc}") from exc


def load_regression_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    try:
        raw = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read regression data {path}: {exc}") from exc
    if raw.shape[1] < 2:
        raise ConfigError(f"regression data {path} needs features plus a target column")
    return raw[:, :-1], raw[:, -1]


def load_grid(path: str | Path) -> GridSpec:
    try:
        raw = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read grid file {path}: {exc}") from exc
    if raw.shape[1] < 2:
        raise ConfigError(f"grid file {path} needs parameter columns plus a mass column")
    points = tuple(tuple(float(c) for c in row[:-1]) for row in raw)
    try:
        return GridSpec(points=points, prior_mass=tuple(float(m) for m in raw[:, -1]))
    except ValueError as exc:
        raise ConfigError(f"grid file {path}: {exc}") from exc
