"""Binary Bayesian networks with Beta priors and exact conjugate updating.

Every node is Boolean. A network is a parent map; node i carries one
Beta(alpha, beta) prior per assignment of its parents. Observing a
record increments alpha of the active (node, parent-configuration)
entry when the node is 1 and beta when it is 0, so posterior updating
is pure counting. Parent configurations are encoded little-endian in
the declared parent order: configuration index j has bit p equal to
the value of the p-th declared parent.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

import numpy as np

from .errors import (
    CyclicGraphError,
    DimensionMismatchError,
    MissingPriorEntryError,
)

# (node index, parent-configuration index)
EntryKey = tuple[int, int]


# ---------------------------------------------------------------------------
# parameter and configuration types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BetaParams:
    """Parameters of a proper Beta distribution; both strictly positive."""

    alpha: float
    beta: float

    def __post_init__(self) -> None:
        if not (self.alpha > 0.0 and self.beta > 0.0):
            raise ValueError(
                f"Beta parameters must be positive, got ({self.alpha}, {self.beta})"
            )
        if not (np.isfinite(self.alpha) and np.isfinite(self.beta)):
            raise ValueError("Beta parameters must be finite")

    def updated(self, delta_alpha: float, delta_beta: float) -> "BetaParams":
        return BetaParams(self.alpha + delta_alpha, self.beta + delta_beta)

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)


@dataclass(frozen=True)
class ParentConfig:
    """One assignment of a node's parents.

    bits[p] is the value of the p-th declared parent; the integer index
    is sum(bits[p] << p), i.e. little-endian.
    """

    bits: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError(f"parent bits must be 0/1, got {self.bits}")

    @property
    def index(self) -> int:
        return sum(b << p for p, b in enumerate(self.bits))

    @classmethod
    def from_index(cls, index: int, width: int) -> "ParentConfig":
        if not 0 <= index < (1 << width):
            raise ValueError(f"config index {index} out of range for width {width}")
        return cls(tuple((index >> p) & 1 for p in range(width)))


PriorMap = dict[EntryKey, BetaParams]
PosteriorMap = dict[EntryKey, BetaParams]
# full parameterisation of a network: success probability per entry
ThetaMap = Mapping[EntryKey, float]


# ---------------------------------------------------------------------------
# graph structure
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BayesNetGraph:
    """Directed structure over binary nodes 0..node_count-1.

    parents[i] is the ordered tuple of parent indices of node i. The
    constructor checks index bounds, self-loops and duplicates; use
    validate_graph for the cycle check.
    """

    node_count: int
    parents: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if self.node_count <= 0:
            raise ValueError("node_count must be positive")
        if len(self.parents) != self.node_count:
            raise ValueError("parents must list every node exactly once")
        for i, pa in enumerate(self.parents):
            if any(not 0 <= p < self.node_count for p in pa):
                raise ValueError(f"node {i}: parent index out of range in {pa}")
            if i in pa:
                raise ValueError(f"node {i} lists itself as a parent")
            if len(set(pa)) != len(pa):
                raise ValueError(f"node {i}: duplicate parents in {pa}")

    @classmethod
    def from_parent_lists(cls, parents: Iterable[Iterable[int]]) -> "BayesNetGraph":
        tup = tuple(tuple(p) for p in parents)
        return cls(node_count=len(tup), parents=tup)

    def parent_count(self, node: int) -> int:
        return len(self.parents[node])

    def config_count(self, node: int) -> int:
        return 1 << self.parent_count(node)

    def update_size(self) -> int:
        """Total number of (node, configuration) entries."""
        return sum(self.config_count(i) for i in range(self.node_count))

    def entry_keys(self) -> Iterator[EntryKey]:
        for i in range(self.node_count):
            for j in range(self.config_count(i)):
                yield (i, j)

    def family(self, node: int) -> tuple[int, ...]:
        """Node together with its parents, ascending."""
        return tuple(sorted((node, *self.parents[node])))

    def family_mask(self, node: int) -> int:
        mask = 1 << node
        for p in self.parents[node]:
            mask |= 1 << p
        return mask


def validate_graph(graph: BayesNetGraph) -> list[int]:
    """Topological order of the nodes; raises CyclicGraphError otherwise."""
    indegree = [len(graph.parents[i]) for i in range(graph.node_count)]
    children: list[list[int]] = [[] for _ in range(graph.node_count)]
    for i, pa in enumerate(graph.parents):
        for p in pa:
            children[p].append(i)
    ready = [i for i in range(graph.node_count) if indegree[i] == 0]
    order: list[int] = []
    while ready:
        node = ready.pop()
        order.append(node)
        for child in children[node]:
            indegree[child] -= 1
            if indegree[child] == 0:
                ready.append(child)
    if len(order) != graph.node_count:
        stuck = [i for i in range(graph.node_count) if indegree[i] > 0]
        raise CyclicGraphError(f"parent structure has a cycle through nodes {stuck}")
    return order


# ---------------------------------------------------------------------------
# data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Dataset:
    """n records over k binary variables, stored as an (n, k) 0/1 array."""

    records: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.records)
        if arr.ndim != 2:
            raise ValueError("records must be a 2-d array (n, k)")
        if arr.size and not np.isin(arr, (0, 1)).all():
            raise ValueError("records must contain only 0/1 values")
        object.__setattr__(self, "records", arr.astype(np.int8, copy=False))

    @classmethod
    def from_records(cls, rows: Iterable[Iterable[int]], dimension: int | None = None) -> "Dataset":
        rows = [tuple(r) for r in rows]
        if rows:
            arr = np.array(rows, dtype=np.int8)
        else:
            arr = np.zeros((0, dimension or 0), dtype=np.int8)
        return cls(arr)

    @property
    def n(self) -> int:
        return self.records.shape[0]

    @property
    def dimension(self) -> int:
        return self.records.shape[1]

    def subset(self, indices: np.ndarray) -> "Dataset":
        return Dataset(self.records[indices])


# ---------------------------------------------------------------------------
# update vectors
# ---------------------------------------------------------------------------


@dataclass
class UpdateVector:
    """Complete map (node, config) -> (delta_alpha, delta_beta).

    Zero entries are materialised, so len(entries) always equals the
    graph's update_size. Values are treated as immutable after
    construction.
    """

    entries: dict[EntryKey, tuple[float, float]]

    def size(self) -> int:
        return len(self.entries)

    def linf_distance(self, other: "UpdateVector") -> float:
        keys = self.entries.keys() | other.entries.keys()
        worst = 0.0
        for key in keys:
            a = self.entries.get(key, (0.0, 0.0))
            b = other.entries.get(key, (0.0, 0.0))
            worst = max(worst, abs(a[0] - b[0]), abs(a[1] - b[1]))
        return worst

    def l1_distance(self, other: "UpdateVector") -> float:
        keys = self.entries.keys() | other.entries.keys()
        total = 0.0
        for key in keys:
            a = self.entries.get(key, (0.0, 0.0))
            b = other.entries.get(key, (0.0, 0.0))
            total += abs(a[0] - b[0]) + abs(a[1] - b[1])
        return total

    @classmethod
    def zeros(cls, graph: BayesNetGraph) -> "UpdateVector":
        return cls({key: (0.0, 0.0) for key in graph.entry_keys()})


def _config_indices(graph: BayesNetGraph, node: int, records: np.ndarray) -> np.ndarray:
    """Configuration index of every record for one node (vectorised)."""
    pa = graph.parents[node]
    if not pa:
        return np.zeros(records.shape[0], dtype=np.int64)
    weights = (1 << np.arange(len(pa), dtype=np.int64))
    return records[:, list(pa)].astype(np.int64) @ weights


def compute_updates(graph: BayesNetGraph, data: Dataset) -> UpdateVector:
    """Count-based posterior updates for every entry of the network.

    For each record x and node i with parent configuration j = x_{pi(i)},
    delta_alpha[i, j] grows by x_i and delta_beta[i, j] by 1 - x_i.
    """
    if data.dimension != graph.node_count and data.n > 0:
        raise DimensionMismatchError(
            f"records have width {data.dimension}, network has {graph.node_count} nodes"
        )
    entries: dict[EntryKey, tuple[float, float]] = {}
    recs = data.records
    for i in range(graph.node_count):
        width = graph.config_count(i)
        if data.n:
            cfg = _config_indices(graph, i, recs)
            ones = np.bincount(cfg[recs[:, i] == 1], minlength=width)
            zeros = np.bincount(cfg[recs[:, i] == 0], minlength=width)
        else:
            ones = zeros = np.zeros(width, dtype=np.int64)
        for j in range(width):
            entries[(i, j)] = (float(ones[j]), float(zeros[j]))
    return UpdateVector(entries)


def posterior_params(priors: Mapping[EntryKey, BetaParams], updates: UpdateVector) -> PosteriorMap:
    """Elementwise conjugate update of priors; every update key needs a prior."""
    out: PosteriorMap = {}
    for key, (da, db) in updates.entries.items():
        prior = priors.get(key)
        if prior is None:
            raise MissingPriorEntryError(f"no prior for entry {key}")
        out[key] = prior.updated(da, db)
    return out


def uniform_priors(graph: BayesNetGraph, alpha: float = 1.0, beta: float = 1.0) -> PriorMap:
    prior = BetaParams(alpha, beta)
    return {key: prior for key in graph.entry_keys()}


# ---------------------------------------------------------------------------
# contingency tables
# ---------------------------------------------------------------------------

DENSE_THRESHOLD = 20


@dataclass
class ContingencyTable:
    """Sparse table of non-negative cell weights over {0,1}^dimension."""

    dimension: int
    cells: dict[tuple[int, ...], float] = field(default_factory=dict)

    def total(self) -> float:
        return float(sum(self.cells.values()))

    def value(self, cell: tuple[int, ...]) -> float:
        return self.cells.get(tuple(cell), 0.0)

    def __add__(self, other: "ContingencyTable") -> "ContingencyTable":
        if self.dimension != other.dimension:
            raise DimensionMismatchError("cannot add tables of different dimension")
        merged = dict(self.cells)
        for cell, v in other.cells.items():
            merged[cell] = merged.get(cell, 0.0) + v
        return ContingencyTable(self.dimension, merged)

    def to_dense(self, max_dimension: int = DENSE_THRESHOLD) -> np.ndarray:
        """Flat length-2^k array, cell bits little-endian in the index."""
        if self.dimension > max_dimension:
            raise DimensionMismatchError(
                f"refusing to materialise 2^{self.dimension} cells (threshold {max_dimension})"
            )
        dense = np.zeros(1 << self.dimension)
        for cell, v in self.cells.items():
            idx = sum(b << p for p, b in enumerate(cell))
            dense[idx] += v
        return dense


def build_table(data: Dataset) -> ContingencyTable:
    """Sparse contingency table of the records; O(n) cells at most."""
    cells: dict[tuple[int, ...], float] = {}
    for row in data.records:
        cell = tuple(int(b) for b in row)
        cells[cell] = cells.get(cell, 0.0) + 1.0
    return ContingencyTable(data.dimension, cells)


def project_marginal(table: ContingencyTable, keep: Iterable[int]) -> ContingencyTable:
    """Marginalise onto the coordinates flagged in `keep`.

    `keep` is a 0/1 selector of length table.dimension; the result is
    indexed by the kept coordinates in ascending position order. Each
    output cell is the sum of input cells whose restriction matches it.
    """
    keep = tuple(keep)
    if len(keep) != table.dimension:
        raise DimensionMismatchError(
            f"selector length {len(keep)} != table dimension {table.dimension}"
        )
    positions = [p for p, flag in enumerate(keep) if flag]
    out: dict[tuple[int, ...], float] = {}
    for cell, v in table.cells.items():
        sub = tuple(cell[p] for p in positions)
        out[sub] = out.get(sub, 0.0) + v
    return ContingencyTable(len(positions), out)


# ---------------------------------------------------------------------------
# parameterised networks (used by synthesis and the Lipschitz calculus)
# ---------------------------------------------------------------------------


def joint_log_likelihood(graph: BayesNetGraph, theta: ThetaMap, record: Iterable[int]) -> float:
    """log p_theta(record) under the fully observed network."""
    rec = tuple(int(v) for v in record)
    if len(rec) != graph.node_count:
        raise DimensionMismatchError("record width does not match the network")
    total = 0.0
    for i in range(graph.node_count):
        j = 0
        for p, parent in enumerate(graph.parents[i]):
            j |= rec[parent] << p
        prob = theta[(i, j)]
        total += np.log(prob) if rec[i] else np.log1p(-prob)
    return float(total)


def ancestral_sample(
    graph: BayesNetGraph, theta: ThetaMap, n: int, rng: np.random.Generator
) -> Dataset:
    """Sample n records in topological order from the parameterised network."""
    order = validate_graph(graph)
    recs = np.zeros((n, graph.node_count), dtype=np.int8)
    for i in order:
        cfg = _config_indices(graph, i, recs)
        probs = np.array([theta[(i, int(j))] for j in cfg])
        recs[:, i] = (rng.random(n) < probs).astype(np.int8)
    return Dataset(recs)
