"""Directed acyclic graphs used as known causal structures.

Nodes are labeled 0..p-1 internally; the JSON interchange format uses
1-based labels.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


class GraphError(ValueError):
    """Invalid graph input or infeasible graph operation."""


@dataclass(frozen=True)
class Dag:
    """A DAG given by per-node parent sets and a compatible topological order."""

    p: int
    parents: tuple[tuple[int, ...], ...]
    topo: tuple[int, ...]

    def __post_init__(self):
        if self.p < 1:
            raise GraphError(f"node count must be positive, got {self.p}")
        if len(self.parents) != self.p:
            raise GraphError("parents list length must equal p")
        if sorted(self.topo) != list(range(self.p)):
            raise GraphError("topo must be a permutation of the nodes")
        pos = {node: idx for idx, node in enumerate(self.topo)}
        for i, pa in enumerate(self.parents):
            if len(set(pa)) != len(pa):
                raise GraphError(f"duplicate parents for node {i}")
            for j in pa:
                if j == i:
                    raise GraphError(f"self-loop at node {i}")
                if not 0 <= j < self.p:
                    raise GraphError(f"parent {j} of node {i} out of range")
                if pos[j] >= pos[i]:
                    raise GraphError(
                        f"edge {j}->{i} violates the stored topological order"
                    )

    @property
    def edges(self) -> list[tuple[int, int]]:
        """All edges as (parent, child) pairs in canonical order."""
        return [(j, i) for i in range(self.p) for j in self.parents[i]]

    @property
    def num_edges(self) -> int:
        return sum(len(pa) for pa in self.parents)

    def children(self) -> list[list[int]]:
        ch: list[list[int]] = [[] for _ in range(self.p)]
        for i in range(self.p):
            for j in self.parents[i]:
                ch[j].append(i)
        return ch

    def sinks(self) -> list[int]:
        """Nodes with no children."""
        ch = self.children()
        return [i for i in range(self.p) if not ch[i]]

    def to_json(self) -> str:
        return json.dumps(
            {
                "p": self.p,
                "parents": [[j + 1 for j in pa] for pa in self.parents],
                "topo": [i + 1 for i in self.topo],
            }
        )

    @classmethod
    def from_json(cls, s: str) -> "Dag":
        d = json.loads(s)
        return cls(
            p=d["p"],
            parents=tuple(tuple(j - 1 for j in pa) for pa in d["parents"]),
            topo=tuple(i - 1 for i in d["topo"]),
        )


@dataclass(frozen=True)
class GraphKind:
    """Skeleton family: complete, erdos_renyi (edge probability q), or path."""

    name: str
    q: float = field(default=0.0)

    _NAMES = ("complete", "erdos_renyi", "path")

    def __post_init__(self):
        if self.name not in self._NAMES:
            raise GraphError(f"unknown graph kind {self.name!r}")
        if self.name == "erdos_renyi" and not 0.0 <= self.q <= 1.0:
            raise GraphError(f"edge probability must be in [0, 1], got {self.q}")

    @classmethod
    def complete(cls) -> "GraphKind":
        return cls("complete")

    @classmethod
    def erdos_renyi(cls, q: float) -> "GraphKind":
        return cls("erdos_renyi", q)

    @classmethod
    def path(cls) -> "GraphKind":
        return cls("path")


def er_probability_for_expected_edges(k: int, p: int) -> float:
    """Edge probability giving an expected edge count of k on p nodes."""
    return min(1.0, 2.0 * k / (p * (p - 1)))


@dataclass(frozen=True)
class Misspecification:
    """A structural perturbation: remove, add, or reverse `count` edges."""

    kind: str
    count: int

    _KINDS = ("missing_edges", "excessive_edges", "reversed_edges")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise GraphError(f"unknown misspecification kind {self.kind!r}")
        if self.count < 0:
            raise GraphError("count must be non-negative")


def _dag_from_edges(p: int, edges: set[tuple[int, int]]) -> Dag:
    """Build a Dag from an edge set, recomputing a topological order (Kahn)."""
    indeg = [0] * p
    ch: list[list[int]] = [[] for _ in range(p)]
    for j, i in edges:
        indeg[i] += 1
        ch[j].append(i)
    queue = sorted(i for i in range(p) if indeg[i] == 0)
    topo: list[int] = []
    while queue:
        v = queue.pop(0)
        topo.append(v)
        for w in sorted(ch[v]):
            indeg[w] -= 1
            if indeg[w] == 0:
                queue.append(w)
        queue.sort()
    if len(topo) != p:
        raise GraphError("edge set contains a cycle")
    parents: list[list[int]] = [[] for _ in range(p)]
    for j, i in edges:
        parents[i].append(j)
    return Dag(
        p=p,
        parents=tuple(tuple(sorted(pa)) for pa in parents),
        topo=tuple(topo),
    )


def _is_acyclic(p: int, edges: set[tuple[int, int]]) -> bool:
    try:
        _dag_from_edges(p, edges)
        return True
    except GraphError:
        return False


def generate(kind: GraphKind, p: int, seed: int) -> Dag:
    """Generate a random DAG: a skeleton of the requested family oriented by a
    uniformly sampled node permutation."""
    if p < 2:
        raise GraphError(f"need at least 2 nodes, got {p}")
    rng = np.random.default_rng(seed)
    perm = [int(v) for v in rng.permutation(p)]
    pos = {node: idx for idx, node in enumerate(perm)}

    pairs: list[tuple[int, int]] = []
    if kind.name == "complete":
        pairs = [(i, j) for i in range(p) for j in range(i + 1, p)]
    elif kind.name == "erdos_renyi":
        pairs = [
            (i, j)
            for i in range(p)
            for j in range(i + 1, p)
            if rng.random() < kind.q
        ]
    else:  # path: chain along the sampled permutation
        pairs = [(perm[k], perm[k + 1]) for k in range(p - 1)]

    parents: list[list[int]] = [[] for _ in range(p)]
    for u, v in pairs:
        if pos[u] < pos[v]:
            parents[v].append(u)
        else:
            parents[u].append(v)
    return Dag(
        p=p,
        parents=tuple(tuple(sorted(pa)) for pa in parents),
        topo=tuple(perm),
    )


def perturb(dag: Dag, spec: Misspecification, seed: int) -> Dag:
    """Return a DAG at structural Hamming distance exactly spec.count from dag."""
    if spec.count == 0:
        return dag
    rng = np.random.default_rng(seed)
    edges = set(dag.edges)

    if spec.kind == "missing_edges":
        if spec.count > len(edges):
            raise GraphError(
                f"cannot remove {spec.count} edges from a graph with {len(edges)}"
            )
        order = sorted(edges)
        chosen = [order[k] for k in rng.choice(len(order), spec.count, replace=False)]
        for e in chosen:
            edges.remove(e)
        return _dag_from_edges(dag.p, edges)

    if spec.kind == "excessive_edges":
        linked = {frozenset(e) for e in edges}
        free = [
            (i, j)
            for i in range(dag.p)
            for j in range(i + 1, dag.p)
            if frozenset((i, j)) not in linked
        ]
        if spec.count > len(free):
            raise GraphError(
                f"cannot add {spec.count} edges: only {len(free)} non-adjacent pairs"
            )
        pos = {node: idx for idx, node in enumerate(dag.topo)}
        chosen = [free[k] for k in rng.choice(len(free), spec.count, replace=False)]
        for i, j in chosen:
            # orient along the existing topological order to preserve acyclicity
            edges.add((i, j) if pos[i] < pos[j] else (j, i))
        return _dag_from_edges(dag.p, edges)

    # reversed_edges: skip reversals that would create a cycle
    if spec.count > len(edges):
        raise GraphError(
            f"cannot reverse {spec.count} edges in a graph with {len(edges)}"
        )
    candidates = sorted(edges)
    rng.shuffle(candidates)
    reversed_count = 0
    for j, i in candidates:
        if reversed_count == spec.count:
            break
        trial = set(edges)
        trial.remove((j, i))
        trial.add((i, j))
        if _is_acyclic(dag.p, trial):
            edges = trial
            reversed_count += 1
    if reversed_count < spec.count:
        raise GraphError(
            f"only {reversed_count} of {spec.count} requested reversals are feasible"
        )
    return _dag_from_edges(dag.p, edges)


def shd(a: Dag, b: Dag) -> int:
    """Structural Hamming distance: edge edits (add/remove/reverse) between DAGs."""
    ea, eb = set(a.edges), set(b.edges)
    reversed_pairs = {e for e in ea - eb if (e[1], e[0]) in eb}
    only_a = (ea - eb) - reversed_pairs
    only_b = (eb - ea) - {(e[1], e[0]) for e in reversed_pairs}
    return len(reversed_pairs) + len(only_a) + len(only_b)
