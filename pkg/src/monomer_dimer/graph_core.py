"""Graphs, matchings and exact monomer-dimer partition functions.

Partition functions are returned as ``log Z``. Two independent routes are
provided: brute-force enumeration of all matchings and the Heilmann-Lieb
vertex recursion memoised on vertex-subset bitmasks.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterator, Mapping

import numpy as np
from scipy.special import logsumexp

ENUM_CAP = 20
HL_CAP = 24
HL_HARD_CAP = 30

Edge = tuple[int, int]


class GraphSizeError(ValueError):
    """Raised when an exact computation is asked for a graph above its cap."""


class NotATreeError(ValueError):
    pass


def canon(i: int, j: int) -> Edge:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class Graph:
    n: int
    edges: frozenset = frozenset()

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("vertex count must be >= 0")
        clean = set()
        for e in self.edges:
            i, j = e
            if i == j:
                raise ValueError(f"self-loop at vertex {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge {e} has a vertex outside [0, {self.n})")
            c = canon(i, j)
            if c in clean:
                raise ValueError(f"duplicate edge {c}")
            clean.add(c)
        object.__setattr__(self, "edges", frozenset(clean))

    @classmethod
    def from_edges(cls, n: int, edges) -> "Graph":
        return cls(n, frozenset(tuple(e) for e in edges))

    @classmethod
    def complete(cls, n: int) -> "Graph":
        return cls(n, frozenset((i, j) for i in range(n) for j in range(i + 1, n)))

    @classmethod
    def path(cls, n: int) -> "Graph":
        return cls(n, frozenset((i, i + 1) for i in range(n - 1)))

    @classmethod
    def star(cls, leaves: int) -> "Graph":
        """Star with centre 0 and ``leaves`` leaves."""
        return cls(leaves + 1, frozenset((0, k) for k in range(1, leaves + 1)))

    def sorted_edges(self) -> list[Edge]:
        return sorted(self.edges)

    def neighbours(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in self.sorted_edges():
            adj[i].append(j)
            adj[j].append(i)
        return adj

    def distances_from(self, root: int) -> list[float]:
        adj = self.neighbours()
        dist = [math.inf] * self.n
        dist[root] = 0
        queue = deque([root])
        while queue:
            v = queue.popleft()
            for u in adj[v]:
                if dist[u] == math.inf:
                    dist[u] = dist[v] + 1
                    queue.append(u)
        return dist

    def induced(self, vertices) -> tuple["Graph", list[int]]:
        """Induced subgraph, relabelled to 0..k-1. Returns it and the old labels."""
        keep = sorted(vertices)
        index = {v: k for k, v in enumerate(keep)}
        edges = frozenset(
            (index[i], index[j]) for i, j in self.edges if i in index and j in index
        )
        return Graph(len(keep), edges), keep

    def is_tree(self) -> bool:
        if self.n == 0:
            return False
        if len(self.edges) != self.n - 1:
            return False
        return all(d < math.inf for d in self.distances_from(0))


@dataclass(frozen=True)
class Matching:
    dimers: frozenset

    def __post_init__(self):
        seen = set()
        for i, j in self.dimers:
            if i in seen or j in seen:
                raise ValueError(f"dimers share a vertex: {sorted(self.dimers)}")
            seen.update((i, j))

    def covered(self) -> set[int]:
        return {v for e in self.dimers for v in e}

    def monomers(self, n: int) -> list[int]:
        cov = self.covered()
        return [v for v in range(n) if v not in cov]

    def __len__(self):
        return len(self.dimers)


@dataclass(frozen=True)
class MDModel:
    """Pure hard-core monomer-dimer model: dimer weights ``w`` on edges and
    monomer activities ``x`` on vertices."""

    graph: Graph
    w: Mapping[Edge, float]
    x: tuple

    def __post_init__(self):
        w = {canon(*e): float(v) for e, v in dict(self.w).items()}
        if set(w) != set(self.graph.edges):
            raise ValueError("dimer weights must be given exactly on the edge set")
        if any(v < 0 for v in w.values()):
            raise ValueError("dimer weights must be >= 0")
        x = tuple(float(v) for v in self.x)
        if len(x) != self.graph.n:
            raise ValueError("one monomer activity per vertex is required")
        if any(not v > 0 for v in x):
            raise ValueError("monomer activities must be strictly positive")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "x", x)

    @classmethod
    def uniform(cls, graph: Graph, w: float = 1.0, x: float = 1.0) -> "MDModel":
        return cls(graph, {e: w for e in graph.edges}, (x,) * graph.n)

    @property
    def n(self) -> int:
        return self.graph.n

    def weight(self, i: int, j: int) -> float:
        return self.w.get(canon(i, j), 0.0)

    def with_x(self, x) -> "MDModel":
        return MDModel(self.graph, self.w, tuple(x))

    def restrict(self, vertices) -> "MDModel":
        sub, keep = self.graph.induced(vertices)
        w = {(i, j): self.w[canon(keep[i], keep[j])] for i, j in sub.edges}
        return MDModel(sub, w, tuple(self.x[v] for v in keep))

    def weight_matrix(self) -> np.ndarray:
        W = np.zeros((self.n, self.n))
        for (i, j), v in self.w.items():
            W[i, j] = W[j, i] = v
        return W


@dataclass(frozen=True)
class ImitativeModel:
    base: MDModel
    j: Mapping[Edge, float] = field(default_factory=dict)

    def __post_init__(self):
        j = {canon(*e): float(v) for e, v in dict(self.j).items()}
        # missing couplings default to 0; extra pairs are an error
        extra = set(j) - set(self.base.graph.edges)
        if extra:
            raise ValueError(f"couplings given on non-edges: {sorted(extra)}")
        for e in self.base.graph.edges:
            j.setdefault(e, 0.0)
        object.__setattr__(self, "j", j)

    @property
    def n(self) -> int:
        return self.base.n

    def coupling_matrix(self) -> np.ndarray:
        n = self.n
        J = np.zeros((n, n))
        for (a, b), v in self.j.items():
            J[a, b] = J[b, a] = v
        return J


def _check_cap(n: int, cap: int, what: str):
    if n > cap:
        raise GraphSizeError(f"{what}: graph has {n} vertices, cap is {cap}")


def _adjacency_masks(model: MDModel) -> list[int]:
    """Neighbour bitmasks, dropping zero-weight edges."""
    adj = [0] * model.n
    for (i, j), v in model.w.items():
        if v > 0:
            adj[i] |= 1 << j
            adj[j] |= 1 << i
    return adj


# ---------------------------------------------------------------- enumeration


def enumerate_matchings(g: Graph, cap: int = ENUM_CAP) -> Iterator[Matching]:
    """Yield every matching of ``g`` exactly once, the empty one included."""
    _check_cap(g.n, cap, "enumerate_matchings")
    adj = g.neighbours()

    def rec(free: frozenset) -> Iterator[list[Edge]]:
        if not free:
            yield []
            return
        v = min(free)
        rest = free - {v}
        for tail in rec(rest):
            yield tail
        for u in adj[v]:
            if u in rest:
                for tail in rec(rest - {u}):
                    yield [canon(v, u)] + tail

    for dimers in rec(frozenset(range(g.n))):
        yield Matching(frozenset(dimers))


def _matching_logweight(m: MDModel, d: Matching) -> float:
    s = 0.0
    for e in d.dimers:
        w = m.w[e]
        if w == 0:
            return -math.inf
        s += math.log(w)
    for v in d.monomers(m.n):
        s += math.log(m.x[v])
    return s


def partition_enum(m: MDModel, cap: int = ENUM_CAP) -> float:
    """``log Z`` by summing over all matchings."""
    terms = [_matching_logweight(m, d) for d in enumerate_matchings(m.graph, cap)]
    return float(logsumexp(terms))


def dimer_number_mean(m: MDModel, cap: int = ENUM_CAP) -> float:
    """Gibbs average of the number of dimers, by enumeration."""
    ds = list(enumerate_matchings(m.graph, cap))
    lw = np.array([_matching_logweight(m, d) for d in ds])
    p = np.exp(lw - logsumexp(lw))
    return float(np.dot(p, [len(d) for d in ds]))


# ------------------------------------------------------- Heilmann-Lieb route


class _HLSolver:
    """log Z_{G[S]} for vertex subsets S, memoised on the bitmask of S."""

    def __init__(self, m: MDModel):
        self.logx = [math.log(v) for v in m.x]
        self.adj = _adjacency_masks(m)
        self.logw = {}
        for (i, j), v in m.w.items():
            if v > 0:
                self.logw[(i, j)] = self.logw[(j, i)] = math.log(v)
        self.memo: dict[int, float] = {0: 0.0}

    def pivot(self, mask: int) -> int:
        # lowest-index vertex of maximum degree inside the subset
        best, best_deg = -1, -1
        s = mask
        while s:
            low = s & -s
            v = low.bit_length() - 1
            deg = (self.adj[v] & mask).bit_count()
            if deg > best_deg:
                best, best_deg = v, deg
            s ^= low
        return best

    def logz(self, mask: int) -> float:
        memo = self.memo
        if mask in memo:
            return memo[mask]
        i = self.pivot(mask)
        rest = mask & ~(1 << i)
        terms = [self.logx[i] + self.logz(rest)]
        nb = self.adj[i] & rest
        while nb:
            low = nb & -nb
            j = low.bit_length() - 1
            terms.append(self.logw[(i, j)] + self.logz(rest & ~low))
            nb ^= low
        top = max(terms)
        val = top + math.log(math.fsum(math.exp(t - top) for t in terms))
        memo[mask] = val
        return val


def partition_hl(m: MDModel, cap: int = HL_CAP) -> float:
    """``log Z`` via Z_G = x_i Z_{G-i} + sum_{j~i} w_ij Z_{G-i-j}."""
    _check_cap(m.n, min(cap, HL_HARD_CAP), "partition_hl")
    return _HLSolver(m).logz((1 << m.n) - 1)


def monomer_probability(m: MDModel, i: int, cap: int = HL_CAP) -> float:
    """Probability that vertex ``i`` carries a monomer: x_i Z_{G-i} / Z_G."""
    _check_cap(m.n, min(cap, HL_HARD_CAP), "monomer_probability")
    solver = _HLSolver(m)
    full = (1 << m.n) - 1
    return math.exp(solver.logx[i] + solver.logz(full & ~(1 << i)) - solver.logz(full))


def pressure_bounds(m: MDModel) -> tuple[float, float]:
    """Lower bound from the empty matching, upper bound from dropping the
    hard-core constraint."""
    lower = math.fsum(math.log(v) for v in m.x)
    upper = lower + math.fsum(
        math.log1p(w / (m.x[i] * m.x[j])) for (i, j), w in m.w.items()
    )
    return lower, upper


# ------------------------------------------------------------ imitative model


def imitation_set(g: Graph, d: Matching) -> list[Edge]:
    """Edges whose endpoints are both monomers or both covered by dimers."""
    cov = d.covered()
    return [e for e in g.sorted_edges() if (e[0] in cov) == (e[1] in cov)]


def imitative_partition_enum(m: ImitativeModel, cap: int = ENUM_CAP) -> float:
    base = m.base
    terms = []
    for d in enumerate_matchings(base.graph, cap):
        lw = _matching_logweight(base, d)
        terms.append(lw + math.fsum(m.j[e] for e in imitation_set(base.graph, d)))
    return float(logsumexp(terms))


def imitative_partition_hl(m: ImitativeModel, cap: int = ENUM_CAP) -> float:
    """Imitative Heilmann-Lieb recursion.

    Removing a monomer at ``i`` multiplies every remaining monomer activity by
    ``exp(J_ik)``; removing a dimer ``ij`` multiplies every remaining dimer
    weight ``w_kk'`` by ``exp(c_k + c_k')`` with ``c_k = J_ik + J_jk`` and
    carries ``exp(J_ij)`` for the dimer edge itself. Both shifts are
    separable per vertex, so the state is the remaining subset plus the set of
    removed monomers.
    """
    base = m.base
    n = base.n
    _check_cap(n, cap, "imitative_partition_hl")
    J = m.coupling_matrix()
    logx = np.log(np.array(base.x))
    adj = _adjacency_masks(base)
    logw = np.full((n, n), -np.inf)
    for (i, j), v in base.w.items():
        if v > 0:
            logw[i, j] = logw[j, i] = math.log(v)
    full = (1 << n) - 1
    memo: dict[tuple[int, int], float] = {}

    def bits(mask):
        return [k for k in range(n) if mask >> k & 1]

    def rec(mask: int, mono: int) -> float:
        if mask == 0:
            return 0.0
        key = (mask, mono)
        if key in memo:
            return memo[key]
        removed_mono = bits(mono)
        removed_dimer = bits(full & ~mask & ~mono)
        a = J[:, removed_mono].sum(axis=1)  # monomer activity shift
        c = J[:, removed_dimer].sum(axis=1)  # dimer weight shift
        i = bits(mask)[0]
        rest = mask & ~(1 << i)
        terms = [logx[i] + a[i] + rec(rest, mono | (1 << i))]
        nb = adj[i] & rest
        for j in bits(nb):
            terms.append(logw[i, j] + c[i] + c[j] + J[i, j] + rec(rest & ~(1 << j), mono))
        top = max(terms)
        val = top + math.log(math.fsum(math.exp(t - top) for t in terms))
        memo[key] = val
        return val

    return rec(full, 0)


# ------------------------------------------------------ correlation inequality


@dataclass(frozen=True)
class BallBounds:
    lower: float
    upper: float
    exact: float

    @property
    def holds(self) -> bool:
        eps = 1e-12
        return self.lower <= self.exact + eps and self.exact <= self.upper + eps


def ball(m: MDModel, root: int, radius: int) -> tuple[MDModel, int]:
    """Induced sub-model on vertices within ``radius`` of ``root``."""
    dist = m.graph.distances_from(root)
    keep = [v for v in range(m.n) if dist[v] <= radius]
    return m.restrict(keep), keep.index(root)


def ball_monomer_bounds(m: MDModel, root: int, r: int) -> BallBounds:
    """Root monomer probability on the balls of radius 2r+1 (lower bound) and
    2r (upper bound), together with the exact value on the whole graph."""
    big, big_root = ball(m, root, 2 * r + 1)
    if not big.graph.is_tree():
        raise NotATreeError(f"ball of radius {2 * r + 1} around {root} is not a tree")
    small, small_root = ball(m, root, 2 * r)
    out = BallBounds(
        lower=monomer_probability(big, big_root),
        upper=monomer_probability(small, small_root),
        exact=monomer_probability(m, root),
    )
    return out


# ------------------------------------------------------------------------- io


def parse_edge_list(text: str, x: float = 1.0) -> MDModel:
    """``n`` on the first line, then ``i j [w]`` per line (``#`` comments)."""
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise ValueError("empty edge list")
    n = int(lines[0])
    w = {}
    for lineno, ln in enumerate(lines[1:], start=2):
        parts = ln.split()
        if len(parts) not in (2, 3):
            raise ValueError(f"line {lineno}: expected 'i j [w]', got {ln!r}")
        i, j = int(parts[0]), int(parts[1])
        w[canon(i, j)] = float(parts[2]) if len(parts) == 3 else 1.0
    g = Graph(n, frozenset(w))
    return MDModel(g, w, (x,) * n)


def model_from_dict(doc: dict) -> MDModel | ImitativeModel:
    unknown = set(doc) - {"n", "edges", "x", "j"}
    if unknown:
        raise ValueError(f"unknown graph fields: {sorted(unknown)}")
    n = int(doc["n"])
    w = {}
    for e in doc.get("edges", []):
        i, j = int(e[0]), int(e[1])
        w[canon(i, j)] = float(e[2]) if len(e) > 2 else 1.0
    x = doc.get("x", [1.0] * n)
    base = MDModel(Graph(n, frozenset(w)), w, tuple(x))
    if "j" in doc:
        jj = {canon(int(a), int(b)): float(v) for a, b, v in doc["j"]}
        return ImitativeModel(base, jj)
    return base


def model_to_dict(m: MDModel | ImitativeModel) -> dict:
    base = m.base if isinstance(m, ImitativeModel) else m
    doc = {
        "n": base.n,
        "edges": [[i, j, base.w[(i, j)]] for i, j in base.graph.sorted_edges()],
        "x": list(base.x),
    }
    if isinstance(m, ImitativeModel):
        doc["j"] = [[i, j, m.j[(i, j)]] for i, j in base.graph.sorted_edges()]
    return doc


def load_model(path) -> MDModel | ImitativeModel:
    with open(path) as fh:
        text = fh.read()
    if str(path).endswith(".json"):
        return model_from_dict(json.loads(text))
    return parse_edge_list(text)
