"""Hierarchical density clustering, cluster validity scoring, and the
hyperparameter grid search used to fit per-block concept spaces.

The density pipeline: Euclidean core distances (distance to the
min_samples-th neighbor, self included) -> mutual reachability
max(core(a), core(b), d(a, b)) -> dense-Prim minimum spanning tree ->
single-linkage merge forest (equal-weight merges grouped, so ties form
n-ary nodes) -> condensation with min_cluster_size -> excess-of-mass
selection over cluster stabilities. A k-means fit with the same result
type is provided as the rudimentary-clustering ablation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from .errors import DomainError, ValidationError

NOISE = 0

DEFAULT_GRID = (5, 10, 15, 20, 25, 30, 50, 80, 100)


@dataclass(frozen=True)
class ClusterParams:
    min_cluster_size: int
    min_samples: int
    allow_single_cluster: bool = True
    selection: str = "excess_of_mass"

    def __post_init__(self):
        if self.min_cluster_size < 2 or self.min_samples < 2:
            raise ValidationError("min_cluster_size and min_samples must be >= 2")
        if self.selection != "excess_of_mass":
            raise ValidationError(f"unsupported selection {self.selection!r}")


@dataclass
class Clustering:
    labels: np.ndarray  # (n,) int, NOISE == 0, clusters 1..n_clusters
    n_clusters: int
    condensed_tree: list  # rows (parent, child, lambda, child_size)
    stabilities: dict  # condensed cluster node id -> stability
    cluster_nodes: dict = field(default_factory=dict)  # label -> node id

    def members(self, label: int) -> np.ndarray:
        return np.nonzero(self.labels == label)[0]


def _as_points(points) -> np.ndarray:
    try:
        pts = np.asarray(points, dtype=np.float64)
    except ValueError as exc:
        raise ValidationError(f"points must form a uniform 2d array: {exc}") from exc
    if pts.ndim != 2:
        raise ValidationError("points must be a 2d array of uniform dimension")
    if not np.all(np.isfinite(pts)):
        raise ValidationError("points contain non-finite values")
    if len(pts) < 2:
        raise ValidationError("need at least 2 points")
    return pts


def _prim_mst(weights: np.ndarray):
    """Dense Prim over a symmetric weight matrix; returns (a, b, w) edges."""
    n = weights.shape[0]
    in_tree = np.zeros(n, dtype=bool)
    best = np.full(n, np.inf)
    best_from = np.zeros(n, dtype=np.int64)
    in_tree[0] = True
    np.minimum(best, weights[0], out=best)
    best[0] = np.inf
    best_from[:] = 0
    edges = []
    for _ in range(n - 1):
        nxt = int(np.argmin(best))
        edges.append((int(best_from[nxt]), nxt, float(best[nxt])))
        in_tree[nxt] = True
        row = weights[nxt]
        update = (row < best) & ~in_tree
        best[update] = row[update]
        best_from[update] = nxt
        best[nxt] = np.inf
    return edges


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        p = self.parent
        while p[x] != x:
            p[x] = p[p[x]]
            x = p[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        self.parent[ra] = rb
        return rb


def _merge_forest(mst_edges, n):
    """Group equal-weight MST edges into n-ary merge nodes.

    Returns (root, children, weight, size): node ids < n are points,
    internal nodes are created in ascending id order per merge level.
    """
    edges = sorted(mst_edges, key=lambda e: e[2])
    uf = _UnionFind(n)
    node_of_root = {i: i for i in range(n)}
    children: dict = {}
    weight: dict = {}
    size = {i: 1 for i in range(n)}
    next_node = n
    i = 0
    while i < len(edges):
        j = i
        w = edges[i][2]
        while j < len(edges) and edges[j][2] == w:
            j += 1
        touched: dict = {}
        for a, b, _w in edges[i:j]:
            ra, rb = uf.find(a), uf.find(b)
            if ra == rb:
                continue
            ka = touched.pop(ra, None)
            if ka is None:
                ka = {node_of_root.pop(ra)}
            kb = touched.pop(rb, None)
            if kb is None:
                kb = {node_of_root.pop(rb)}
            touched[uf.union(ra, rb)] = ka | kb
        for root, kids in touched.items():
            node = next_node
            next_node += 1
            children[node] = sorted(kids)
            weight[node] = w
            size[node] = sum(size[k] for k in kids)
            node_of_root[root] = node
        i = j
    roots = list(node_of_root.values())
    if len(roots) != 1:
        raise AssertionError("mutual reachability graph must be connected")
    return roots[0], children, weight, size


def _leaves(node, children, n, out):
    stack = [node]
    while stack:
        cur = stack.pop()
        if cur < n:
            out.append(cur)
        else:
            stack.extend(children[cur])


def _condense(forest_root, children, weight, size, n, min_cluster_size):
    """Condensed tree rows (parent, child, lambda, child_size); the root
    cluster has id n, new clusters get ids n+1, n+2, ... in walk order."""
    rows = []
    parent_of = {}
    next_cluster = n + 1
    stack = [(forest_root, n)]
    while stack:
        node, cluster = stack.pop()
        w = weight[node]
        lam = math.inf if w <= 0.0 else 1.0 / w
        kids = children[node]
        big = [k for k in kids if size[k] >= min_cluster_size]
        if len(big) >= 2:
            for k in kids:
                if size[k] >= min_cluster_size:
                    cid = next_cluster
                    next_cluster += 1
                    parent_of[cid] = cluster
                    rows.append((cluster, cid, lam, size[k]))
                    stack.append((k, cid))
                else:
                    pts: list = []
                    _leaves(k, children, n, pts)
                    for p in sorted(pts):
                        rows.append((cluster, p, lam, 1))
        elif len(big) == 1:
            for k in kids:
                if k != big[0]:
                    pts = []
                    _leaves(k, children, n, pts)
                    for p in sorted(pts):
                        rows.append((cluster, p, lam, 1))
            stack.append((big[0], cluster))
        else:
            pts = []
            _leaves(node, children, n, pts)
            for p in sorted(pts):
                rows.append((cluster, p, lam, 1))
    return rows, parent_of


def _stabilities(rows, parent_of, n):
    birth = {n: 0.0}
    for parent, child, lam, _sz in rows:
        if child >= n:
            birth[child] = lam
    out = {c: 0.0 for c in birth}
    for parent, _child, lam, sz in rows:
        gap = lam - birth[parent]
        if math.isinf(lam) and math.isinf(birth[parent]):
            gap = 0.0
        out[parent] += sz * gap
    return out


def _select_eom(stability, parent_of, n, allow_single_cluster):
    clusters = sorted(stability)
    kids: dict = {c: [] for c in clusters}
    for child, parent in parent_of.items():
        kids[parent].append(child)
    sigma, won = {}, {}
    for c in sorted(clusters, reverse=True):
        child_sum = sum(sigma[k] for k in kids[c])
        if c == n and not allow_single_cluster:
            won[c] = False
            sigma[c] = child_sum
            continue
        if stability[c] >= child_sum:
            won[c] = True
            sigma[c] = stability[c]
        else:
            won[c] = False
            sigma[c] = child_sum

    def ancestors(c):
        cur = parent_of.get(c)
        while cur is not None:
            yield cur
            cur = parent_of.get(cur)

    return sorted(c for c in clusters if won[c] and not any(won[a] for a in ancestors(c)))


def _label_points(rows, parent_of, selected, n, n_points):
    label_of = {c: i + 1 for i, c in enumerate(selected)}
    root_max_lam = max((lam for p, _c, lam, _s in rows if p == n), default=0.0)
    labels = np.full(n_points, NOISE, dtype=np.int64)
    for parent, child, lam, _sz in rows:
        if child >= n:
            continue
        cur = parent
        hit = None
        while cur is not None:
            if cur in label_of:
                hit = cur
                break
            cur = parent_of.get(cur)
        if hit is None:
            continue
        if hit == n and lam < root_max_lam:
            continue  # single-cluster mode keeps only the persistent core
        labels[child] = label_of[hit]
    return labels, label_of


class _DensityContext:
    """Caches the distance matrix and per-min_samples machinery so a grid
    search does not recompute shared work. fit() is bit-identical to a
    fresh fit_hdbscan call on the same points."""

    def __init__(self, points):
        self.points = _as_points(points)
        self.dist = cdist(self.points, self.points)
        self._per_ms: dict = {}

    def _machinery(self, min_samples: int):
        cached = self._per_ms.get(min_samples)
        if cached is not None:
            return cached
        n = len(self.points)
        if min_samples > n:
            raise DomainError(f"min_samples={min_samples} exceeds {n} points")
        core = np.partition(self.dist, min_samples - 1, axis=1)[:, min_samples - 1]
        mreach = np.maximum(self.dist, np.maximum.outer(core, core))
        np.fill_diagonal(mreach, 0.0)
        forest = _merge_forest(_prim_mst(mreach), n)
        self._per_ms[min_samples] = forest
        return forest

    def fit(self, params: ClusterParams) -> Clustering:
        n = len(self.points)
        forest_root, children, weight, size = self._machinery(params.min_samples)
        rows, parent_of = _condense(
            forest_root, children, weight, size, n, params.min_cluster_size
        )
        stability = _stabilities(rows, parent_of, n)
        selected = _select_eom(stability, parent_of, n, params.allow_single_cluster)
        labels, label_of = _label_points(rows, parent_of, selected, n, n)
        return Clustering(
            labels=labels,
            n_clusters=len(selected),
            condensed_tree=rows,
            stabilities=stability,
            cluster_nodes={lab: node for node, lab in label_of.items()},
        )


def fit_hdbscan(points, params: ClusterParams) -> Clustering:
    return _DensityContext(points).fit(params)


# ---------------------------------------------------------------------------
# Density-based cluster validity
# ---------------------------------------------------------------------------


def _apts_core_distances(sub_dist: np.ndarray, dim: int) -> np.ndarray:
    """All-points core distance within one cluster: the inverse power mean
    of inverse distances to the other members, computed in log space."""
    m = sub_dist.shape[0]
    with np.errstate(divide="ignore"):
        logs = -dim * np.log(sub_dist)
    np.fill_diagonal(logs, -np.inf)
    lse = logsumexp(logs, axis=1)
    out = np.exp(-(lse - math.log(m - 1)) / dim)
    return out


def _cluster_mst_stats(sub_dist: np.ndarray, apts: np.ndarray):
    """(sparseness, internal_mask) for one cluster's mutual-reachability MST.

    Sparseness is the max weight among edges whose endpoints both have
    degree > 1; clusters too small to have such edges fall back to all
    edges, and likewise for internal nodes.
    """
    m = sub_dist.shape[0]
    mreach = np.maximum(sub_dist, np.maximum.outer(apts, apts))
    np.fill_diagonal(mreach, 0.0)
    edges = _prim_mst(mreach)
    degree = np.zeros(m, dtype=np.int64)
    for a, b, _w in edges:
        degree[a] += 1
        degree[b] += 1
    internal = degree > 1
    if not internal.any():
        internal = np.ones(m, dtype=bool)
    internal_edges = [w for a, b, w in edges if internal[a] and internal[b]]
    if not internal_edges:
        internal_edges = [w for _a, _b, w in edges]
    return max(internal_edges), internal


def dbcv_score(points, labels) -> float:
    """Density-based cluster validity in [-1, 1].

    Degenerate partitions (fewer than two clusters) score 0 by
    convention so that grid search stays totally ordered; noise points
    join no cluster but still count in the size weighting.
    """
    pts = _as_points(points)
    return _dbcv_from_dist(cdist(pts, pts), pts.shape[1], np.asarray(labels))


def _dbcv_from_dist(dist: np.ndarray, dim: int, labels: np.ndarray) -> float:
    n = dist.shape[0]
    ids = sorted(int(v) for v in np.unique(labels) if v != NOISE and v != -1)
    if len(ids) < 2:
        return 0.0
    members = {v: np.nonzero(labels == v)[0] for v in ids}
    apts: dict = {}
    sparseness: dict = {}
    internal_idx: dict = {}
    internal_apts: dict = {}
    for v in ids:
        idx = members[v]
        if len(idx) < 2:
            sparseness[v] = None
            continue
        sub = dist[np.ix_(idx, idx)]
        a = _apts_core_distances(sub, dim)
        apts[v] = a
        spars, internal = _cluster_mst_stats(sub, a)
        sparseness[v] = spars
        internal_idx[v] = idx[internal]
        internal_apts[v] = a[internal]

    score = 0.0
    scorable = [v for v in ids if sparseness[v] is not None]
    for v in ids:
        if sparseness[v] is None:
            continue  # singleton clusters contribute zero validity
        seps = []
        for u in scorable:
            if u == v:
                continue
            block = dist[np.ix_(internal_idx[v], internal_idx[u])]
            mr = np.maximum(
                block, np.maximum.outer(internal_apts[v], internal_apts[u])
            )
            seps.append(float(mr.min()))
        if not seps:
            continue
        min_sep = min(seps)
        denom = max(min_sep, sparseness[v])
        validity = 0.0 if denom <= 0 else (min_sep - sparseness[v]) / denom
        score += (len(members[v]) / n) * validity
    return float(score)


# ---------------------------------------------------------------------------
# Grid search
# ---------------------------------------------------------------------------


@dataclass
class GridSearchResult:
    scored: list  # [(ClusterParams, score)] in evaluation order; nan = infeasible
    best: ClusterParams
    degenerate: bool = False  # no cell produced >= 2 clusters


def grid_search(points, grid=DEFAULT_GRID, allow_single_cluster: bool = True) -> GridSearchResult:
    """Score the full min_cluster_size x min_samples product with the
    validity of each cell's own labels; ties prefer smaller
    min_cluster_size, then smaller min_samples."""
    if not grid:
        raise ValidationError("grid must be nonempty")
    ctx = _DensityContext(points)
    values = sorted(set(int(g) for g in grid))
    if any(v < 2 for v in values):
        raise ValidationError("grid values must be >= 2")
    cells = [
        ClusterParams(mcs, ms, allow_single_cluster=allow_single_cluster)
        for mcs in values
        for ms in values
    ]
    scored = []
    best_params, best_score = None, -np.inf
    any_nondegenerate = False
    for params in cells:
        try:
            clustering = ctx.fit(params)
        except DomainError:
            scored.append((params, float("nan")))
            continue
        if clustering.n_clusters >= 2:
            score = _dbcv_from_dist(ctx.dist, ctx.points.shape[1], clustering.labels)
            any_nondegenerate = True
        else:
            score = 0.0
        scored.append((params, score))
        if score > best_score:
            best_params, best_score = params, score
    if best_params is None:
        return GridSearchResult(scored=scored, best=cells[0], degenerate=True)
    return GridSearchResult(
        scored=scored, best=best_params, degenerate=not any_nondegenerate
    )


# ---------------------------------------------------------------------------
# k-means ablation
# ---------------------------------------------------------------------------


def fit_kmeans(points, k: int, seed) -> Clustering:
    """Lloyd iterations from k-means++ seeding; labels 1..k, never noise."""
    pts = _as_points(points)
    n = len(pts)
    if not (1 <= k <= n):
        raise DomainError(f"k={k} must lie in [1, {n}]")
    rng = np.random.default_rng(seed)

    centroids = np.empty((k, pts.shape[1]))
    centroids[0] = pts[int(rng.integers(n))]
    closest = np.sum((pts - centroids[0]) ** 2, axis=1)
    for i in range(1, k):
        total = float(closest.sum())
        if total <= 0.0:
            pick = int(rng.integers(n))
        else:
            pick = int(rng.choice(n, p=closest / total))
        centroids[i] = pts[pick]
        np.minimum(closest, np.sum((pts - centroids[i]) ** 2, axis=1), out=closest)

    assign = np.zeros(n, dtype=np.int64)
    for _ in range(300):
        dists = cdist(pts, centroids)
        assign = np.argmin(dists, axis=1)
        new_centroids = centroids.copy()
        for c in range(k):
            mask = assign == c
            if mask.any():
                new_centroids[c] = pts[mask].mean(axis=0)
            else:  # classic fix: seize the point farthest from its centroid
                far = int(np.argmax(dists[np.arange(n), assign]))
                assign[far] = c
                new_centroids[c] = pts[far]
        shift = float(np.max(np.linalg.norm(new_centroids - centroids, axis=1)))
        centroids = new_centroids
        if shift < 1e-4:
            break
    return Clustering(
        labels=assign + 1,
        n_clusters=k,
        condensed_tree=[],
        stabilities={},
        cluster_nodes={},
    )
