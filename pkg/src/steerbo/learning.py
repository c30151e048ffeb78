"""Circuit structure learning from trial data.

Recursively partitions the data matrix: column groups that pass a
randomized-dependence independence test become product children, otherwise
rows are clustered (k-means) into sum children weighted by cluster size.
Leaves are maximum-likelihood fits with smoothing/variance floors so the
learned circuit keeps full support.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve
from scipy.stats import rankdata
from sklearn.cluster import KMeans

from .circuit import (CategoricalLeaf, Circuit, CircuitBuilder, GaussianLeaf,
                      LeafNode, ProductNode, VarMeta)

RIDGE = 1e-6


@dataclass(frozen=True)
class LearnParams:
    """Knobs of the structure learner; defaults follow the method's setup."""

    rdc_threshold: float = 0.3
    rdc_features: int = 20
    rdc_scale: float = 1.0 / 6.0
    kmeans_k: int = 2
    kmeans_restarts: int = 10
    kmeans_max_iter: int = 100
    max_depth: int = 20
    sigma_floor: float = 1e-3
    cat_smoothing: float = 0.05
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0 < self.rdc_threshold < 1:
            raise ValueError("rdc_threshold must be in (0, 1)")
        if self.rdc_features < 1:
            raise ValueError("rdc_features must be >= 1")
        if self.kmeans_k < 2:
            raise ValueError("kmeans_k must be >= 2")


@dataclass(frozen=True)
class ScoreTransform:
    """Standardization applied to the score column before learning."""

    mu: float
    sigma: float

    def encode(self, score: float) -> float:
        return (score - self.mu) / self.sigma

    def decode(self, z: float) -> float:
        return z * self.sigma + self.mu


@dataclass
class DataMatrix:
    """Numerically encoded trials: one column per modeled variable."""

    values: np.ndarray  # (n_rows, n_cols)
    columns: list[str]
    metas: dict[str, VarMeta]
    score_var: str | None = None

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("data matrix must be 2-D")
        if self.values.shape[0] < 1:
            raise ValueError("data matrix needs at least one row")
        if self.values.shape[1] != len(self.columns):
            raise ValueError("column count does not match column names")
        if list(self.metas) != self.columns:
            raise ValueError("column metadata order must match column order")
        if np.isnan(self.values).any():
            raise ValueError("data matrix must not contain missing entries")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]


def build_trial_matrix(configs: list[dict], scores: list[float],
                       codec) -> tuple[DataMatrix, ScoreTransform]:
    """Encode (configuration, score) pairs into a DataMatrix.

    Hyperparameters go through the codec's modeled scale; the score column
    is z-standardized and the transform returned for the conditioning
    boundary.
    """
    if len(configs) != len(scores) or not configs:
        raise ValueError("need equally many configurations and scores, at least one")
    raw_scores = np.asarray(scores, dtype=float)
    sigma = float(raw_scores.std())
    if sigma < 1e-12:
        sigma = 1.0
    transform = ScoreTransform(mu=float(raw_scores.mean()), sigma=sigma)

    names = codec.variable_names + [codec.score_column.name]
    rows = np.empty((len(configs), len(names)))
    for r, config in enumerate(configs):
        for c, name in enumerate(codec.variable_names):
            rows[r, c] = codec.encode_value(name, config[name])
        rows[r, -1] = transform.encode(raw_scores[r])

    metas = {}
    for col in codec.columns:
        if col.kind == "categorical":
            metas[col.name] = VarMeta(kind="categorical", n_values=col.n_values)
        else:
            metas[col.name] = VarMeta(kind="continuous")
    metas[codec.score_column.name] = VarMeta(kind="continuous")
    matrix = DataMatrix(values=rows, columns=names, metas=metas,
                        score_var=codec.score_column.name)
    return matrix, transform


# ---------------------------------------------------------------------------
# Randomized dependence coefficient


def rdc(x: np.ndarray, y: np.ndarray, params: LearnParams,
        rng: np.random.Generator) -> float:
    """Randomized dependence coefficient of two columns, in [0, 1].

    Copula (rank) transform each column, append a constant coordinate,
    push both through one shared random sine feature map, and return the
    top canonical correlation of the two feature blocks.  Zero-variance
    columns are independent by convention.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(x)
    if n != len(y) or n < 3:
        raise ValueError("rdc needs two equal-length columns with n >= 3")
    if x.std() == 0.0 or y.std() == 0.0:
        return 0.0
    # canonical argument order makes rdc(x, y) == rdc(y, x) bit-exactly
    if y.tobytes() < x.tobytes():
        x, y = y, x

    def features(col: np.ndarray) -> np.ndarray:
        copula = np.column_stack([rankdata(col) / n, np.ones(n)])
        return np.sin(copula @ projection)

    dim = 2
    projection = rng.normal(0.0, params.rdc_scale * math.sqrt(dim),
                            size=(dim, params.rdc_features))
    fx = features(x)
    fy = features(y)
    fx -= fx.mean(axis=0)
    fy -= fy.mean(axis=0)

    k = params.rdc_features
    cxx = fx.T @ fx / n + RIDGE * np.eye(k)
    cyy = fy.T @ fy / n + RIDGE * np.eye(k)
    cxy = fx.T @ fy / n
    # rho^2 values are the eigenvalues of Cxx^-1 Cxy Cyy^-1 Cyx
    m = solve(cxx, cxy, assume_a="pos") @ solve(cyy, cxy.T, assume_a="pos")
    top = float(np.max(np.linalg.eigvals(m).real))
    return math.sqrt(min(max(top, 0.0), 1.0))


def _pair_rng(params: LearnParams, path: tuple[int, ...], i: int, j: int,
              ) -> np.random.Generator:
    """One shared projection draw per (recursion path, column pair)."""
    lo, hi = (i, j) if i <= j else (j, i)
    entropy = [params.seed & 0xFFFFFFFF, *path, lo, hi]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def split_variables(data: DataMatrix, params: LearnParams,
                    path: tuple[int, ...] = ()) -> list[list[int]]:
    """Partition column indices into dependence-connected components.

    Columns are linked when their pairwise rdc exceeds the threshold; two
    or more components signal a product split.
    """
    d = data.values.shape[1]
    if d < 2:
        raise ValueError("variable splitting needs at least two columns")
    parent = list(range(d))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i in range(d):
        for j in range(i + 1, d):
            if find(i) == find(j):
                continue
            score = rdc(data.values[:, i], data.values[:, j], params,
                        _pair_rng(params, path, i, j))
            if score > params.rdc_threshold:
                parent[find(i)] = find(j)

    groups: dict[int, list[int]] = {}
    for i in range(d):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values())


def split_instances(data: DataMatrix, params: LearnParams,
                    rng: np.random.Generator) -> tuple[list[np.ndarray], list[float]]:
    """Cluster rows with seeded k-means; weights follow cluster sizes.

    Columns are z-scored first.  Degenerate data (all rows identical)
    yields a single cluster and the caller falls back to leaf fitting.
    """
    values = data.values
    n = values.shape[0]
    mu = values.mean(axis=0)
    sd = values.std(axis=0)
    sd[sd == 0.0] = 1.0
    normed = (values - mu) / sd
    if np.all(normed == normed[0]):
        return [np.arange(n)], [1.0]

    km = KMeans(n_clusters=params.kmeans_k, n_init=params.kmeans_restarts,
                max_iter=params.kmeans_max_iter,
                random_state=int(rng.integers(2**32)))
    labels = km.fit_predict(normed)
    clusters = [np.flatnonzero(labels == c) for c in range(params.kmeans_k)]
    clusters = [c for c in clusters if len(c)]
    if len(clusters) < 2:
        return [np.arange(n)], [1.0]
    return clusters, [len(c) / n for c in clusters]


# ---------------------------------------------------------------------------
# Leaf fitting and the recursive learner


def fit_leaf(column: np.ndarray, meta: VarMeta,
             params: LearnParams) -> CategoricalLeaf | GaussianLeaf:
    """Maximum-likelihood leaf with smoothing (categorical) or a variance
    floor (Gaussian) so unseen values keep positive density.

    Categorical smoothing mixes the empirical frequencies with the uniform
    distribution at weight `cat_smoothing`.  A size-independent mixture
    (rather than a fixed pseudo-count) keeps the per-label floor from
    vanishing as trials accumulate, which the optimizer's coverage
    guarantee relies on.
    """
    column = np.asarray(column, dtype=float)
    if len(column) == 0:
        raise ValueError("cannot fit a leaf on an empty column")
    if meta.kind == "categorical":
        counts = np.bincount(np.rint(column).astype(int), minlength=meta.n_values)
        lam = params.cat_smoothing
        probs = (1.0 - lam) * counts / len(column) + lam / meta.n_values
        return CategoricalLeaf(probs=tuple(probs))
    sigma = max(float(column.std()), params.sigma_floor)
    return GaussianLeaf(mu=float(column.mean()), sigma=sigma)


def _eval_arena(nodes: list, root: int, columns: list[str],
                values: np.ndarray) -> np.ndarray:
    """Log-density rows for a (possibly partial) builder arena subtree."""
    col_index = {name: i for i, name in enumerate(columns)}
    reachable: list[int] = []
    stack = [root]
    seen = set()
    while stack:
        i = stack.pop()
        if i in seen:
            continue
        seen.add(i)
        reachable.append(i)
        node = nodes[i]
        if not isinstance(node, LeafNode):
            stack.extend(node.children)
    vals = {}
    for i in sorted(reachable):  # builder appends children before parents
        node = nodes[i]
        if isinstance(node, LeafNode):
            x = values[:, col_index[node.var]]
            if isinstance(node.dist, CategoricalLeaf):
                vals[i] = np.log(np.asarray(node.dist.probs))[np.rint(x).astype(int)]
            else:
                z = (x - node.dist.mu) / node.dist.sigma
                vals[i] = -0.5 * (z * z + math.log(2 * math.pi)) - math.log(node.dist.sigma)
        elif isinstance(node, ProductNode):
            vals[i] = sum(vals[c] for c in node.children)
        else:
            stacked = np.stack([vals[c] for c in node.children])
            stacked += np.log(np.asarray(node.weights))[:, None]
            top = stacked.max(axis=0)
            vals[i] = top + np.log(np.exp(stacked - top).sum(axis=0))
    return vals[root]


def learn(data: DataMatrix, params: LearnParams) -> Circuit:
    """Learn a smooth, decomposable circuit from the data matrix.

    Alternates variable splits (independence components become products)
    and instance splits (clusters become sums).  Sum splits that do not at
    least match the factorized fit of their slice are rejected, so training
    likelihood never falls below the fully factorized baseline.
    """
    n_total = data.n_rows
    min_instances = max(10, math.ceil(0.1 * n_total))
    builder = CircuitBuilder(data.metas, score_var=data.score_var)
    names = data.columns
    metas = data.metas

    def leaf_product(rows: np.ndarray, cols: list[int]) -> int:
        leaves = [builder.leaf(names[c], fit_leaf(data.values[rows, c], metas[names[c]], params))
                  for c in cols]
        return builder.product(leaves)

    def factorized_ll(rows: np.ndarray, cols: list[int]) -> float:
        total = 0.0
        for c in cols:
            leaf = fit_leaf(data.values[rows, c], metas[names[c]], params)
            x = data.values[rows, c]
            if isinstance(leaf, CategoricalLeaf):
                total += float(np.log(np.asarray(leaf.probs))[np.rint(x).astype(int)].sum())
            else:
                z = (x - leaf.mu) / leaf.sigma
                total += float((-0.5 * (z * z + math.log(2 * math.pi))
                                - math.log(leaf.sigma)).sum())
        return total

    def recurse(rows: np.ndarray, cols: list[int], depth: int,
                path: tuple[int, ...]) -> int:
        if len(cols) == 1:
            return builder.leaf(names[cols[0]],
                                fit_leaf(data.values[rows, cols[0]], metas[names[cols[0]]], params))
        if len(rows) < min_instances or depth >= params.max_depth:
            return leaf_product(rows, cols)

        sub = DataMatrix(values=data.values[np.ix_(rows, cols)],
                         columns=[names[c] for c in cols],
                         metas={names[c]: metas[names[c]] for c in cols},
                         score_var=None)
        components = split_variables(sub, params, path)
        if len(components) > 1:
            children = [recurse(rows, [cols[c] for c in comp], depth + 1, path + (k,))
                        for k, comp in enumerate(components)]
            return builder.product(children)

        if len(rows) >= 2 * min_instances:
            cluster_rng = np.random.default_rng(
                np.random.SeedSequence([params.seed & 0xFFFFFFFF, *path, 0xC]))
            clusters, weights = split_instances(sub, params, cluster_rng)
            if len(clusters) > 1:
                children = [recurse(rows[cluster], cols, depth + 1, path + (k,))
                            for k, cluster in enumerate(clusters)]
                sum_id = builder.sum(children, weights)
                mixture_ll = float(_eval_arena(builder.nodes, sum_id, names,
                                               data.values[rows]).sum())
                if mixture_ll + 1e-9 >= factorized_ll(rows, cols):
                    return sum_id
        return leaf_product(rows, cols)

    root = recurse(np.arange(n_total), list(range(len(names))), 0, ())
    return builder.build(root)
