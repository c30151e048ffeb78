"""Probabilistic circuits over hybrid variables, with exact inference.

A circuit is a rooted DAG of sum, product, and leaf nodes.  Sum children
share a variable scope (smoothness) and product children have disjoint
scopes (decomposability), which makes density evaluation, marginalization,
conditioning, and conditional sampling exact and linear in circuit size.
All densities are computed and returned in log space.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np
from scipy.special import logsumexp

FORMAT_VERSION = 1

# Conditioning renormalizes sum weights; components whose posterior mass
# underflows are floored here so every weight stays strictly positive.
MIN_WEIGHT = 1e-300

LOG_TWO_PI = math.log(2.0 * math.pi)


class CircuitError(ValueError):
    """Raised when a circuit violates its structural invariants."""


@dataclass(frozen=True)
class VarMeta:
    """Leaf semantics of one variable: categorical code count or real line."""

    kind: str  # "categorical" | "continuous"
    n_values: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("categorical", "continuous"):
            raise CircuitError(f"unknown variable kind {self.kind!r}")
        if self.kind == "categorical" and self.n_values < 1:
            raise CircuitError("categorical variable needs n_values >= 1")


@dataclass(frozen=True)
class CategoricalLeaf:
    """Discrete leaf over codes 0..k-1 with strictly positive masses."""

    probs: tuple[float, ...]

    def log_prob(self, code: float) -> float:
        return math.log(self.probs[int(round(code))])

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.choice(len(self.probs), size=n, p=np.asarray(self.probs)).astype(float)


@dataclass(frozen=True)
class GaussianLeaf:
    """Univariate Gaussian leaf; sigma is kept at or above a floor upstream."""

    mu: float
    sigma: float

    def log_prob(self, x: float) -> float:
        z = (x - self.mu) / self.sigma
        return -0.5 * (z * z + LOG_TWO_PI) - math.log(self.sigma)

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.normal(self.mu, self.sigma, size=n)


@dataclass(frozen=True)
class LeafNode:
    var: str
    dist: CategoricalLeaf | GaussianLeaf


@dataclass(frozen=True)
class SumNode:
    children: tuple[int, ...]
    weights: tuple[float, ...]


@dataclass(frozen=True)
class ProductNode:
    children: tuple[int, ...]


Node = LeafNode | SumNode | ProductNode


class Circuit:
    """An immutable smooth, decomposable probabilistic circuit.

    `nodes` is an arena indexed by id, `root` the root id, `schema` maps
    each variable to its :class:`VarMeta`.  `score_var` names the variable
    holding the modeled objective score, when present.
    """

    def __init__(self, nodes: list[Node], root: int, schema: Mapping[str, VarMeta],
                 score_var: str | None = None):
        self.nodes = list(nodes)
        self.root = root
        self.schema = dict(schema)
        self.score_var = score_var
        self._order = self._toposort()
        self._scopes = self._compute_scopes()
        self._validate()

    # -- structure ---------------------------------------------------------

    @property
    def variables(self) -> list[str]:
        return sorted(self._scopes[self.root])

    def scope(self, node_id: int) -> frozenset[str]:
        return self._scopes[node_id]

    def _toposort(self) -> list[int]:
        """Children-first order over nodes reachable from the root."""
        order: list[int] = []
        state: dict[int, int] = {}  # 1 = on stack, 2 = done
        stack: list[tuple[int, bool]] = [(self.root, False)]
        while stack:
            node_id, expanded = stack.pop()
            if not (0 <= node_id < len(self.nodes)):
                raise CircuitError(f"node id {node_id} out of range")
            if expanded:
                state[node_id] = 2
                order.append(node_id)
                continue
            if state.get(node_id) == 2:
                continue
            if state.get(node_id) == 1:
                raise CircuitError("circuit graph contains a cycle")
            state[node_id] = 1
            stack.append((node_id, True))
            node = self.nodes[node_id]
            if not isinstance(node, LeafNode):
                for child in node.children:
                    if state.get(child) != 2:
                        stack.append((child, False))
        return order

    def _compute_scopes(self) -> dict[int, frozenset[str]]:
        scopes: dict[int, frozenset[str]] = {}
        for i in self._order:
            node = self.nodes[i]
            if isinstance(node, LeafNode):
                scopes[i] = frozenset((node.var,))
            else:
                scopes[i] = frozenset().union(*(scopes[c] for c in node.children))
        return scopes

    def _validate(self) -> None:
        for i in self._order:
            node = self.nodes[i]
            if isinstance(node, LeafNode):
                if node.var not in self.schema:
                    raise CircuitError(f"leaf over unknown variable {node.var!r}")
                meta = self.schema[node.var]
                if isinstance(node.dist, CategoricalLeaf):
                    if meta.kind != "categorical" or len(node.dist.probs) != meta.n_values:
                        raise CircuitError(f"leaf for {node.var!r} does not match its schema")
                    if any(p <= 0 for p in node.dist.probs):
                        raise CircuitError(f"leaf for {node.var!r} has a non-positive mass")
                    if abs(sum(node.dist.probs) - 1.0) > 1e-6:
                        raise CircuitError(f"leaf for {node.var!r} masses do not sum to 1")
                else:
                    if meta.kind != "continuous":
                        raise CircuitError(f"leaf for {node.var!r} does not match its schema")
                    if node.dist.sigma <= 0:
                        raise CircuitError(f"leaf for {node.var!r} has sigma <= 0")
            elif isinstance(node, SumNode):
                if not node.children:
                    raise CircuitError("sum node without children")
                if len(node.children) != len(node.weights):
                    raise CircuitError("sum node children/weights length mismatch")
                if any(w <= 0 for w in node.weights):
                    raise CircuitError("sum weights must be strictly positive")
                if abs(sum(node.weights) - 1.0) > 1e-6:
                    raise CircuitError("sum weights must sum to 1")
                scopes = [self._scopes[c] for c in node.children]
                if any(s != scopes[0] for s in scopes[1:]):
                    raise CircuitError("sum node children differ in scope (smoothness)")
            else:
                if not node.children:
                    raise CircuitError("product node without children")
                sizes = sum(len(self._scopes[c]) for c in node.children)
                union = frozenset().union(*(self._scopes[c] for c in node.children))
                if sizes != len(union):
                    raise CircuitError("product node children share scope (decomposability)")

    # -- inference ---------------------------------------------------------

    def _check_evidence(self, evidence: Mapping[str, float]) -> None:
        for var, value in evidence.items():
            if var not in self.schema:
                raise CircuitError(f"evidence over unknown variable {var!r}")
            meta = self.schema[var]
            if meta.kind == "categorical" and not 0 <= int(round(value)) < meta.n_values:
                raise CircuitError(f"evidence code {value} out of range for {var!r}")

    def _log_values(self, evidence: Mapping[str, float]) -> np.ndarray:
        """Bottom-up node values; free leaves count as marginalized (log 1)."""
        vals = np.zeros(len(self.nodes))
        for i in self._order:
            node = self.nodes[i]
            if isinstance(node, LeafNode):
                vals[i] = node.dist.log_prob(evidence[node.var]) if node.var in evidence else 0.0
            elif isinstance(node, ProductNode):
                vals[i] = sum(vals[c] for c in node.children)
            else:
                child_vals = np.array([vals[c] for c in node.children])
                vals[i] = logsumexp(child_vals + np.log(node.weights))
        return vals

    def log_density(self, evidence: Mapping[str, float]) -> float:
        """Log of the (marginal) density/mass at the evidence.

        Variables absent from the evidence are marginalized out.
        """
        self._check_evidence(evidence)
        return float(self._log_values(evidence)[self.root])

    def log_density_batch(self, columns: Mapping[str, np.ndarray]) -> np.ndarray:
        """Vectorized `log_density` for many full or partial assignments."""
        n = len(next(iter(columns.values())))
        vals = np.zeros((len(self.nodes), n))
        for i in self._order:
            node = self.nodes[i]
            if isinstance(node, LeafNode):
                if node.var in columns:
                    x = np.asarray(columns[node.var], dtype=float)
                    if isinstance(node.dist, CategoricalLeaf):
                        vals[i] = np.log(np.asarray(node.dist.probs))[
                            np.rint(x).astype(int)]
                    else:
                        z = (x - node.dist.mu) / node.dist.sigma
                        vals[i] = -0.5 * (z * z + LOG_TWO_PI) - math.log(node.dist.sigma)
            elif isinstance(node, ProductNode):
                vals[i] = vals[list(node.children)].sum(axis=0)
            else:
                stacked = vals[list(node.children)] + np.log(node.weights)[:, None]
                vals[i] = logsumexp(stacked, axis=0)
        return vals[self.root]

    # -- sampling ----------------------------------------------------------

    def sample_n(self, evidence: Mapping[str, float], n: int,
                 rng: np.random.Generator) -> dict[str, np.ndarray]:
        """Draw n samples from the distribution conditioned on the evidence.

        Bottom-up evidence values weight each sum node's child choice
        (probability proportional to weight times child value); evidence
        variables are emitted verbatim.  Returns one array per variable.
        """
        self._check_evidence(evidence)
        vals = self._log_values(evidence)
        out = {var: np.empty(n) for var in self.variables}
        for var, value in evidence.items():
            if var in out:
                out[var].fill(value)

        def descend(node_id: int, idx: np.ndarray) -> None:
            node = self.nodes[node_id]
            if isinstance(node, LeafNode):
                if node.var not in evidence:
                    out[node.var][idx] = node.dist.draw(len(idx), rng)
            elif isinstance(node, ProductNode):
                for c in node.children:
                    descend(c, idx)
            else:
                logits = np.array([vals[c] for c in node.children]) + np.log(node.weights)
                total = logsumexp(logits)
                if not np.isfinite(total):
                    raise AssertionError(
                        "all children of a sum node have zero mass under the evidence; "
                        "positivity is violated")
                probs = np.exp(logits - total)
                probs /= probs.sum()
                picks = rng.choice(len(node.children), size=len(idx), p=probs)
                for j, c in enumerate(node.children):
                    sub = idx[picks == j]
                    if len(sub):
                        descend(c, sub)

        descend(self.root, np.arange(n))
        return out

    def sample(self, evidence: Mapping[str, float],
               rng: np.random.Generator) -> dict[str, float]:
        """One conditional sample as a variable -> value assignment."""
        cols = self.sample_n(evidence, 1, rng)
        return {var: float(arr[0]) for var, arr in cols.items()}

    # -- structure transforms -----------------------------------------------

    def marginal(self, keep: set[str]) -> "Circuit":
        """A circuit over `keep` whose density is the marginal of this one."""
        keep_set = frozenset(keep)
        if not keep_set:
            raise CircuitError("marginal requires a non-empty variable set")
        unknown = keep_set - set(self.schema)
        if unknown:
            raise CircuitError(f"marginal over unknown variable(s): {sorted(unknown)}")
        return self._rebuild(drop=frozenset(self.schema) - keep_set, reweight=None)

    def condition_on(self, assignments: Mapping[str, float]) -> "Circuit":
        """A circuit over the remaining variables given exact assignments.

        Leaf values at the assignments are absorbed multiplicatively into
        ancestor sum weights (then renormalized per node); the assigned
        variables leave the schema.
        """
        self._check_evidence(assignments)
        if not assignments:
            return self
        drop = frozenset(assignments)
        if drop >= self._scopes[self.root]:
            raise CircuitError("conditioning on every variable leaves an empty circuit")
        vals = self._log_values(assignments)
        return self._rebuild(drop=drop, reweight=vals)

    def condition_on_score(self, score_value: float) -> "Circuit":
        """Condition on the score variable taking the given (modeled) value."""
        if self.score_var is None or self.score_var not in self.schema:
            raise CircuitError("circuit has no score variable to condition on")
        return self.condition_on({self.score_var: score_value})

    def _rebuild(self, drop: frozenset[str], reweight: np.ndarray | None) -> "Circuit":
        """Copy the circuit without `drop` variables.

        With `reweight` (bottom-up values under an assignment of `drop`),
        sum weights absorb their children's values, which turns the result
        into the exact conditional; without it the result is the marginal.
        """
        nodes: list[Node] = []
        memo: dict[int, int | None] = {}

        def add(node: Node) -> int:
            nodes.append(node)
            return len(nodes) - 1

        def rebuild(i: int) -> int | None:
            if i in memo:
                return memo[i]
            node = self.nodes[i]
            new_id: int | None
            if isinstance(node, LeafNode):
                new_id = None if node.var in drop else add(node)
            elif isinstance(node, ProductNode):
                kids = [k for k in (rebuild(c) for c in node.children) if k is not None]
                if not kids:
                    new_id = None
                elif len(kids) == 1:
                    new_id = kids[0]
                else:
                    new_id = add(ProductNode(children=tuple(kids)))
            else:
                kids = [rebuild(c) for c in node.children]
                if all(k is None for k in kids):
                    new_id = None
                elif any(k is None for k in kids):
                    raise CircuitError("sum node children differ in scope (smoothness)")
                else:
                    if reweight is not None and drop & self._scopes[i]:
                        logits = (np.array([reweight[c] for c in node.children])
                                  + np.log(node.weights))
                        weights = np.exp(logits - logsumexp(logits))
                        weights = np.maximum(weights, MIN_WEIGHT)
                        weights /= weights.sum()
                    else:
                        weights = np.asarray(node.weights)
                    new_id = add(SumNode(children=tuple(kids), weights=tuple(weights)))
            memo[i] = new_id
            return new_id

        new_root = rebuild(self.root)
        if new_root is None:
            raise CircuitError("rebuild dropped the whole circuit")
        schema = {v: m for v, m in self.schema.items() if v not in drop}
        score = self.score_var if self.score_var in schema else None
        return Circuit(nodes, new_root, schema, score_var=score)

    # -- serialization -------------------------------------------------------

    def to_json(self) -> str:
        def node_obj(node: Node) -> dict[str, Any]:
            if isinstance(node, LeafNode):
                if isinstance(node.dist, CategoricalLeaf):
                    dist = {"kind": "categorical", "probs": list(node.dist.probs)}
                else:
                    dist = {"kind": "gaussian", "mu": node.dist.mu, "sigma": node.dist.sigma}
                return {"kind": "leaf", "var": node.var, "dist": dist}
            if isinstance(node, SumNode):
                return {"kind": "sum", "children": list(node.children),
                        "weights": list(node.weights)}
            return {"kind": "product", "children": list(node.children)}

        schema = {
            var: ({"kind": meta.kind, "n_values": meta.n_values}
                  if meta.kind == "categorical" else {"kind": meta.kind})
            for var, meta in self.schema.items()
        }
        return json.dumps({
            "format_version": FORMAT_VERSION,
            "root": self.root,
            "score_var": self.score_var,
            "schema": schema,
            "nodes": [node_obj(n) for n in self.nodes],
        }, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "Circuit":
        doc = json.loads(text)
        version = doc.get("format_version")
        if version != FORMAT_VERSION:
            raise CircuitError(f"unsupported circuit format version {version!r}")
        schema = {}
        for var, meta in doc["schema"].items():
            schema[var] = VarMeta(kind=meta["kind"], n_values=meta.get("n_values", 0))
        nodes: list[Node] = []
        for obj in doc["nodes"]:
            kind = obj["kind"]
            if kind == "leaf":
                dist_obj = obj["dist"]
                if dist_obj["kind"] == "categorical":
                    dist: CategoricalLeaf | GaussianLeaf = CategoricalLeaf(
                        probs=tuple(dist_obj["probs"]))
                else:
                    dist = GaussianLeaf(mu=dist_obj["mu"], sigma=dist_obj["sigma"])
                nodes.append(LeafNode(var=obj["var"], dist=dist))
            elif kind == "sum":
                nodes.append(SumNode(children=tuple(obj["children"]),
                                     weights=tuple(obj["weights"])))
            elif kind == "product":
                nodes.append(ProductNode(children=tuple(obj["children"])))
            else:
                raise CircuitError(f"unknown node kind {kind!r}")
        return cls(nodes, doc["root"], schema, score_var=doc.get("score_var"))


class CircuitBuilder:
    """Append-only arena used while constructing a circuit bottom-up."""

    def __init__(self, schema: Mapping[str, VarMeta], score_var: str | None = None):
        self.schema = dict(schema)
        self.score_var = score_var
        self.nodes: list[Node] = []

    def leaf(self, var: str, dist: CategoricalLeaf | GaussianLeaf) -> int:
        self.nodes.append(LeafNode(var=var, dist=dist))
        return len(self.nodes) - 1

    def product(self, children: list[int]) -> int:
        if len(children) == 1:
            return children[0]
        self.nodes.append(ProductNode(children=tuple(children)))
        return len(self.nodes) - 1

    def sum(self, children: list[int], weights: list[float]) -> int:
        if len(children) == 1:
            return children[0]
        total = float(sum(weights))
        self.nodes.append(SumNode(children=tuple(children),
                                  weights=tuple(w / total for w in weights)))
        return len(self.nodes) - 1

    def build(self, root: int) -> Circuit:
        return Circuit(self.nodes, root, self.schema, score_var=self.score_var)
