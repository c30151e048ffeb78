"""Shared test fixtures: random circuits and enumeration oracles."""
from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.stats import chisquare

from steerbo.circuit import (CategoricalLeaf, Circuit, CircuitBuilder,
                             GaussianLeaf, VarMeta)


def random_discrete_circuit(seed: int, n_vars: int = 3,
                            max_labels: int = 4) -> tuple[Circuit, dict[str, int]]:
    """A random smooth, decomposable circuit over small categorical variables."""
    rng = np.random.default_rng(seed)
    labels = {f"V{i}": int(rng.integers(2, max_labels + 1)) for i in range(n_vars)}
    schema = {v: VarMeta("categorical", k) for v, k in labels.items()}
    b = CircuitBuilder(schema)

    def build(vars_: list[str], depth: int) -> int:
        if len(vars_) == 1 or depth > 3:
            leaves = [b.leaf(v, CategoricalLeaf(tuple(rng.dirichlet(np.ones(labels[v]) * 2.0))))
                      for v in vars_]
            return b.product(leaves) if len(leaves) > 1 else leaves[0]
        if rng.random() < 0.45 and len(vars_) >= 2:
            k = int(rng.integers(1, len(vars_)))
            picked = list(rng.permutation(vars_))
            return b.product([build(sorted(picked[:k]), depth + 1),
                              build(sorted(picked[k:]), depth + 1)])
        n_children = int(rng.integers(2, 4))
        children = [build(vars_, depth + 1) for _ in range(n_children)]
        weights = rng.dirichlet(np.ones(n_children) * 3.0)
        return b.sum(children, list(weights))

    root = build(sorted(labels), 0)
    return b.build(root), labels


def enumerate_joint(circuit: Circuit, labels: dict[str, int]) -> dict[tuple, float]:
    """Exact joint mass of a fully discrete circuit by enumeration."""
    vars_ = sorted(labels)
    joint = {}
    for combo in itertools.product(*[range(labels[v]) for v in vars_]):
        evidence = {v: float(x) for v, x in zip(vars_, combo)}
        joint[combo] = math.exp(circuit.log_density(evidence))
    return joint


def chi2_against(counts: dict[tuple, int], expected_probs: dict[tuple, float],
                 n: int) -> float:
    """Goodness-of-fit p-value; bins below expectation 5 are pooled."""
    keys = sorted(expected_probs)
    obs = np.array([counts.get(k, 0) for k in keys], dtype=float)
    exp = np.array([expected_probs[k] * n for k in keys])
    big = exp >= 5
    if (~big).any():
        obs = np.append(obs[big], obs[~big].sum())
        exp = np.append(exp[big], exp[~big].sum())
    exp *= obs.sum() / exp.sum()
    return float(chisquare(obs, exp).pvalue)


def two_component_circuit() -> Circuit:
    """0.7 (X1=a) N(F;0,1) + 0.3 (X1=b) N(F;2,1) with near-delta labels."""
    schema = {"X1": VarMeta("categorical", 2), "F": VarMeta("continuous")}
    b = CircuitBuilder(schema, score_var="F")
    p1 = b.product([b.leaf("X1", CategoricalLeaf((1 - 1e-9, 1e-9))),
                    b.leaf("F", GaussianLeaf(0.0, 1.0))])
    p2 = b.product([b.leaf("X1", CategoricalLeaf((1e-9, 1 - 1e-9))),
                    b.leaf("F", GaussianLeaf(2.0, 1.0))])
    return b.build(b.sum([p1, p2], [0.7, 0.3]))


def normal_pdf(x: float, mu: float = 0.0, sigma: float = 1.0) -> float:
    z = (x - mu) / sigma
    return math.exp(-0.5 * z * z) / (sigma * math.sqrt(2 * math.pi))
