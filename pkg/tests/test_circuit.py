"""Circuit structure, exact inference, conditioning, and sampling."""
import math

import numpy as np
import pytest

from helpers import (chi2_against, enumerate_joint, normal_pdf,
                     random_discrete_circuit, two_component_circuit)
from steerbo.circuit import (CategoricalLeaf, Circuit, CircuitBuilder, CircuitError,
                             GaussianLeaf, LeafNode, ProductNode, SumNode, VarMeta)


def delta_circuit():
    """0.5 (X1=a)(X2=a) + 0.5 (X1=b)(X2=b) with near-degenerate labels."""
    schema = {"X1": VarMeta("categorical", 2), "X2": VarMeta("categorical", 2)}
    b = CircuitBuilder(schema)
    eps = 1e-12
    p1 = b.product([b.leaf("X1", CategoricalLeaf((1 - eps, eps))),
                    b.leaf("X2", CategoricalLeaf((1 - eps, eps)))])
    p2 = b.product([b.leaf("X1", CategoricalLeaf((eps, 1 - eps))),
                    b.leaf("X2", CategoricalLeaf((eps, 1 - eps)))])
    return b.build(b.sum([p1, p2], [0.5, 0.5]))


class TestStructuralValidation:
    def test_sum_children_must_share_scope(self):
        schema = {"A": VarMeta("categorical", 2), "B": VarMeta("categorical", 2)}
        nodes = [LeafNode("A", CategoricalLeaf((0.5, 0.5))),
                 LeafNode("B", CategoricalLeaf((0.5, 0.5))),
                 SumNode(children=(0, 1), weights=(0.5, 0.5))]
        with pytest.raises(CircuitError, match="smoothness"):
            Circuit(nodes, 2, schema)

    def test_product_children_must_be_disjoint(self):
        schema = {"A": VarMeta("categorical", 2)}
        nodes = [LeafNode("A", CategoricalLeaf((0.5, 0.5))),
                 LeafNode("A", CategoricalLeaf((0.9, 0.1))),
                 ProductNode(children=(0, 1))]
        with pytest.raises(CircuitError, match="decomposability"):
            Circuit(nodes, 2, schema)

    def test_weights_must_be_positive_and_normalized(self):
        schema = {"A": VarMeta("categorical", 2)}
        leaves = [LeafNode("A", CategoricalLeaf((0.5, 0.5))),
                  LeafNode("A", CategoricalLeaf((0.9, 0.1)))]
        with pytest.raises(CircuitError, match="sum to 1"):
            Circuit(leaves + [SumNode(children=(0, 1), weights=(0.5, 0.2))], 2, schema)
        with pytest.raises(CircuitError, match="positive"):
            Circuit(leaves + [SumNode(children=(0, 1), weights=(1.0, 0.0))], 2, schema)

    def test_cycle_detected(self):
        schema = {"A": VarMeta("categorical", 2)}
        nodes = [SumNode(children=(1,), weights=(1.0,)),
                 SumNode(children=(0,), weights=(1.0,))]
        with pytest.raises(CircuitError, match="cycle"):
            Circuit(nodes, 0, schema)

    def test_gaussian_sigma_must_be_positive(self):
        schema = {"F": VarMeta("continuous")}
        with pytest.raises(CircuitError, match="sigma"):
            Circuit([LeafNode("F", GaussianLeaf(0.0, 0.0))], 0, schema)


class TestLogDensity:
    def test_mixture_arithmetic(self):
        c = delta_circuit()
        assert math.exp(c.log_density({"X1": 0.0, "X2": 0.0})) == pytest.approx(0.5)

    def test_marginalization_sets_free_leaves_to_one(self):
        c = delta_circuit()
        assert math.exp(c.log_density({"X1": 0.0})) == pytest.approx(0.5)

    def test_standard_normal_density_at_zero(self):
        schema = {"F": VarMeta("continuous")}
        b = CircuitBuilder(schema)
        c = b.build(b.leaf("F", GaussianLeaf(0.0, 1.0)))
        assert math.exp(c.log_density({"F": 0.0})) == pytest.approx(0.39894, abs=1e-5)

    def test_total_mass_is_one(self):
        for seed in range(5):
            c, _ = random_discrete_circuit(seed)
            assert c.log_density({}) == pytest.approx(0.0, abs=1e-9)

    def test_batch_matches_scalar(self):
        c, labels = random_discrete_circuit(3)
        rng = np.random.default_rng(0)
        cols = {v: rng.integers(0, k, size=50).astype(float) for v, k in labels.items()}
        batch = c.log_density_batch(cols)
        for i in range(50):
            single = c.log_density({v: cols[v][i] for v in labels})
            assert batch[i] == pytest.approx(single, abs=1e-12)

    def test_unknown_evidence_variable_rejected(self):
        c = delta_circuit()
        with pytest.raises(CircuitError, match="unknown variable"):
            c.log_density({"nope": 0.0})


class TestMarginal:
    def test_identity_marginal_keeps_densities(self):
        c, labels = random_discrete_circuit(1)
        m = c.marginal(set(labels))
        rng = np.random.default_rng(0)
        for _ in range(100):
            point = {v: float(rng.integers(k)) for v, k in labels.items()}
            assert m.log_density(point) == pytest.approx(c.log_density(point), abs=1e-12)

    def test_two_variable_mixture_marginal(self):
        m = delta_circuit().marginal({"X1"})
        assert math.exp(m.log_density({"X1": 0.0})) == pytest.approx(0.5)

    def test_pairwise_marginals_match_enumeration(self):
        """Any pair marginal equals the exhaustive sum over the dropped variable."""
        for seed in range(5):
            c, labels = random_discrete_circuit(seed, n_vars=3)
            joint = enumerate_joint(c, labels)
            vars_ = sorted(labels)
            keep = vars_[:2]
            m = c.marginal(set(keep))
            for a in range(labels[keep[0]]):
                for b_ in range(labels[keep[1]]):
                    expected = sum(p for combo, p in joint.items()
                                   if combo[0] == a and combo[1] == b_)
                    got = math.exp(m.log_density({keep[0]: float(a), keep[1]: float(b_)}))
                    assert got == pytest.approx(expected, abs=1e-10)

    def test_unknown_variable_rejected(self):
        with pytest.raises(CircuitError, match="unknown"):
            delta_circuit().marginal({"X9"})

    def test_continuous_marginal_matches_quadrature(self):
        """Dropping a Gaussian variable agrees with trapezoid integration."""
        c = two_component_circuit()
        m = c.marginal({"X1"})
        grid = np.linspace(-12.0, 14.0, 10_000)
        for code in (0.0, 1.0):
            joint = np.exp([c.log_density({"X1": code, "F": f}) for f in grid])
            integrated = np.trapezoid(joint, grid)
            exact = math.exp(m.log_density({"X1": code}))
            assert abs(integrated - exact) / exact <= 1e-6


class TestConditionalSampling:
    def test_posterior_collapses_to_one_component(self):
        c = delta_circuit()
        rng = np.random.default_rng(0)
        draws = c.sample_n({"X2": 1.0}, 200, rng)
        assert np.all(draws["X1"] == 1.0)
        assert np.all(draws["X2"] == 1.0)  # evidence emitted verbatim

    def test_two_term_bayes_posterior(self):
        """P(X1=b | F=2) = 0.3 phi(0) / (0.7 phi(2) + 0.3 phi(0)) ~ 0.760."""
        c = two_component_circuit()
        expected = 0.3 * normal_pdf(0.0) / (0.7 * normal_pdf(2.0) + 0.3 * normal_pdf(0.0))
        rng = np.random.default_rng(42)
        draws = c.sample_n({"F": 2.0}, 100_000, rng)
        assert (draws["X1"] == 1.0).mean() == pytest.approx(expected, abs=0.005)

    def test_discrete_conditional_matches_enumeration(self):
        """Chi-squared goodness of fit of 1e5 draws against the exact conditional."""
        from collections import Counter
        c, labels = random_discrete_circuit(5)
        vars_ = sorted(labels)
        joint = enumerate_joint(c, labels)
        evidence_var, evidence_val = vars_[0], 0
        cond = {k: v for k, v in joint.items() if k[0] == evidence_val}
        z = sum(cond.values())
        cond = {k: v / z for k, v in cond.items()}
        rng = np.random.default_rng(99)
        draws = c.sample_n({evidence_var: float(evidence_val)}, 100_000, rng)
        stacked = np.stack([draws[v] for v in vars_], axis=1).astype(int)
        counts = Counter(map(tuple, stacked))
        assert chi2_against(counts, cond, 100_000) > 0.01


class TestConditionOnScore:
    def test_two_component_posterior_weights(self):
        c = two_component_circuit()
        conditioned = c.condition_on_score(2.0)
        (root,) = [n for n in conditioned.nodes if isinstance(n, SumNode)]
        w_b = 0.3 * normal_pdf(0.0) / (0.7 * normal_pdf(2.0) + 0.3 * normal_pdf(0.0))
        assert sorted(root.weights) == pytest.approx(sorted([1 - w_b, w_b]), abs=1e-9)

    def test_score_leaves_dropped_from_schema(self):
        conditioned = two_component_circuit().condition_on_score(2.0)
        assert conditioned.variables == ["X1"]
        assert conditioned.score_var is None

    def test_single_component_weights_unchanged(self):
        schema = {"X": VarMeta("categorical", 2), "F": VarMeta("continuous")}
        b = CircuitBuilder(schema, score_var="F")
        root = b.product([b.leaf("X", CategoricalLeaf((0.6, 0.4))),
                          b.leaf("F", GaussianLeaf(1.5, 0.7))])
        conditioned = b.build(root).condition_on_score(1.5)
        assert math.exp(conditioned.log_density({"X": 0.0})) == pytest.approx(0.6)

    def test_conditioned_circuit_is_normalized(self):
        c = two_component_circuit()
        assert c.condition_on_score(2.0).log_density({}) == pytest.approx(0.0, abs=1e-12)


class TestPositivity:
    """Every weight and leaf mass strictly positive: finite conditionals."""

    def test_conditioned_density_finite_everywhere(self):
        rng = np.random.default_rng(0)
        for seed in range(3):
            c, labels = random_discrete_circuit(seed)
            point = {v: float(rng.integers(k)) for v, k in labels.items()}
            for v, k in labels.items():
                conditioned = c.condition_on({v: point[v]})
                for _ in range(20):
                    rest = {u: float(rng.integers(labels[u]))
                            for u in labels if u != v}
                    assert math.isfinite(conditioned.log_density(rest))


class TestSerialization:
    def test_round_trip_preserves_densities(self):
        c, labels = random_discrete_circuit(7)
        restored = Circuit.from_json(c.to_json())
        rng = np.random.default_rng(1)
        for _ in range(50):
            point = {v: float(rng.integers(k)) for v, k in labels.items()}
            assert restored.log_density(point) == pytest.approx(
                c.log_density(point), abs=1e-15)

    def test_version_checked(self):
        text = two_component_circuit().to_json().replace(
            '"format_version": 1', '"format_version": 99')
        with pytest.raises(CircuitError, match="version"):
            Circuit.from_json(text)
