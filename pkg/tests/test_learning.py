"""Structure learning: dependence test, splits, leaf fits, full recursion."""
import math

import numpy as np
import pytest

from steerbo.circuit import CategoricalLeaf, GaussianLeaf, VarMeta
from steerbo.learning import (DataMatrix, LearnParams, ScoreTransform,
                              build_trial_matrix, fit_leaf, learn, rdc,
                              split_instances, split_variables)
from steerbo.space import SearchSpace, HyperparameterDef, SpaceCodec

P = LearnParams()
CONT = VarMeta("continuous")


def continuous_matrix(values, names):
    return DataMatrix(values, names, {n: CONT for n in names})


class TestRdc:
    def test_identity_dependence_is_strong(self):
        x = np.random.default_rng(42).uniform(size=1000)
        assert rdc(x, x.copy(), P, np.random.default_rng(1)) >= 0.95

    def test_independent_columns_fall_below_threshold(self):
        """Null distribution: under 0.3 in at least 95 of 100 seeded repeats."""
        below = 0
        for s in range(100):
            r = np.random.default_rng(1000 + s)
            a, b = r.uniform(size=1000), r.uniform(size=1000)
            below += rdc(a, b, P, np.random.default_rng(s)) < 0.3
        assert below >= 95

    def test_quadratic_dependence_detected(self):
        """y = x^2 has ~zero linear correlation but strong rdc."""
        x = np.random.default_rng(7).uniform(-1, 1, size=1000)
        assert abs(np.corrcoef(x, x**2)[0, 1]) < 0.1
        assert rdc(x, x**2, P, np.random.default_rng(2)) >= 0.8

    def test_zero_variance_column_is_independent_by_convention(self):
        assert rdc(np.ones(100), np.arange(100.0), P, np.random.default_rng(0)) == 0.0

    def test_symmetric_under_shared_projections(self):
        x = np.random.default_rng(3).uniform(size=500)
        y = np.random.default_rng(4).normal(size=500)
        assert rdc(x, y, P, np.random.default_rng(9)) == rdc(
            y, x, P, np.random.default_rng(9))

    def test_short_columns_rejected(self):
        with pytest.raises(ValueError):
            rdc(np.ones(2), np.ones(2), P, np.random.default_rng(0))


class TestSplitVariables:
    def test_three_independent_columns_split_apart(self):
        rng = np.random.default_rng(3)
        data = continuous_matrix(rng.uniform(size=(500, 3)), ["a", "b", "c"])
        assert split_variables(data, P) == [[0], [1], [2]]

    def test_dependent_pair_stays_together(self):
        rng = np.random.default_rng(3)
        base = rng.uniform(size=(500, 3))
        vals = np.column_stack([base[:, 0], 2 * base[:, 0] + 0.3, base[:, 2]])
        data = continuous_matrix(vals, ["a", "b", "c"])
        assert split_variables(data, P) == [[0, 1], [2]]

    def test_single_column_rejected(self):
        data = continuous_matrix(np.ones((10, 1)), ["a"])
        with pytest.raises(ValueError):
            split_variables(data, P)


class TestSplitInstances:
    def test_two_blobs_split_evenly(self):
        blob1 = np.random.default_rng(1).normal(0, 0.3, size=(50, 2))
        blob2 = np.random.default_rng(2).normal(5, 0.3, size=(50, 2))
        data = continuous_matrix(np.vstack([blob1, blob2]), ["a", "b"])
        clusters, weights = split_instances(data, P, np.random.default_rng(0))
        assert len(clusters) == 2
        assert sorted(weights) == pytest.approx([0.5, 0.5], abs=0.05)

    def test_identical_rows_collapse_to_one_cluster(self):
        data = continuous_matrix(np.ones((100, 2)), ["a", "b"])
        clusters, weights = split_instances(data, P, np.random.default_rng(0))
        assert len(clusters) == 1 and weights == [1.0]

    def test_weights_sum_to_one(self):
        rng = np.random.default_rng(5)
        data = continuous_matrix(rng.normal(size=(80, 2)), ["a", "b"])
        _, weights = split_instances(data, P, rng)
        assert sum(weights) == 1.0


class TestFitLeaf:
    def test_categorical_mixture_smoothing(self):
        """Empirical frequencies blend with uniform at the smoothing weight."""
        leaf = fit_leaf(np.array([0, 0, 0, 1.0]), VarMeta("categorical", 2), P)
        lam = P.cat_smoothing
        assert leaf.probs[0] == pytest.approx((1 - lam) * 0.75 + lam / 2)
        assert sum(leaf.probs) == pytest.approx(1.0)

    def test_unseen_label_mass_does_not_vanish_with_data_size(self):
        lam = P.cat_smoothing
        for n in (10, 1000, 100_000):
            leaf = fit_leaf(np.zeros(n), VarMeta("categorical", 3), P)
            assert leaf.probs[2] == pytest.approx(lam / 3)

    def test_constant_column_gets_sigma_floor(self):
        leaf = fit_leaf(np.full(50, 5.0), CONT, P)
        assert leaf.mu == 5.0 and leaf.sigma == P.sigma_floor

    def test_gaussian_mle_consistency(self):
        sample = np.random.default_rng(0).normal(size=10_000)
        leaf = fit_leaf(sample, CONT, P)
        assert leaf.mu == pytest.approx(0.0, abs=0.05)
        assert leaf.sigma == pytest.approx(1.0, abs=0.05)


def factorized_ll(data: DataMatrix, params: LearnParams) -> float:
    total = 0.0
    for i, name in enumerate(data.columns):
        leaf = fit_leaf(data.values[:, i], data.metas[name], params)
        col = data.values[:, i]
        if isinstance(leaf, CategoricalLeaf):
            total += np.log(np.asarray(leaf.probs))[col.astype(int)].sum()
        else:
            z = (col - leaf.mu) / leaf.sigma
            total += (-0.5 * (z * z + math.log(2 * math.pi)) - math.log(leaf.sigma)).sum()
    return float(total)


class TestLearn:
    def test_single_row_gives_leaf_product(self):
        data = continuous_matrix(np.array([[1.0, 2.0]]), ["a", "b"])
        circuit = learn(data, P)
        assert circuit.log_density({}) == pytest.approx(0.0, abs=1e-9)
        assert all(not hasattr(n, "weights") for n in circuit.nodes)

    def test_independent_data_close_to_factorized(self):
        rng = np.random.default_rng(11)
        data = continuous_matrix(rng.normal(size=(500, 2)), ["a", "b"])
        circuit = learn(data, P)
        ll = circuit.log_density_batch(
            {"a": data.values[:, 0], "b": data.values[:, 1]}).sum()
        base = factorized_ll(data, P)
        assert ll >= base - 1e-6 * 500
        assert abs(ll - base) <= 0.02 * abs(base)

    def test_xor_like_clusters_found(self):
        """Perfectly correlated labels: on-diagonal states dominate."""
        codes = np.array([[0, 0]] * 100 + [[1, 1]] * 100, dtype=float)
        data = DataMatrix(codes, ["X1", "X2"],
                          {"X1": VarMeta("categorical", 2), "X2": VarMeta("categorical", 2)})
        circuit = learn(data, P)
        on = math.exp(circuit.log_density({"X1": 0.0, "X2": 0.0}))
        off = math.exp(circuit.log_density({"X1": 0.0, "X2": 1.0}))
        assert on / off >= 10.0

    def test_likelihood_never_below_factorized_baseline(self):
        for seed in range(10):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(20, 300))
            cols = {
                "c": rng.integers(0, 3, size=n).astype(float),
                "x": rng.normal(size=n) + (rng.random() > 0.5) * rng.integers(0, 3, size=n),
                "y": rng.uniform(size=n),
            }
            values = np.column_stack([cols["c"], cols["x"], cols["y"]])
            data = DataMatrix(values, ["c", "x", "y"],
                              {"c": VarMeta("categorical", 3), "x": CONT, "y": CONT})
            circuit = learn(data, P)
            ll = circuit.log_density_batch(cols).sum()
            assert ll >= factorized_ll(data, P) - 1e-6 * n

    def test_structural_validity_and_mass(self):
        for seed in range(5):
            rng = np.random.default_rng(100 + seed)
            values = np.column_stack([
                rng.integers(0, 4, size=120).astype(float),
                rng.normal(size=120),
            ])
            data = DataMatrix(values, ["c", "x"],
                              {"c": VarMeta("categorical", 4), "x": CONT})
            circuit = learn(data, P)  # construction validates structure
            assert circuit.log_density({}) == pytest.approx(0.0, abs=1e-9)

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(8)
        values = rng.normal(size=(200, 3))
        data = continuous_matrix(values, ["a", "b", "c"])
        c1 = learn(data, LearnParams(seed=5))
        c2 = learn(data, LearnParams(seed=5))
        assert c1.to_json() == c2.to_json()

    def test_empty_data_rejected(self):
        with pytest.raises(ValueError):
            DataMatrix(np.empty((0, 1)), ["a"], {"a": CONT})


class TestBuildTrialMatrix:
    def test_score_standardized_and_encodings_applied(self):
        space = SearchSpace(hyperparameters=(
            HyperparameterDef(name="c", kind="cat", labels=("u", "v")),
            HyperparameterDef(name="lr", kind="float", lo=1e-3, hi=1.0, log=True),
        ))
        codec = SpaceCodec(space)
        configs = [{"c": "u", "lr": 0.01}, {"c": "v", "lr": 0.1}, {"c": "u", "lr": 1.0}]
        scores = [1.0, 2.0, 3.0]
        matrix, transform = build_trial_matrix(configs, scores, codec)
        assert matrix.columns == ["c", "lr", "score"]
        assert matrix.values[:, 2].mean() == pytest.approx(0.0)
        assert matrix.values[:, 2].std() == pytest.approx(1.0)
        assert matrix.values[1, 1] == pytest.approx(math.log(0.1))
        assert transform.decode(transform.encode(2.5)) == pytest.approx(2.5)

    def test_constant_scores_do_not_break_standardization(self):
        space = SearchSpace(hyperparameters=(
            HyperparameterDef(name="x", kind="float", lo=0.0, hi=1.0),))
        codec = SpaceCodec(space)
        matrix, transform = build_trial_matrix(
            [{"x": 0.2}, {"x": 0.4}], [1.0, 1.0], codec)
        assert transform.sigma == 1.0
        assert np.all(matrix.values[:, 1] == 0.0)
