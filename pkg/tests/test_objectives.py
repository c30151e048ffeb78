"""Built-in objectives, tabular lookup, and the external-command adapter."""
import json
import math

import numpy as np
import pytest

from steerbo.objectives import (BRANIN_OPTIMA, ExternalCommandObjective, Objective,
                                ObjectiveError, TabularObjective, branin,
                                builtin_objective, mixed_synthetic)
from steerbo.space import SearchSpace, HyperparameterDef


class TestBranin:
    def test_known_minimizers(self):
        assert branin({"x1": math.pi, "x2": 2.275}) == pytest.approx(-0.397887, abs=1e-5)
        assert branin({"x1": 9.42478, "x2": 2.475}) == pytest.approx(-0.397887, abs=1e-5)

    def test_origin_value(self):
        assert branin({"x1": 0.0, "x2": 0.0}) == pytest.approx(-55.602113, abs=1e-5)

    def test_all_listed_optima_agree(self):
        values = [branin({"x1": a, "x2": b}) for a, b in BRANIN_OPTIMA]
        assert values == pytest.approx([values[0]] * 3, abs=1e-4)


class TestMixedSynthetic:
    @pytest.mark.parametrize("config,score", [
        ({"C": "a", "K": 3, "x": 0.2}, 1.0),
        ({"C": "c", "K": 0, "x": 0.5}, 0.0),
        ({"C": "b", "K": 7, "x": 0.8}, 0.5),
    ])
    def test_constructed_optima(self, config, score):
        assert mixed_synthetic(config) == pytest.approx(score)

    def test_global_optimum_is_unique(self):
        rng = np.random.default_rng(0)
        best = max(mixed_synthetic({"C": c, "K": k, "x": x})
                   for c in "abc" for k in range(10)
                   for x in rng.uniform(size=50))
        assert best <= 1.0


class TestNoise:
    def test_noise_is_deterministic_given_config_and_seed(self):
        obj = builtin_objective("mixed", noise_sigma=0.1, seed=9)
        config = {"C": "a", "K": 3, "x": 0.2}
        assert obj.evaluate(config) == obj.evaluate(config)
        clean = builtin_objective("mixed")
        assert obj.evaluate(config)[0] != clean.evaluate(config)[0]

    def test_noise_varies_across_configs(self):
        obj = builtin_objective("mixed", noise_sigma=0.1, seed=9)
        a = obj.evaluate({"C": "a", "K": 3, "x": 0.2})[0] - 1.0
        b = obj.evaluate({"C": "a", "K": 3, "x": 0.21})[0] - mixed_synthetic(
            {"C": "a", "K": 3, "x": 0.21})
        assert a != b


class TestTabularObjective:
    SPACE = SearchSpace(hyperparameters=(
        HyperparameterDef(name="k", kind="int", lo=0, hi=1),
        HyperparameterDef(name="x", kind="float", lo=0.0, hi=1.0),
    ))

    def test_rounding_is_idempotent(self):
        tab = TabularObjective(name="t", space=self.SPACE, decimals=3)
        config = {"k": 1, "x": 0.123456789}
        once = tab.round_config(config)
        assert tab.round_config(once) == once

    def test_lookup_after_rounding(self):
        tab = TabularObjective(name="t", space=self.SPACE, decimals=2)
        tab.add({"k": 0, "x": 0.25}, score=3.5, cost=2.0)
        assert tab.evaluate({"k": 0, "x": 0.2500004}) == (3.5, 2.0)

    def test_missing_configuration_raises(self):
        tab = TabularObjective(name="t", space=self.SPACE)
        with pytest.raises(ObjectiveError, match="not in table"):
            tab.evaluate({"k": 0, "x": 0.5})

    def test_from_file(self, tmp_path):
        rows = [{"config": {"k": 0, "x": 0.5}, "score": 1.0, "cost": 4.0},
                {"config": {"k": 1, "x": 0.5}, "score": 2.0}]
        path = tmp_path / "table.jsonl"
        path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        tab = TabularObjective.from_file(str(path), self.SPACE)
        assert tab.evaluate({"k": 1, "x": 0.5}) == (2.0, 1.0)

    def test_bad_row_reports_line(self, tmp_path):
        path = tmp_path / "table.jsonl"
        path.write_text('{"config": {"k": 7, "x": 0.5}, "score": 1.0}\n')
        with pytest.raises(ObjectiveError, match="table.jsonl:1"):
            TabularObjective.from_file(str(path), self.SPACE)


class TestExternalCommand:
    SPACE = SearchSpace(hyperparameters=(
        HyperparameterDef(name="x", kind="float", lo=0.0, hi=1.0),))

    def test_score_parsed_from_final_line(self):
        obj = ExternalCommandObjective(name="e", space=self.SPACE,
                                       template="echo preamble; echo score=0.5")
        score, cost = obj.evaluate({"x": 0.3})
        assert score == 0.5 and cost >= 0.0

    def test_template_substitution(self):
        obj = ExternalCommandObjective(name="e", space=self.SPACE,
                                       template="echo score={x}")
        assert obj.evaluate({"x": 0.25})[0] == 0.25

    def test_nonzero_exit_fails(self):
        obj = ExternalCommandObjective(name="e", space=self.SPACE,
                                       template="echo score=1; exit 3")
        with pytest.raises(ObjectiveError, match="status 3"):
            obj.evaluate({"x": 0.1})

    def test_timeout_fails(self):
        obj = ExternalCommandObjective(name="e", space=self.SPACE,
                                       template="sleep 5", timeout=0.2)
        with pytest.raises(ObjectiveError, match="timed out"):
            obj.evaluate({"x": 0.1})

    def test_missing_score_line_fails(self):
        obj = ExternalCommandObjective(name="e", space=self.SPACE,
                                       template="echo hello")
        with pytest.raises(ObjectiveError, match="no 'score='"):
            obj.evaluate({"x": 0.1})


def test_builtin_objectives_carry_descriptors():
    for name in ("branin", "mixed"):
        obj = builtin_objective(name)
        assert obj.known_optimum is not None
        score, cost = obj.evaluate(obj.known_optimum)
        assert score == pytest.approx(obj.known_best_score, abs=1e-4)
        assert cost >= 0.0
    with pytest.raises(ObjectiveError):
        builtin_objective("nope")
